#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "spectrum.hpp"

namespace critwave {

//============================================================================
// J(s) = |1+s|^p (1+s) - 1 - (p+1) s = sum_{j>=2} c_j s^j
//============================================================================
struct NonlinearityExpansion {
    Dimension dim{3};
    int order = 2;
    std::vector<double> c;  // c[j], j = 0..order; c[0] = c[1] = 0
    bool exact = true;      // polynomial (N = 3, 4) or truncated series (N = 5)

    double J(double s) const {
        double acc = 0.0;
        for (int j = order; j >= 2; --j) acc = (acc + c[j]) * s;
        return acc * s;
    }
};

inline NonlinearityExpansion expand_J(Dimension d, int order) {
    if (order < 2) throw OutOfRange("expansion order must be at least 2", 0);
    NonlinearityExpansion e;
    e.dim = d;
    e.order = order;
    e.c.assign(static_cast<std::size_t>(order) + 1, 0.0);
    const double q = d.power() + 1.0;
    // generalised binomial C(q, j)
    double b = 1.0;
    for (int j = 1; j <= order; ++j) {
        b *= (q - (j - 1)) / j;
        if (j >= 2) e.c[static_cast<std::size_t>(j)] = b;
    }
    e.exact = d.value() != 5;
    return e;
}

// R(h) = |W+h|^p (W+h) - W^{p+1} - (p+1) W^p h, evaluated without the
// O(1) cancellation when h is small against W.
inline double remainder_R(Dimension d, double W, double h) {
    const double s = h / W;
    const double wp1 = d.nonlinearity(W);
    switch (d.value()) {
    case 3: {
        const double s2 = s * s;
        return wp1 * s2 * (10.0 + s * (10.0 + s * (5.0 + s)));
    }
    case 4: return wp1 * s * s * (3.0 + s);
    default:
        if (s > -0.5) {
            const double q = 7.0 / 3.0;
            return wp1 * (std::expm1(q * std::log1p(s)) - q * s);
        }
        return d.nonlinearity(W + h) - wp1 - (d.power() + 1.0) * d.abs_power(W) * h;
    }
}

//============================================================================
// U_k^a = W + sum_j e^{-j e0 t} Phi_j
//============================================================================
struct ApproxSolution {
    double a = 0.0;
    int k = 0;
    double e0 = 0.0;
    std::vector<RadialField> phi;       // phi[0] = Phi_1
    std::vector<double> cancellation;   // relative size of the order-j residual coefficient after the solve
    double t_ref = 0.0;                 // max |h_k / W| <= 1/2 for t >= t_ref
    GridPtr grid;

    Dimension dim() const { return grid->dim(); }

    std::vector<double> h(double t) const {
        std::vector<double> out(grid->size(), 0.0);
        for (int j = 1; j <= k; ++j) {
            const double z = std::exp(-j * e0 * t);
            const auto& p = phi[static_cast<std::size_t>(j - 1)];
            for (std::size_t i = 0; i < out.size(); ++i) out[i] += z * p[i];
        }
        return out;
    }

    double max_ratio(double t) const {
        const auto hh = h(t);
        const Dimension d = dim();
        double m = 0.0;
        for (std::size_t i = 0; i < hh.size(); ++i) m = std::max(m, std::abs(hh[i]) / eval_W(d, grid->r(i)));
        return m;
    }
};

namespace detail {

// coefficient of z^n in sum_j c_j W^{p+1-j} P(z)^j, P = sum_{i<n} Phi_i z^i
inline std::vector<double> collect_source(const std::vector<RadialField>& phi, int n,
                                          const NonlinearityExpansion& ex) {
    const GridPtr& g = phi.front().grid;
    const Dimension d = g->dim();
    const double q = d.power() + 1.0;
    const std::size_t nn = static_cast<std::size_t>(n);
    std::vector<double> out(g->size(), 0.0);
    std::vector<double> P(nn + 1), Pj(nn + 1), tmp(nn + 1);
    for (std::size_t i = 0; i < g->size(); ++i) {
        std::fill(P.begin(), P.end(), 0.0);
        for (std::size_t m = 1; m < nn; ++m) P[m] = phi[m - 1][i];
        const double W = eval_W(d, g->r(i));
        Pj = P;
        double acc = 0.0;
        for (int j = 2; j <= n && j <= ex.order; ++j) {
            std::fill(tmp.begin(), tmp.end(), 0.0);
            for (std::size_t a = 1; a <= nn; ++a)
                for (std::size_t b = 1; a + b <= nn; ++b) tmp[a + b] += Pj[a] * P[b];
            Pj = tmp;
            const double cj = ex.c[static_cast<std::size_t>(j)];
            if (cj != 0.0) acc += cj * std::pow(W, q - j) * Pj[nn];
        }
        out[i] = acc;
    }
    return out;
}

} // namespace detail

inline ApproxSolution build_phi_sequence(double a, int k_max, const SpectralPair& sp,
                                         const NonlinearityExpansion& ex,
                                         std::optional<double> t_construct = std::nullopt) {
    if (std::abs(a) > 2.0) throw OutOfRange("|a| must not exceed 2", 0);
    if (k_max < 1 || k_max > 6) throw OutOfRange("series order must lie in 1..6", 0);
    const GridPtr& g = sp.Y.grid;
    const Dimension d = g->dim();
    if (ex.order < k_max) throw OutOfRange("expansion order below the series order", 0);
    const LinearizedOperator op(g);

    ApproxSolution ap;
    ap.a = a;
    ap.k = k_max;
    ap.e0 = sp.e0;
    ap.grid = g;
    ap.phi.push_back(a * sp.Y);
    ap.cancellation.push_back(0.0);

    for (int n = 2; n <= k_max; ++n) {
        const RadialField psi(g, detail::collect_source(ap.phi, n, ex));
        const double sigma = n * n * sp.e0 * sp.e0;
        RadialField next = resolvent_solve(op, sigma, psi, sp);
        // order-n coefficient of the new residual: sigma Phi_n + L Phi_n - Psi_n
        auto chk = op.apply(next.values);
        for (std::size_t i = 0; i < chk.size(); ++i) chk[i] += sigma * next[i] - psi[i];
        const double pn = op.norm(psi);
        ap.cancellation.push_back(pn > 0.0 ? std::sqrt(op.lap.inner(chk, chk)) / pn : 0.0);
        ap.phi.push_back(std::move(next));
    }

    if (a == 0.0) {
        ap.t_ref = 0.0;
    } else {
        double lo = -20.0 / sp.e0, hi = 60.0 / sp.e0;
        for (int it = 0; it < 80; ++it) {
            const double mid = 0.5 * (lo + hi);
            (ap.max_ratio(mid) > 0.5 ? lo : hi) = mid;
        }
        ap.t_ref = hi;
    }
    if (d.value() == 5 && t_construct && ap.max_ratio(*t_construct) >= 0.9)
        throw SeriesDomainViolation("|h/W| reaches " + std::to_string(ap.max_ratio(*t_construct)) +
                                    " at t=" + std::to_string(*t_construct) + "; the expansion needs |h/W| < 0.9");
    return ap;
}

inline std::pair<RadialField, RadialField> assemble_U(const ApproxSolution& ap, double t) {
    const Dimension d = ap.dim();
    const GridPtr& g = ap.grid;
    std::vector<double> u(g->size()), v(g->size(), 0.0);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = eval_W(d, g->r(i));
    for (int j = 1; j <= ap.k; ++j) {
        const double z = std::exp(-j * ap.e0 * t);
        const auto& p = ap.phi[static_cast<std::size_t>(j - 1)];
        for (std::size_t i = 0; i < u.size(); ++i) {
            u[i] += z * p[i];
            v[i] += -j * ap.e0 * z * p[i];
        }
    }
    return {RadialField(g, std::move(u)), RadialField(g, std::move(v))};
}

//============================================================================
// eps_k = d_t^2 U - Delta U - |U|^p U, with Delta W taken exactly so that
// a = 0 gives zero; the grid part is d_t^2 h + L_h h - R(h).
//============================================================================
struct ResidualReport {
    std::vector<double> t;
    std::vector<double> l2;
    std::vector<double> hdual;  // sqrt(<eps, (-Delta_h)^{-1} eps>)
    double exponent = std::numeric_limits<double>::quiet_NaN();
    bool noise_floor = false;
    static constexpr double floor = 1e-12;

    double fitted_exponent() const {
        if (noise_floor) throw NoiseFloor("residual norms are below 1e-12; no decay to fit");
        return exponent;
    }
};

inline std::vector<double> series_residual(const ApproxSolution& ap, const LinearizedOperator& op, double t) {
    const Dimension d = ap.dim();
    const GridPtr& g = ap.grid;
    const auto h = ap.h(t);
    std::vector<double> htt(g->size(), 0.0);
    for (int j = 1; j <= ap.k; ++j) {
        const double z = std::exp(-j * ap.e0 * t);
        const double f = j * ap.e0 * j * ap.e0 * z;
        const auto& p = ap.phi[static_cast<std::size_t>(j - 1)];
        for (std::size_t i = 0; i < htt.size(); ++i) htt[i] += f * p[i];
    }
    auto eps = op.apply(h);
    for (std::size_t i = op.lap.first(); i < op.lap.end(); ++i)
        eps[i] += htt[i] - remainder_R(d, eval_W(d, g->r(i)), h[i]);
    eps[g->last()] = 0.0;
    op.lap.fill_origin(eps);
    return eps;
}

// least-squares slope of log y against t, sign flipped
inline double fit_decay_rate(const std::vector<double>& t, const std::vector<double>& y, double floor = 0.0) {
    double st = 0, sy = 0, stt = 0, sty = 0;
    int n = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!(y[i] > floor)) continue;
        const double ly = std::log(y[i]);
        st += t[i];
        sy += ly;
        stt += t[i] * t[i];
        sty += t[i] * ly;
        ++n;
    }
    if (n < 3) return std::numeric_limits<double>::quiet_NaN();
    const double den = n * stt - st * st;
    return -(n * sty - st * sy) / den;
}

inline ResidualReport residual(const ApproxSolution& ap, const std::vector<double>& t_window) {
    const LinearizedOperator op(ap.grid);
    const auto lu = op.lap.factor(std::vector<double>(ap.grid->size(), 0.0));
    ResidualReport rep;
    for (double t : t_window) {
        const auto eps = series_residual(ap, op, t);
        const auto inv = op.lap.solve(lu, eps);
        rep.t.push_back(t);
        rep.l2.push_back(std::sqrt(op.lap.inner(eps, eps)));
        rep.hdual.push_back(std::sqrt(std::max(0.0, op.lap.inner(eps, inv))));
    }
    int above = 0;
    for (double x : rep.l2)
        if (x > ResidualReport::floor) ++above;
    rep.noise_floor = above < 3;
    if (!rep.noise_floor) rep.exponent = fit_decay_rate(rep.t, rep.l2, ResidualReport::floor);
    return rep;
}

// evenly spaced samples over [t_start, t_start + length]
inline std::vector<double> time_window(double t_start, double length, int samples = 41) {
    std::vector<double> t(static_cast<std::size_t>(samples));
    for (int i = 0; i < samples; ++i) t[static_cast<std::size_t>(i)] = t_start + length * i / (samples - 1);
    return t;
}

} // namespace critwave

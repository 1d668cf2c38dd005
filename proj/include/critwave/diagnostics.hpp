#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "ground_state.hpp"
#include "snapshot.hpp"

namespace critwave {

//============================================================================
// phi = 1 on [0,1], 0 on [2,inf), quintic smoothstep between (C^2)
//============================================================================
struct CutoffPair {
    double R = 1.0;

    explicit CutoffPair(double radius) : R(radius) {
        if (!(radius > 0.0)) throw OutOfRange("cutoff radius must be positive", 0);
    }

    static double profile(double x) {
        if (x <= 1.0) return 1.0;
        if (x >= 2.0) return 0.0;
        const double s = x - 1.0;
        // factored so that rounding cannot push it below 0
        return (1.0 - s) * (1.0 - s) * (1.0 - s) * (1.0 + s * (3.0 + 6.0 * s));
    }
    static double profile_prime(double x) {
        if (x <= 1.0 || x >= 2.0) return 0.0;
        const double s = x - 1.0;
        return -30.0 * s * s * (1.0 - s) * (1.0 - s);
    }

    double phi(double r) const { return profile(r / R); }
    double psi(double r) const { return r * profile(r / R); }
};

//============================================================================
// g_R = int psi_R u_r v + (N-1)/2 int phi_R u v
//============================================================================
inline double g_R(const RadialField& u, const RadialField& v, const CutoffPair& cut) {
    require_same_grid(u, v);
    const RadialGrid& g = *u.grid;
    const auto du = radial_derivative(u);
    const double k = (g.dim().n() - 1.0) / 2.0;
    std::vector<double> f(u.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double r = g.r(i);
        f[i] = (cut.psi(r) * du[i] + k * cut.phi(r) * u[i]) * v[i];
    }
    // beyond 2R the integrand is zero; only a short cut needs the tail
    return integrate(g, f, 2.0 * cut.R < g.r_max() ? Tail::none : Tail::gradient);
}

// integral over r >= R: trapezoid restarted at the first node past R, plus tail
inline double integrate_exterior(const RadialGrid& g, const std::vector<double>& f, double R, Tail t) {
    const auto& w = g.weights();
    const std::size_t M = g.last();
    std::size_t i0 = 0;
    while (i0 <= M && g.r(i0) < R - 1e-12) ++i0;
    if (i0 > M) return tail_integral(g, f, t);
    double s = 0.0;
    for (std::size_t i = i0; i <= M; ++i) s += (i == i0 && i0 > 0 && i0 < M ? 0.5 : 1.0) * w[i] * f[i];
    return s + tail_integral(g, f, t);
}

// e(u) and r(u) pointwise
struct Densities {
    std::vector<double> e, r;
};

inline Densities densities(const RadialField& u, const RadialField& v) {
    require_same_grid(u, v);
    const RadialGrid& g = *u.grid;
    const Dimension d = g.dim();
    const auto du = radial_derivative(u);
    Densities out;
    out.e.resize(u.size());
    out.r.resize(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double r = g.r(i);
        const double c = d.abs_critical(u[i]);
        out.e[i] = 0.5 * v[i] * v[i] + 0.5 * du[i] * du[i] - c / d.critical_exponent();
        // node 0 carries zero weight, so the Hardy term can be dropped there
        out.r[i] = v[i] * v[i] + du[i] * du[i] + (r > 0.0 ? u[i] * u[i] / (r * r) : 0.0) + c;
    }
    return out;
}

struct DensityReport {
    std::vector<double> R;
    std::vector<double> energy;    // int_{r >= R} e(u)
    std::vector<double> positive;  // int_{r >= R} r(u)
};

inline DensityReport exterior_densities(const RadialField& u, const RadialField& v, const std::vector<double>& radii) {
    const auto dens = densities(u, v);
    DensityReport rep;
    for (double R : radii) {
        rep.R.push_back(R);
        rep.energy.push_back(integrate_exterior(*u.grid, dens.e, R, Tail::gradient));
        rep.positive.push_back(integrate_exterior(*u.grid, dens.r, R, Tail::gradient));
    }
    return rep;
}

//============================================================================
// y = int u^2 (phi_R), y' = 2 int u v (phi_R)
//============================================================================
struct YPair {
    double y = 0.0;
    double yprime = 0.0;
};

inline YPair y_functionals(const RadialField& u, const RadialField& v, std::optional<CutoffPair> cut = std::nullopt) {
    require_same_grid(u, v);
    const RadialGrid& g = *u.grid;
    std::vector<double> a(u.size()), b(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double w = cut ? cut->phi(g.r(i)) : 1.0;
        a[i] = u[i] * u[i] * w;
        b[i] = 2.0 * u[i] * v[i] * w;
    }
    const bool cut_inside = cut && 2.0 * cut->R < g.r_max();
    YPair out;
    try {
        out.y = integrate(g, a, cut_inside ? Tail::none : Tail::square);
    } catch (const DivergentTail&) {
        throw DivergentTail("u is not in L^2 for N=" + std::to_string(g.dim().value()) +
                            " with a W-like tail; use a cutoff");
    }
    out.yprime = integrate(g, b, cut_inside ? Tail::none : Tail::square);
    return out;
}

//============================================================================
// g_R' against (|v|^2 + |grad u|^2 - |grad W|^2)/(N-2)
//============================================================================
struct VirialReport {
    double R = 0.0;
    std::vector<double> t, gR, gR_fd, main_terms, exterior_density;
    double max_discrepancy = 0.0;
    double C_A = 0.0;  // max |g_R' - main| / exterior density over samples
};

inline double virial_main_terms(const RadialField& u, const RadialField& v) {
    const double n = u.dim().n();
    return (l2_norm_sq(v) + gradient_deficit(u)) / (n - 2.0);
}

inline VirialReport virial_identity_check(const SnapshotSet& snaps, const CutoffPair& cut) {
    VirialReport rep;
    rep.R = cut.R;
    const std::size_t n = snaps.size();
    if (n < 3) return rep;
    std::vector<double> g(n);
    for (std::size_t k = 0; k < n; ++k) g[k] = g_R(snaps.u(k), snaps.v(k), cut);
    const double dt = snaps.dt();
    for (std::size_t k = 1; k + 1 < n; ++k) {
        const RadialField u = snaps.u(k), v = snaps.v(k);
        const double fd = (g[k + 1] - g[k - 1]) / (2.0 * dt);
        const double main = virial_main_terms(u, v);
        const double ext = exterior_densities(u, v, {cut.R}).positive.front();
        rep.t.push_back(snaps.t(k));
        rep.gR.push_back(g[k]);
        rep.gR_fd.push_back(fd);
        rep.main_terms.push_back(main);
        rep.exterior_density.push_back(ext);
        const double diff = std::abs(fd - main);
        rep.max_discrepancy = std::max(rep.max_discrepancy, diff);
        if (ext > 0.0) rep.C_A = std::max(rep.C_A, diff / ext);
    }
    return rep;
}

//============================================================================
// y'' = 2 int (v^2 - |grad u|^2 + |u|^{2*})
//     = 4(N-1)/(N-2) |v|^2 + 4/(N-2) (|grad u|^2 - |grad W|^2)   at E = E(W,0)
//============================================================================
struct YppReport {
    std::vector<double> t, y, yprime, ypp_fd, ypp_direct, ypp_threshold, d;
    double max_relative_error = 0.0;  // FD against the threshold form
    bool yprime_negative = true;
    bool ypp_above_d = true;
};

inline YppReport ypp_identity_check(const SnapshotSet& snaps) {
    YppReport rep;
    const std::size_t n = snaps.size();
    if (n < 3) return rep;
    const Dimension d = snaps.grid->dim();
    if (d.value() != 5) throw OutOfRange("the global y'' identity needs u in L^2 (N=5)", 0);
    const double nn = d.n();
    std::vector<YPair> ys(n);
    for (std::size_t k = 0; k < n; ++k) ys[k] = y_functionals(snaps.u(k), snaps.v(k));
    const double dt = snaps.dt();
    double scale = 0.0, worst = 0.0;
    for (std::size_t k = 1; k + 1 < n; ++k) {
        const RadialField u = snaps.u(k), v = snaps.v(k);
        const double K = l2_norm_sq(v);
        const double def = gradient_deficit(u);
        const double direct = 2.0 * (K - grad_norm_sq(u) + critical_norm(u));
        const double thr = 4.0 * (nn - 1.0) / (nn - 2.0) * K + 4.0 / (nn - 2.0) * def;
        const double fd = (ys[k + 1].y - 2.0 * ys[k].y + ys[k - 1].y) / (dt * dt);
        const double dd = std::abs(def) + K;
        rep.t.push_back(snaps.t(k));
        rep.y.push_back(ys[k].y);
        rep.yprime.push_back(ys[k].yprime);
        rep.ypp_fd.push_back(fd);
        rep.ypp_direct.push_back(direct);
        rep.ypp_threshold.push_back(thr);
        rep.d.push_back(dd);
        scale = std::max(scale, std::abs(thr));
        worst = std::max(worst, std::abs(fd - thr));
        if (!(ys[k].yprime < 0.0)) rep.yprime_negative = false;
        if (!(thr >= dd)) rep.ypp_above_d = false;
    }
    rep.max_relative_error = scale > 0.0 ? worst / scale : 0.0;
    return rep;
}

//============================================================================
// y_R'' >= (main positive terms) - C0 / R^{N-2}; the mechanism is called
// active at a sample when the main terms are positive, y_R' < 0 and
// y_R'' > 0 (physical time).
//============================================================================
struct ConcavityReport {
    double R = 0.0;
    std::vector<double> t, yR, yR_prime, yR_pp, main_terms;
    std::vector<bool> active;
    std::optional<double> activation_time;  // start of the final all-active stretch
    double C0_fit = 0.0;
};

inline ConcavityReport concavity_blowup_monitor(const SnapshotSet& snaps, const CutoffPair& cut) {
    ConcavityReport rep;
    rep.R = cut.R;
    const std::size_t n = snaps.size();
    if (n < 3) return rep;
    const double nn = snaps.grid->dim().n();
    std::vector<YPair> ys(n);
    for (std::size_t k = 0; k < n; ++k) ys[k] = y_functionals(snaps.u(k), snaps.v(k), cut);
    const double dt = snaps.dt();
    for (std::size_t k = 1; k + 1 < n; ++k) {
        const RadialField u = snaps.u(k), v = snaps.v(k);
        const double K = l2_norm_sq(v);
        const double main = 4.0 * (nn - 1.0) / (nn - 2.0) * K + 4.0 / (nn - 2.0) * gradient_deficit(u);
        const double ypp = (ys[k + 1].y - 2.0 * ys[k].y + ys[k - 1].y) / (dt * dt);
        const double yp = ys[k].yprime;
        rep.t.push_back(snaps.t(k));
        rep.yR.push_back(ys[k].y);
        rep.yR_prime.push_back(yp);
        rep.yR_pp.push_back(ypp);
        rep.main_terms.push_back(main);
        rep.active.push_back(main > 0.0 && yp < 0.0 && ypp > 0.0);
        rep.C0_fit = std::max(rep.C0_fit, (main - ypp) * std::pow(cut.R, nn - 2.0));
    }
    if (!rep.active.empty() && rep.active.back()) {
        std::size_t k = rep.active.size() - 1;
        while (k > 0 && rep.active[k - 1]) --k;
        rep.activation_time = rep.t[k];
    }
    return rep;
}

} // namespace critwave

#pragma once

#include <cmath>
#include <boost/math/interpolators/cubic_hermite.hpp>

#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "dimension.hpp"
#include "errors.hpp"
#include "radial_grid.hpp"

namespace critwave {

//============================================================================
// W(r) = (1 + r^2/(N(N-2)))^{-(N-2)/2} and its radial derivatives
//============================================================================
inline double eval_W(Dimension d, double r) {
    const double n = d.n();
    return std::pow(1.0 + r * r / (n * (n - 2.0)), -(n - 2.0) / 2.0);
}

inline double eval_W_prime(Dimension d, double r) {
    const double n = d.n();
    return -(r / n) * std::pow(1.0 + r * r / (n * (n - 2.0)), -n / 2.0);
}

inline double eval_W_second(Dimension d, double r) {
    const double n = d.n();
    const double a = n * (n - 2.0);
    const double s = 1.0 + r * r / a;
    return -(1.0 / n) * std::pow(s, -n / 2.0) + (r * r / a) * std::pow(s, -n / 2.0 - 1.0);
}

// -Delta W = W^{(N+2)/(N-2)}
inline double eval_minus_laplacian_W(Dimension d, double r) {
    const double w = eval_W(d, r);
    return d.nonlinearity(w);
}

inline RadialField ground_state(const GridPtr& g) {
    const Dimension d = g->dim();
    return RadialField::sample(g, [d](double r) { return eval_W(d, r); });
}

// Closed form of |grad W|_2^2 by Beta-function reduction:
// |S^{N-1}| (N(N-2))^{N/2} (N-2)/N * B((N+2)/2, (N-2)/2) / 2.
inline double grad_norm_sq_W_exact(Dimension d) {
    const double n = d.n();
    return d.sphere_area() * std::pow(n * (n - 2.0), n / 2.0) * (n - 2.0) / n * 0.5 *
           std::beta((n + 2.0) / 2.0, (n - 2.0) / 2.0);
}

inline double energy_W_exact(Dimension d) { return grad_norm_sq_W_exact(d) / d.n(); }

struct VariationalConstants {
    double grad_sq = 0.0;        // |grad W|_2^2
    double critical_norm = 0.0;  // |W|_{2*}^{2*}
    double richardson_error = 0.0;
};

namespace detail {
inline VariationalConstants W_quadrature(const RadialGrid& g) {
    const Dimension d = g.dim();
    std::vector<double> gs(g.size()), cr(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double wp = eval_W_prime(d, g.r(i));
        gs[i] = wp * wp;
        cr[i] = d.abs_critical(eval_W(d, g.r(i)));
    }
    return {integrate(g, gs, Tail::gradient), integrate(g, cr, Tail::critical), 0.0};
}
} // namespace detail

// Quadrature of |grad W|^2 and |W|^{2*} with tail correction.  The error
// estimate compares against the same rule at spacing 2 dr.
inline VariationalConstants grad_norm_sq_W(Dimension d, const RadialGrid& g) {
    if (!(g.dim() == d)) throw MismatchedGrids();
    VariationalConstants fine = detail::W_quadrature(g);
    const RadialGrid coarse(d, 2.0 * g.dr(), g.r_max());
    const VariationalConstants c = detail::W_quadrature(coarse);
    fine.richardson_error = std::max(std::abs(fine.grad_sq - c.grad_sq), std::abs(fine.critical_norm - c.critical_norm)) /
                            3.0 / fine.grad_sq;
    if (fine.richardson_error > 1e-6)
        throw GridTooCoarse("estimated relative quadrature error " + std::to_string(fine.richardson_error));
    return fine;
}

//============================================================================
// Energy and distance functionals
//============================================================================
struct EnergyReport {
    double kinetic = 0.0;    // 1/2 |v|_2^2
    double gradient = 0.0;   // 1/2 |grad u|_2^2
    double potential = 0.0;  // 1/2* |u|_{2*}^{2*}
    double total = 0.0;
};

inline double critical_norm(const RadialField& u) {
    const Dimension d = u.dim();
    std::vector<double> c(u.size());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = d.abs_critical(u[i]);
    return integrate(*u.grid, c, Tail::critical);
}

inline EnergyReport energy(const RadialField& u, const RadialField& v) {
    require_same_grid(u, v);
    const Dimension d = u.dim();
    EnergyReport e;
    e.kinetic = 0.5 * l2_norm_sq(v);
    e.gradient = 0.5 * grad_norm_sq(u);
    e.potential = critical_norm(u) / d.critical_exponent();
    e.total = e.kinetic + e.gradient - e.potential;
    return e;
}

// |grad u|^2 - |grad W|^2 written as int grad h.(grad h + 2 grad W) with
// h = u - W, which avoids cancelling two O(1) numbers near W.
inline double gradient_deficit(const RadialField& u) {
    const Dimension d = u.dim();
    const RadialGrid& g = *u.grid;
    std::vector<double> h(u.size());
    for (std::size_t i = 0; i < h.size(); ++i) h[i] = u[i] - eval_W(d, g.r(i));
    const auto dh = radial_derivative(h, g.dr());
    std::vector<double> pr(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) pr[i] = dh[i] * (dh[i] + 2.0 * eval_W_prime(d, g.r(i)));
    return integrate(g, pr, Tail::gradient);
}

inline double d_functional(const RadialField& u, const RadialField& v) {
    require_same_grid(u, v);
    return std::abs(gradient_deficit(u)) + l2_norm_sq(v);
}

//============================================================================
// Scaling action (f, g) -> (delta l^{-(N-2)/2} f(./l), delta l^{-N/2} g(./l))
//============================================================================
struct SymmetryAction {
    double lambda0 = 1.0;
    int sign = 1;

    SymmetryAction compose(const SymmetryAction& o) const { return {lambda0 * o.lambda0, sign * o.sign}; }
    static SymmetryAction identity() { return {}; }
};

// Hermite slopes from the five-point stencil, clipped with Hyman's filter so
// that monotone stretches of the data stay monotone.
inline std::vector<double> monotone_slopes(const std::vector<double>& f, double dr) {
    std::vector<double> s = radial_derivative(f, dr);
    const std::size_t n = f.size();
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double dl = (f[i] - f[i - 1]) / dr, dr_ = (f[i + 1] - f[i]) / dr;
        if (dl * dr_ > 0.0) {
            const double cap = 3.0 * std::min(std::abs(dl), std::abs(dr_));
            if (s[i] * dl <= 0.0) s[i] = 0.0;
            else if (std::abs(s[i]) > cap) s[i] = std::copysign(cap, dl);
        }
    }
    return s;
}

namespace detail {
inline double tail_amplitude(const RadialField& f, std::size_t i) {
    const double n = f.dim().n();
    return f[i] * std::pow(f.grid->r(i), n - 2.0);
}
} // namespace detail

inline std::pair<RadialField, RadialField> apply_symmetry(const RadialField& u, const RadialField& v,
                                                          SymmetryAction act) {
    require_same_grid(u, v);
    if (!(act.lambda0 > 0.0)) throw OutOfRange("scale must be positive", 0);
    if (act.sign != 1 && act.sign != -1) throw OutOfRange("sign must be +1 or -1", 0);
    const RadialGrid& g = *u.grid;
    const double n = g.dim().n();
    const double lam = act.lambda0;
    if (lam == 1.0 && act.sign == 1) return {u, v};

    const std::size_t M = g.last();
    const double r_max = g.r_max();
    if (lam < 1.0) {
        // values beyond r_max are needed: u must already follow its r^{-(N-2)}
        // law there and v must have left no trace
        const double su = sup_norm(u), sv = sup_norm(v);
        const double A = detail::tail_amplitude(u, M), B = detail::tail_amplitude(u, (3 * M) / 4);
        const bool u_ok = std::abs(u[M]) <= 1e-12 * su || std::abs(A - B) <= 1e-2 * std::abs(A);
        double v_edge = 0.0;
        for (std::size_t i = static_cast<std::size_t>(lam * M); i <= M; ++i) v_edge = std::max(v_edge, std::abs(v[i]));
        const bool v_ok = v_edge <= 1e-10 * sv || sv == 0.0;
        if (!u_ok || !v_ok)
            throw SymmetryRangeError("scale " + std::to_string(lam) + " pulls data from beyond r_max");
    }

    auto resample = [&](const RadialField& f, double amp, bool power_tail) {
        std::vector<double> x(g.nodes()), y(f.values);
        std::vector<double> s = monotone_slopes(f.values, g.dr());
        boost::math::interpolators::cubic_hermite<std::vector<double>> spline(std::move(x), std::move(y), std::move(s));
        // beyond r_max: a x^{-(N-2)} + b x^{-N} through the nodes 3M/4 and M
        const std::size_t k = (3 * M) / 4;
        const double r1 = g.r(k), r2 = r_max;
        const double G1 = f[k] * std::pow(r1, n - 2.0), G2 = f[M] * std::pow(r2, n - 2.0);
        const double b = (G1 - G2) / (1.0 / (r1 * r1) - 1.0 / (r2 * r2));
        const double a = G2 - b / (r2 * r2);
        std::vector<double> out(g.size());
        for (std::size_t i = 0; i <= M; ++i) {
            const double s = g.r(i) / lam;
            double val;
            if (s <= r_max) val = spline(s);
            else val = power_tail ? std::pow(s, 2.0 - n) * (a + b / (s * s)) : 0.0;
            out[i] = amp * val;
        }
        return RadialField(u.grid, std::move(out));
    };
    const double du = act.sign * std::pow(lam, -(n - 2.0) / 2.0);
    const double dv = act.sign * std::pow(lam, -n / 2.0);
    return {resample(u, du, true), resample(v, dv, false)};
}

//============================================================================
// Scaling generator W~ = -c~((N-2)/2 W + r W'), normalised in H^1-dot.
// The translation generators are not radial; every radial inner product
// against them vanishes, so they are not stored.
//============================================================================
struct Generators {
    RadialField W_tilde;
    double c_tilde = 0.0;
    std::string note;
};

inline double eval_W_tilde_unscaled(Dimension d, double r) {
    return (d.n() - 2.0) / 2.0 * eval_W(d, r) + r * eval_W_prime(d, r);
}

// radial derivative of (N-2)/2 W + r W'
inline double eval_W_tilde_unscaled_prime(Dimension d, double r) {
    return d.n() / 2.0 * eval_W_prime(d, r) + r * eval_W_second(d, r);
}

inline Generators generators(Dimension d, const GridPtr& g) {
    if (!(g->dim() == d)) throw MismatchedGrids();
    std::vector<double> sq(g->size());
    for (std::size_t i = 0; i < sq.size(); ++i) {
        const double p = eval_W_tilde_unscaled_prime(d, g->r(i));
        sq[i] = p * p;
    }
    const double c = 1.0 / std::sqrt(integrate(*g, sq, Tail::gradient));
    Generators out;
    out.c_tilde = c;
    out.W_tilde = RadialField::sample(g, [d, c](double r) { return -c * eval_W_tilde_unscaled(d, r); });
    out.note = "translation generators W_j are odd; radial inner products with them vanish";
    return out;
}

} // namespace critwave

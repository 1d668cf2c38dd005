#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "dimension.hpp"
#include "errors.hpp"

namespace critwave {

//============================================================================
// Uniform radial grid r_i = i*dr, i = 0..M, with trapezoid weights that
// already carry |S^{N-1}| r^{N-1}, so sum(w_i f_i) approximates the
// integral of a radial f over R^N.
//============================================================================
class RadialGrid {
public:
    RadialGrid(Dimension dim, double dr, double r_max) : dim_(dim), dr_(dr) {
        if (!(dr > 0.0) || !std::isfinite(dr))
            throw OutOfRange("grid spacing must be positive", 0);
        const double n = dim.n();
        const double r_min = 50.0 * std::sqrt(n * (n - 2.0));
        if (!(r_max >= r_min * (1.0 - 1e-12)))
            throw OutOfRange("r_max must be at least " + std::to_string(r_min) + " for N=" +
                                 std::to_string(dim.value()), 0);
        M_ = static_cast<std::size_t>(std::llround(r_max / dr));
        if (M_ < 16) throw OutOfRange("grid needs at least 16 cells", 0);
        r_.resize(M_ + 1);
        w_.resize(M_ + 1);
        const double area = dim.sphere_area();
        for (std::size_t i = 0; i <= M_; ++i) {
            r_[i] = static_cast<double>(i) * dr;
            w_[i] = area * std::pow(r_[i], n - 1.0) * dr;
        }
        w_[M_] *= 0.5;
    }

    Dimension dim() const { return dim_; }
    double dr() const { return dr_; }
    double r_max() const { return r_[M_]; }
    std::size_t last() const { return M_; }
    std::size_t size() const { return M_ + 1; }
    double r(std::size_t i) const { return r_[i]; }
    const std::vector<double>& nodes() const { return r_; }
    const std::vector<double>& weights() const { return w_; }

    bool same_as(const RadialGrid& o) const {
        return dim_ == o.dim_ && M_ == o.M_ && dr_ == o.dr_;
    }

private:
    Dimension dim_;
    double dr_;
    std::size_t M_ = 0;
    std::vector<double> r_;
    std::vector<double> w_;
};

using GridPtr = std::shared_ptr<const RadialGrid>;

inline GridPtr make_grid(int n, double dr, double r_max) {
    return std::make_shared<const RadialGrid>(Dimension(n), dr, r_max);
}

//============================================================================
// RadialField
//============================================================================
struct RadialField {
    GridPtr grid;
    std::vector<double> values;

    RadialField() = default;
    explicit RadialField(GridPtr g) : grid(std::move(g)), values(grid->size(), 0.0) {}
    RadialField(GridPtr g, std::vector<double> v) : grid(std::move(g)), values(std::move(v)) {
        if (values.size() != grid->size()) throw Error("field size does not match its grid");
        for (double x : values)
            if (!std::isfinite(x)) throw Error("non-finite value in radial field");
    }

    template <class F>
    static RadialField sample(GridPtr g, F&& f) {
        std::vector<double> v(g->size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(g->r(i));
        return RadialField(std::move(g), std::move(v));
    }

    Dimension dim() const { return grid->dim(); }
    std::size_t size() const { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }
    double& operator[](std::size_t i) { return values[i]; }

    RadialField& operator+=(const RadialField& o);
    RadialField& operator-=(const RadialField& o);
    RadialField& operator*=(double s) {
        for (double& x : values) x *= s;
        return *this;
    }
};

inline void require_same_grid(const RadialField& a, const RadialField& b) {
    if (a.grid != b.grid && !(a.grid && b.grid && a.grid->same_as(*b.grid)))
        throw MismatchedGrids();
}

inline RadialField& RadialField::operator+=(const RadialField& o) {
    require_same_grid(*this, o);
    for (std::size_t i = 0; i < values.size(); ++i) values[i] += o.values[i];
    return *this;
}
inline RadialField& RadialField::operator-=(const RadialField& o) {
    require_same_grid(*this, o);
    for (std::size_t i = 0; i < values.size(); ++i) values[i] -= o.values[i];
    return *this;
}
inline RadialField operator+(RadialField a, const RadialField& b) { return a += b; }
inline RadialField operator-(RadialField a, const RadialField& b) { return a -= b; }
inline RadialField operator*(double s, RadialField a) { return a *= s; }

//============================================================================
// Quadrature with an analytic power-law tail beyond r_max.
//
// Tail names the decay class of the integrand f (not of f r^{N-1}):
//   gradient  ~ r^{-2(N-1)}  (|grad u|^2 for W-like u)
//   critical  ~ r^{-2N}      (|u|^{2*}, W^p f^2)
//   square    ~ r^{-2(N-2)}  (u^2, not integrable for N <= 4)
//   none      integrand treated as zero beyond r_max
//============================================================================
enum class Tail { none, gradient, critical, square };

inline double decay_power(Dimension d, Tail t) {
    const double n = d.n();
    switch (t) {
    case Tail::gradient: return 2.0 * (n - 1.0);
    case Tail::critical: return 2.0 * n;
    case Tail::square: return 2.0 * (n - 2.0);
    default: return 0.0;
    }
}

// Integral of f r^{N-1} over [r_M, inf) from a two-term fit
// g(r) = A r^{-p} + B r^{-p-2} through the nodes 3M/4 and M.
inline double tail_integral(const RadialGrid& g, const std::vector<double>& f, Tail t) {
    if (t == Tail::none) return 0.0;
    const double n = g.dim().n();
    const double p = decay_power(g.dim(), t) - (n - 1.0);
    const std::size_t M = g.last();
    const std::size_t a = (3 * M) / 4;
    const double r1 = g.r(a), r2 = g.r(M);
    const double g1 = f[a] * std::pow(r1, n - 1.0);
    const double g2 = f[M] * std::pow(r2, n - 1.0);
    if (g1 == 0.0 && g2 == 0.0) return 0.0;

    // weights carry r^{N-1}, so |f w| is comparable across nodes
    const auto& w = g.weights();
    double peak = 0.0;
    for (std::size_t i = 0; i < M; ++i) peak = std::max(peak, std::abs(f[i]) * w[i]);
    if (std::abs(f[M]) * 2.0 * w[M] <= 1e-14 * peak) return 0.0;
    if (p <= 1.0)
        throw DivergentTail("integrand decays like r^-" + std::to_string(p) +
                            " after the volume factor; integral diverges");

    const double G1 = g1 * std::pow(r1, p), G2 = g2 * std::pow(r2, p);
    double A = G2, B = 0.0;
    if (G1 * G2 > 0.0 && std::abs(G1 - G2) < 0.5 * std::abs(G2)) {
        B = (G1 - G2) / (1.0 / (r1 * r1) - 1.0 / (r2 * r2));
        A = G2 - B / (r2 * r2);
    }
    const double area = g.dim().sphere_area();
    return area * (A * std::pow(r2, 1.0 - p) / (p - 1.0) + B * std::pow(r2, -1.0 - p) / (p + 1.0));
}

inline double integrate(const RadialGrid& g, const std::vector<double>& f, Tail t = Tail::none) {
    const auto& w = g.weights();
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * f[i];
    // N = 4: r^3 f is odd at the origin, so the trapezoid rule keeps an
    // Euler-Maclaurin end term; removing it leaves O(dr^6)
    if (g.dim().value() == 4) s -= g.dim().sphere_area() * std::pow(g.dr(), 4) * f[0] / 120.0;
    // end term at r_max: -dr^2/12 (f r^{N-1})'(r_M), one-sided second order
    const std::size_t M = g.last();
    const double n = g.dim().n(), dr = g.dr();
    auto gv = [&](std::size_t i) { return f[i] * std::pow(g.r(i), n - 1.0); };
    const double gp = (3.0 * gv(M) - 4.0 * gv(M - 1) + gv(M - 2)) / (2.0 * dr);
    s -= g.dim().sphere_area() * dr * dr / 12.0 * gp;
    return s + tail_integral(g, f, t);
}

inline double integrate(const RadialField& f, Tail t = Tail::none) {
    return integrate(*f.grid, f.values, t);
}

// Integral over the nodes with r <= R (no tail).
inline double integrate_ball(const RadialGrid& g, const std::vector<double>& f, double R) {
    const double n = g.dim().n();
    const double area = g.dim().sphere_area();
    double s = 0.0;
    const std::size_t M = g.last();
    for (std::size_t i = 0; i < M && g.r(i + 1) <= R + 1e-12; ++i) {
        const double a = f[i] * std::pow(g.r(i), n - 1.0);
        const double b = f[i + 1] * std::pow(g.r(i + 1), n - 1.0);
        s += 0.5 * (a + b) * g.dr();
    }
    return area * s;
}

//============================================================================
// d/dr with the five-point centered stencil; even reflection at r = 0 and
// one-sided five-point closures at r_max.
//============================================================================
inline std::vector<double> radial_derivative(const std::vector<double>& f, double dr) {
    const std::size_t n = f.size();
    std::vector<double> d(n, 0.0);
    const double c = 1.0 / (12.0 * dr);
    auto at = [&](long i) { return f[static_cast<std::size_t>(i < 0 ? -i : i)]; };
    for (std::size_t i = 1; i + 2 < n; ++i) {
        const long k = static_cast<long>(i);
        d[i] = (at(k - 2) - 8.0 * at(k - 1) + 8.0 * at(k + 1) - at(k + 2)) * c;
    }
    const std::size_t M = n - 1;
    d[M] = (25.0 * f[M] - 48.0 * f[M - 1] + 36.0 * f[M - 2] - 16.0 * f[M - 3] + 3.0 * f[M - 4]) * c;
    d[M - 1] = (3.0 * f[M] + 10.0 * f[M - 1] - 18.0 * f[M - 2] + 6.0 * f[M - 3] - f[M - 4]) * c;
    d[0] = 0.0;
    return d;
}

inline std::vector<double> radial_derivative(const RadialField& f) {
    return radial_derivative(f.values, f.grid->dr());
}

inline double l2_norm_sq(const RadialField& f, Tail t = Tail::none) {
    std::vector<double> sq(f.size());
    for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = f[i] * f[i];
    return integrate(*f.grid, sq, t);
}

inline double l2_inner(const RadialField& f, const RadialField& g, Tail t = Tail::none) {
    require_same_grid(f, g);
    std::vector<double> pr(f.size());
    for (std::size_t i = 0; i < pr.size(); ++i) pr[i] = f[i] * g[i];
    return integrate(*f.grid, pr, t);
}

inline double grad_inner(const RadialField& f, const RadialField& g, Tail t = Tail::gradient) {
    require_same_grid(f, g);
    const auto df = radial_derivative(f), dg = radial_derivative(g);
    std::vector<double> pr(f.size());
    for (std::size_t i = 0; i < pr.size(); ++i) pr[i] = df[i] * dg[i];
    return integrate(*f.grid, pr, t);
}

inline double grad_norm_sq(const RadialField& f, Tail t = Tail::gradient) {
    return grad_inner(f, f, t);
}

inline double sup_norm(const RadialField& f) {
    double s = 0.0;
    for (double x : f.values) s = std::max(s, std::abs(x));
    return s;
}

} // namespace critwave

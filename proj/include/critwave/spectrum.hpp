#pragma once

#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/bessel_prime.hpp>
#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint.hpp>

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "ground_state.hpp"
#include "radial_laplacian.hpp"

namespace critwave {

//============================================================================
// L = -Delta - V,  V = (N+2)/(N-2) W^{4/(N-2)}
//============================================================================
inline double eval_potential(Dimension d, double r) {
    return (d.power() + 1.0) * d.abs_power(eval_W(d, r));
}

struct LinearizedOperator {
    GridPtr grid;
    RadialLaplacian lap;
    std::vector<double> V;

    explicit LinearizedOperator(GridPtr g) : grid(g), lap(g), V(g->size()) {
        const Dimension d = g->dim();
        for (std::size_t i = 0; i < V.size(); ++i) V[i] = eval_potential(d, g->r(i));
    }

    Dimension dim() const { return grid->dim(); }

    std::vector<double> apply(const std::vector<double>& f) const {
        std::vector<double> out(f.size(), 0.0);
        for (std::size_t i = lap.first(); i < lap.end(); ++i) out[i] = lap.row(f, i) - V[i] * f[i];
        lap.fill_origin(out);
        return out;
    }
    RadialField apply(const RadialField& f) const {
        if (!f.grid->same_as(*grid)) throw MismatchedGrids();
        return RadialField(grid, apply(f.values));
    }

    // the weighted inner product in which the discretisation is symmetric
    double inner(const RadialField& f, const RadialField& g) const { return lap.inner(f.values, g.values); }
    double norm(const RadialField& f) const { return std::sqrt(inner(f, f)); }
};

inline LinearizedOperator build_operator(Dimension d, const GridPtr& g) {
    if (!(g->dim() == d)) throw MismatchedGrids();
    return LinearizedOperator(g);
}

//============================================================================
// Negative eigenpair
//============================================================================
struct SpectralPair {
    double e0 = 0.0;
    RadialField Y;
    double e0_matrix = 0.0;    // inverse iteration on the grid operator
    double e0_shooting = 0.0;  // ODE shooting in the continuum
    double residual = 0.0;     // |(L + e0^2) Y| / |Y|
};

namespace detail {

inline double eigen_by_inverse_iteration(const LinearizedOperator& op, std::vector<double>& x) {
    const auto& lap = op.lap;
    const std::size_t n = x.size();
    double vmax = 0.0;
    for (double v : op.V) vmax = std::max(vmax, v);

    auto normalise = [&](std::vector<double>& y) {
        const double s = std::sqrt(lap.inner(y, y));
        for (double& t : y) t /= s;
    };
    auto rayleigh = [&](const std::vector<double>& y) { return lap.inner(y, op.apply(y)) / lap.inner(y, y); };
    auto resid = [&](const std::vector<double>& y, double lam) {
        auto Ly = op.apply(y);
        for (std::size_t i = 0; i < n; ++i) Ly[i] -= lam * y[i];
        return std::sqrt(lap.inner(Ly, Ly) / lap.inner(y, y));
    };

    normalise(x);
    double sigma = -vmax;
    double lam = rayleigh(x);
    std::vector<double> shift(n);
    for (int it = 0; it < 400; ++it) {
        for (std::size_t i = 0; i < n; ++i) shift[i] = -op.V[i] - sigma;
        auto lu = lap.factor(shift);
        x = lap.solve(lu, x);
        normalise(x);
        const double prev = lam;
        lam = rayleigh(x);
        const double r = resid(x, lam);
        if (r < 1e-12 * std::max(1.0, std::abs(lam))) break;
        // switch to Rayleigh-quotient shifts once the iterate has settled
        if (std::abs(lam - prev) < 1e-3 * std::abs(lam)) sigma = lam - 1e-10 * std::abs(lam);
    }
    return lam;
}

// Shooting for -u'' - (N-1)/r u' - V u = -e^2 u.  Returns the Wronskian of the
// regular solution from r = 0 and the decaying one from r_far, at r_match.
inline double shooting_mismatch(Dimension d, double e, double r_match, double r_far) {
    namespace ode = boost::numeric::odeint;
    using state = std::array<double, 2>;
    const double n = d.n();
    auto rhs = [&](const state& y, state& dy, double r) {
        dy[0] = y[1];
        dy[1] = -(n - 1.0) / r * y[1] + (e * e - eval_potential(d, r)) * y[0];
    };
    auto stepper = ode::make_controlled(1e-13, 1e-13, ode::runge_kutta_dopri5<state>());

    const double r0 = 1e-3;
    const double c = (e * e - eval_potential(d, 0.0)) / (2.0 * n);
    state out{1.0 + c * r0 * r0, 2.0 * c * r0};
    ode::integrate_adaptive(stepper, rhs, out, r0, r_match, 1e-3);

    // r^{-(N-2)/2} K_nu(e r), nu = (N-2)/2, solves the free equation
    const double nu = (n - 2.0) / 2.0;
    const double x = e * r_far;
    const double K = boost::math::cyl_bessel_k(nu, x), Kp = boost::math::cyl_bessel_k_prime(nu, x);
    const double pw = std::pow(r_far, -nu);
    state in{pw * K, pw * (e * Kp - nu / r_far * K)};
    const double scale = std::abs(in[0]);
    in[0] /= scale;
    in[1] /= scale;
    ode::integrate_adaptive(stepper, rhs, in, r_far, r_match, -1e-3);

    const double a = std::hypot(out[0], out[1]), b = std::hypot(in[0], in[1]);
    return (out[1] * in[0] - out[0] * in[1]) / (a * b);
}

} // namespace detail

inline double e0_by_shooting(Dimension d) {
    const double r_match = 3.0, r_far = 30.0;
    double vmax = eval_potential(d, 0.0);
    const int steps = 60;
    const double lo = 0.05, hi = std::sqrt(vmax) * 0.999;
    double a = lo, fa = detail::shooting_mismatch(d, a, r_match, r_far);
    for (int k = 1; k <= steps; ++k) {
        const double b = lo + (hi - lo) * k / steps;
        const double fb = detail::shooting_mismatch(d, b, r_match, r_far);
        if (fa * fb <= 0.0) {
            std::uintmax_t iters = 200;
            auto tol = [](double x, double y) { return std::abs(x - y) <= 1e-14 * std::abs(x); };
            auto f = [&](double e) { return detail::shooting_mismatch(d, e, r_match, r_far); };
            const auto br = boost::math::tools::toms748_solve(f, a, b, fa, fb, tol, iters);
            return 0.5 * (br.first + br.second);
        }
        a = b;
        fa = fb;
    }
    throw NoNegativeEigenvalue("shooting found no bound state below the continuum");
}

// Method (a) alone: inverse iteration on the grid operator.
inline SpectralPair matrix_eigenpair(const LinearizedOperator& op) {
    const GridPtr& g = op.grid;
    const Dimension d = op.dim();
    const std::size_t M = g->last();
    std::vector<double> x(g->size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = eval_W(d, g->r(i)) * std::exp(-g->r(i));
    x[M] = 0.0;

    const double lam = detail::eigen_by_inverse_iteration(op, x);
    if (!(lam < 0.0)) throw NoNegativeEigenvalue("lowest discrete eigenvalue is " + std::to_string(lam));

    SpectralPair sp;
    sp.e0_matrix = std::sqrt(-lam);
    sp.e0 = sp.e0_matrix;

    double s = 0.0;
    for (std::size_t i = 0; i < M; ++i) s += x[i];
    if (s < 0.0)
        for (double& t : x) t = -t;
    for (std::size_t i = op.lap.first(); i < M; ++i)
        if (!(x[i] > 0.0))
            throw NoNegativeEigenvalue("eigenvector changes sign at r=" + std::to_string(g->r(i)) +
                                       "; grid too coarse or domain too small");

    // residual before the tail node is filled in (Dirichlet problem)
    {
        auto Lx = op.apply(x);
        for (std::size_t i = 0; i < x.size(); ++i) Lx[i] += sp.e0 * sp.e0 * x[i];
        sp.residual = std::sqrt(op.lap.inner(Lx, Lx) / op.lap.inner(x, x));
    }
    const double n = d.n();
    x[M] = x[M - 1] * std::exp(-sp.e0 * g->dr()) * std::pow(g->r(M - 1) / g->r(M), (n - 1.0) / 2.0);

    std::vector<double> sq(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) sq[i] = x[i] * x[i];
    const double nrm = std::sqrt(integrate(*g, sq));
    for (double& t : x) t /= nrm;
    sp.Y = RadialField(g, std::move(x));
    return sp;
}

// Both methods, cross-checked.
inline SpectralPair ground_eigen(const LinearizedOperator& op) {
    SpectralPair sp = matrix_eigenpair(op);
    sp.e0_shooting = e0_by_shooting(op.dim());
    if (std::abs(sp.e0_matrix - sp.e0_shooting) / sp.e0_matrix > 1e-4)
        throw MethodsDisagree("e0 from the grid operator " + std::to_string(sp.e0_matrix) + " vs shooting " +
                              std::to_string(sp.e0_shooting));
    return sp;
}

//============================================================================
// Q(f) = 1/2 |grad f|^2 - (N+2)/(2(N-2)) int W^{4/(N-2)} f^2
//============================================================================
struct QuadraticFormReport {
    double value = 0.0;
    double grad_sq = 0.0;
    double rayleigh = 0.0;  // value / grad_sq
};

inline QuadraticFormReport q_form(const RadialField& f) {
    const Dimension d = f.dim();
    const RadialGrid& g = *f.grid;
    std::vector<double> pot(f.size());
    for (std::size_t i = 0; i < pot.size(); ++i) pot[i] = eval_potential(d, g.r(i)) * f[i] * f[i];
    QuadraticFormReport q;
    q.grad_sq = grad_norm_sq(f);
    q.value = 0.5 * q.grad_sq - 0.5 * integrate(g, pot, Tail::critical);
    q.rayleigh = q.grad_sq > 0.0 ? q.value / q.grad_sq : 0.0;
    return q;
}

//============================================================================
// (sigma + L) f = rhs with f = 0 at r_max
//============================================================================
inline RadialField resolvent_solve(const LinearizedOperator& op, double sigma, const RadialField& rhs,
                                   const std::optional<SpectralPair>& guard = std::nullopt) {
    if (!rhs.grid->same_as(*op.grid)) throw MismatchedGrids();
    if (!(sigma > 0.0)) throw NearSingular("resolvent parameter must be positive");
    if (guard && std::abs(sigma - guard->e0 * guard->e0) < 1e-3)
        throw NearSingular("sigma is within 1e-3 of e0^2");
    const double rhs_norm = op.norm(rhs);
    if (rhs_norm == 0.0) return RadialField(op.grid);

    std::vector<double> shift(op.V.size());
    for (std::size_t i = 0; i < shift.size(); ++i) shift[i] = sigma - op.V[i];
    const auto lu = op.lap.factor(shift);
    if (lu.rcond() < 1e-14) throw NearSingular("resolvent matrix is numerically singular");
    auto f = op.lap.solve(lu, rhs.values);

    auto chk = op.apply(f);
    for (std::size_t i = 0; i < chk.size(); ++i) chk[i] += sigma * f[i] - rhs[i];
    const double res = std::sqrt(op.lap.inner(chk, chk));
    if (!(res <= 1e-8 * rhs_norm))
        throw ResolventFailure("resolvent residual " + std::to_string(res / rhs_norm) + " exceeds 1e-8");
    return RadialField(op.grid, std::move(f));
}

//============================================================================
// Coercivity of Q on {f : <f,Y> = 0, <grad f, grad W> = 0, <grad f, grad W~> = 0}
//
// The H^1-dot pairings are written as L^2 pairings against -Delta W = W^{p+1}
// and -Delta W~ = V W~.  With A = -Delta_h, max <Vf,f>/<Af,f> on the
// constrained space is found by power iteration on A^{-1} V followed by the
// A-orthogonal projection; then c_Q = (1 - mu_max)/2.
//============================================================================
struct CoercivityReport {
    double c_Q = 0.0;
    double mu_max = 0.0;
    int iterations = 0;
};

class CoercivityConstraints {
public:
    CoercivityConstraints(const LinearizedOperator& op, const SpectralPair& sp)
        : op_(op), lu_(op.lap.factor(std::vector<double>(op.V.size(), 0.0))) {
        const Dimension d = op.dim();
        const GridPtr& g = op.grid;
        const Generators gen = generators(d, g);
        std::vector<double> g1 = sp.Y.values, g2(g->size()), g3(g->size());
        for (std::size_t i = 0; i < g->size(); ++i) {
            g2[i] = eval_minus_laplacian_W(d, g->r(i));
            g3[i] = op.V[i] * gen.W_tilde[i];
        }
        g_ = {g1, g2, g3};
        for (int j = 0; j < 3; ++j) z_[j] = op.lap.solve(lu_, g_[j]);
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) gram_[j][k] = op.lap.inner(z_[j], g_[k]);
        invert_gram();
    }

    // constraint functionals <f, g_j>
    std::array<double, 3> values(const std::vector<double>& f) const {
        return {op_.lap.inner(f, g_[0]), op_.lap.inner(f, g_[1]), op_.lap.inner(f, g_[2])};
    }

    void project(std::vector<double>& f) const {
        const auto l = values(f);
        for (int j = 0; j < 3; ++j) {
            double c = 0.0;
            for (int k = 0; k < 3; ++k) c += inv_[j][k] * l[k];
            for (std::size_t i = 0; i < f.size(); ++i) f[i] -= c * z_[j][i];
        }
    }

    const TridiagonalLU& laplacian_lu() const { return lu_; }

private:
    void invert_gram() {
        const auto& a = gram_;
        const double det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
                           a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
                           a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
        if (std::abs(det) < 1e-300) throw NonPositiveEstimate("constraint Gram matrix is singular");
        inv_[0][0] = (a[1][1] * a[2][2] - a[1][2] * a[2][1]) / det;
        inv_[0][1] = (a[0][2] * a[2][1] - a[0][1] * a[2][2]) / det;
        inv_[0][2] = (a[0][1] * a[1][2] - a[0][2] * a[1][1]) / det;
        inv_[1][0] = (a[1][2] * a[2][0] - a[1][0] * a[2][2]) / det;
        inv_[1][1] = (a[0][0] * a[2][2] - a[0][2] * a[2][0]) / det;
        inv_[1][2] = (a[0][2] * a[1][0] - a[0][0] * a[1][2]) / det;
        inv_[2][0] = (a[1][0] * a[2][1] - a[1][1] * a[2][0]) / det;
        inv_[2][1] = (a[0][1] * a[2][0] - a[0][0] * a[2][1]) / det;
        inv_[2][2] = (a[0][0] * a[1][1] - a[0][1] * a[1][0]) / det;
    }

    const LinearizedOperator& op_;
    TridiagonalLU lu_;
    std::array<std::vector<double>, 3> g_, z_;
    std::array<std::array<double, 3>, 3> gram_{}, inv_{};
};

inline CoercivityReport coercivity_estimate(const LinearizedOperator& op, const SpectralPair& sp) {
    const CoercivityConstraints cons(op, sp);
    const auto& lap = op.lap;
    const GridPtr& g = op.grid;
    const std::size_t M = g->last();

    std::vector<double> f(g->size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double r = g->r(i);
        f[i] = (1.0 + 0.3 * r) * std::exp(-0.5 * r);
    }
    f[M] = 0.0;
    cons.project(f);

    auto anorm = [&](const std::vector<double>& y) { return std::sqrt(lap.inner(y, lap.apply(y))); };
    auto mu_of = [&](const std::vector<double>& y) {
        std::vector<double> vy(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) vy[i] = op.V[i] * y[i];
        return lap.inner(y, vy) / lap.inner(y, lap.apply(y));
    };

    CoercivityReport rep;
    double mu = mu_of(f);
    std::vector<double> vf(f.size());
    for (int it = 1; it <= 20000; ++it) {
        for (std::size_t i = 0; i < f.size(); ++i) vf[i] = op.V[i] * f[i];
        f = lap.solve(cons.laplacian_lu(), vf);
        cons.project(f);
        const double s = anorm(f);
        for (double& t : f) t /= s;
        const double next = mu_of(f);
        rep.iterations = it;
        if (std::abs(next - mu) < 1e-13 * std::abs(next)) {
            mu = next;
            break;
        }
        mu = next;
    }
    rep.mu_max = mu;
    rep.c_Q = 0.5 * (1.0 - mu);
    if (!(rep.c_Q > 0.0))
        throw NonPositiveEstimate("constrained Rayleigh minimum " + std::to_string(rep.c_Q) + " is not positive");
    return rep;
}

} // namespace critwave

#include <gtest/gtest.h>

#include <boost/math/quadrature/exp_sinh.hpp>

#include <critwave/ground_state.hpp>

#include <cmath>
#include <numbers>

#include "oracles.hpp"

using namespace critwave;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

// adaptive quadrature of |grad W|^2 straight from the formula, no grid
double grad_sq_exp_sinh(int n) {
    const Dimension d(n);
    boost::math::quadrature::exp_sinh<double> q;
    const double I = q.integrate([&](double r) {
        if (r > 1e30) return 0.0;
        const double w = eval_W_prime(d, r);
        return w * w * std::pow(r, n - 1.0);
    });
    return d.sphere_area() * I;
}

} // namespace

//============================================================================
// Dimension
//============================================================================
TEST(Dimension, OnlyThreeFourFive) {
    EXPECT_THROW(Dimension(2), OutOfRange);
    EXPECT_THROW(Dimension(6), OutOfRange);
    for (int n : {3, 4, 5}) EXPECT_NO_THROW(Dimension{n});
}

TEST(Dimension, ExponentsFollowN) {
    EXPECT_DOUBLE_EQ(Dimension(3).critical_exponent(), 6.0);
    EXPECT_DOUBLE_EQ(Dimension(4).critical_exponent(), 4.0);
    EXPECT_DOUBLE_EQ(Dimension(5).critical_exponent(), 10.0 / 3.0);
    EXPECT_DOUBLE_EQ(Dimension(3).power(), 4.0);
    EXPECT_DOUBLE_EQ(Dimension(5).power(), 4.0 / 3.0);
    EXPECT_NEAR(Dimension(5).nonlinearity(-2.0), -std::pow(2.0, 7.0 / 3.0), 1e-14);
}

//============================================================================
// eval_W
//============================================================================
TEST(EvalW, OriginIsOne) { EXPECT_DOUBLE_EQ(eval_W(Dimension(3), 0.0), 1.0); }

TEST(EvalW, SymmetryPoint) {
    EXPECT_NEAR(eval_W(Dimension(3), std::sqrt(3.0)), 1.0 / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(eval_W(Dimension(5), std::sqrt(15.0)), std::pow(2.0, -1.5), 1e-15);
}

TEST(EvalW, PositiveDecreasing) {
    for (int n : {3, 4, 5}) {
        double prev = 2.0;
        for (double r = 0.0; r < 500.0; r += 0.37) {
            const double w = eval_W(Dimension(n), r);
            EXPECT_GT(w, 0.0);
            EXPECT_LT(w, prev);
            prev = w;
        }
    }
}

TEST(EvalW, SolvesTheStationaryEquation) {
    // W'' + (N-1)/r W' + W^{p+1} = 0
    for (int n : {3, 4, 5}) {
        const Dimension d(n);
        for (double r : {0.3, 1.0, 4.0, 17.0}) {
            const double lhs = eval_W_second(d, r) + (n - 1.0) / r * eval_W_prime(d, r) + d.nonlinearity(eval_W(d, r));
            EXPECT_NEAR(lhs, 0.0, 1e-14);
        }
    }
}

//============================================================================
// grad_norm_sq_W
//============================================================================
TEST(GradNormSqW, ClosedFormN3) {
    const double closed = 3.0 * std::sqrt(3.0) * std::numbers::pi * std::numbers::pi / 4.0;
    EXPECT_NEAR(closed, oracle::grad_sq_W[3], 1e-12 * closed);
    auto g = make_grid(3, 0.02, 200);
    EXPECT_LT(rel(grad_norm_sq_W(Dimension(3), *g).grad_sq, closed), 1e-6);
}

TEST(GradNormSqW, ClosedFormN4) {
    const double closed = 32.0 * std::numbers::pi * std::numbers::pi / 3.0;
    EXPECT_NEAR(closed, oracle::grad_sq_W[4], 1e-12 * closed);
    auto g = make_grid(4, 0.02, 200);
    EXPECT_LT(rel(grad_norm_sq_W(Dimension(4), *g).grad_sq, closed), 1e-6);
}

TEST(GradNormSqW, BetaReductionMatchesAdaptiveQuadrature) {
    for (int n : {3, 4, 5}) {
        EXPECT_LT(rel(grad_norm_sq_W_exact(Dimension(n)), oracle::grad_sq_W[n]), 1e-13) << "N=" << n;
        EXPECT_LT(rel(grad_sq_exp_sinh(n), oracle::grad_sq_W[n]), 1e-10) << "N=" << n;
    }
}

TEST(GradNormSqW, EqualsCriticalNormAllN) {
    for (int n : {3, 4, 5}) {
        auto g = make_grid(n, 0.02, n == 5 ? 400 : 200);
        const auto vc = grad_norm_sq_W(Dimension(n), *g);
        EXPECT_LT(rel(vc.critical_norm, vc.grad_sq), 1e-6) << "N=" << n;
        EXPECT_LT(rel(vc.grad_sq, oracle::grad_sq_W[n]), 1e-6) << "N=" << n;
    }
}

TEST(GradNormSqW, ErrorShrinksAtLeastFourfoldOnRefinement) {
    // successive differences isolate the dr-dependence from the tail fit
    for (int n : {3, 4, 5}) {
        double q[3];
        int k = 0;
        for (double dr : {0.16, 0.08, 0.04}) q[k++] = detail::W_quadrature(*make_grid(n, dr, 400)).grad_sq;
        const double d1 = std::abs(q[0] - q[1]), d2 = std::abs(q[1] - q[2]);
        if (d1 > 1e-13 * q[2]) {
            EXPECT_LE(4.0 * d2, d1) << "N=" << n;
        }
    }
}

TEST(GradNormSqW, CoarseGridIsRejected) {
    auto g = make_grid(3, 0.5, 200);
    EXPECT_THROW(grad_norm_sq_W(Dimension(3), *g), GridTooCoarse);
}

//============================================================================
// energy
//============================================================================
TEST(Energy, GroundStateIsThreshold) {
    for (int n : {3, 4, 5}) {
        auto g = make_grid(n, 0.02, n == 5 ? 400 : 200);
        const auto e = energy(ground_state(g), RadialField(g));
        EXPECT_LT(rel(e.total, oracle::grad_sq_W[n] / n), 1e-6) << "N=" << n;
        EXPECT_DOUBLE_EQ(e.total, e.kinetic + e.gradient - e.potential);
    }
}

TEST(Energy, ZeroIsZero) {
    auto g = make_grid(3, 0.02, 200);
    EXPECT_EQ(energy(RadialField(g), RadialField(g)).total, 0.0);
}

TEST(Energy, ScaledAmplitudeN3) {
    auto g = make_grid(3, 0.02, 200);
    const auto e = energy(0.9 * ground_state(g), RadialField(g));
    EXPECT_LT(rel(e.total, oracle::energy_09W_N3), 1e-6);
}

TEST(Energy, MismatchedGridsThrow) {
    auto g1 = make_grid(3, 0.02, 200);
    auto g2 = make_grid(3, 0.04, 200);
    EXPECT_THROW(energy(ground_state(g1), RadialField(g2)), MismatchedGrids);
}

//============================================================================
// apply_symmetry
//============================================================================
TEST(ApplySymmetry, IdentityKeepsPair) {
    auto g = make_grid(3, 0.02, 200);
    const auto W = ground_state(g);
    const auto [u, v] = apply_symmetry(W, RadialField(g), SymmetryAction::identity());
    EXPECT_EQ(u.values, W.values);
    EXPECT_EQ(v.values, RadialField(g).values);
}

TEST(ApplySymmetry, CompositionLaw) {
    const SymmetryAction a{2.0, -1}, b{0.25, -1};
    const auto c = a.compose(b);
    EXPECT_DOUBLE_EQ(c.lambda0, 0.5);
    EXPECT_EQ(c.sign, 1);
}

TEST(ApplySymmetry, ScaledWFormula) {
    auto g = make_grid(3, 0.02, 200);
    const auto [u, v] = apply_symmetry(ground_state(g), RadialField(g), {2.0, 1});
    double worst = 0.0;
    for (std::size_t i = 0; i < g->size(); ++i)
        worst = std::max(worst, std::abs(u[i] - std::pow(2.0, -0.5) * eval_W(Dimension(3), g->r(i) / 2.0)));
    EXPECT_LT(worst, 1e-7);
}

TEST(ApplySymmetry, EnergyAndDistanceInvariant) {
    for (int n : {3, 5}) {
        auto g = make_grid(n, 0.02, n == 5 ? 400 : 200);
        const Dimension d(n);
        // a smooth non-stationary pair near W
        const auto u = RadialField::sample(g, [d](double r) { return eval_W(d, r) * (1.0 - 0.05 * std::exp(-r * r / 4.0)); });
        const auto v = RadialField::sample(g, [](double r) { return 0.1 * std::exp(-r * r / 2.0); });
        const double E0 = energy(u, v).total;
        const double d0 = d_functional(u, v);
        for (double lam : {2.0, 0.8}) {
            const auto [us, vs] = apply_symmetry(u, v, {lam, 1});
            EXPECT_LT(rel(energy(us, vs).total, E0), 1e-6) << "N=" << n << " lambda=" << lam;
            EXPECT_LT(rel(d_functional(us, vs), d0), 1e-6) << "N=" << n << " lambda=" << lam;
        }
    }
}

TEST(ApplySymmetry, RejectsBadAction) {
    auto g = make_grid(3, 0.02, 200);
    EXPECT_THROW(apply_symmetry(ground_state(g), RadialField(g), {0.0, 1}), OutOfRange);
    EXPECT_THROW(apply_symmetry(ground_state(g), RadialField(g), {1.0, 2}), OutOfRange);
}

TEST(ApplySymmetry, TinyScaleExitsDomain) {
    auto g = make_grid(3, 0.02, 200);
    // decays too slowly to have reached its r^{-1} law by r_max
    const auto bump = RadialField::sample(g, [](double r) { return 1.0 / std::sqrt(1.0 + r); });
    EXPECT_THROW(apply_symmetry(bump, RadialField(g), {0.2, 1}), SymmetryRangeError);
}

//============================================================================
// generators
//============================================================================
TEST(Generators, UnitNormAndOrthogonal) {
    for (int n : {3, 4, 5}) {
        auto g = make_grid(n, 0.02, n == 5 ? 400 : 200);
        const auto gen = generators(Dimension(n), g);
        EXPECT_NEAR(std::sqrt(grad_norm_sq(gen.W_tilde)), 1.0, 1e-6) << "N=" << n;
        EXPECT_LT(std::abs(grad_inner(ground_state(g), gen.W_tilde)), 1e-6 * oracle::grad_sq_W[n]) << "N=" << n;
        EXPECT_FALSE(gen.note.empty());
    }
}

TEST(Generators, OriginValue) {
    auto g = make_grid(3, 0.02, 200);
    const auto gen = generators(Dimension(3), g);
    EXPECT_NEAR(gen.W_tilde[0], -gen.c_tilde / 2.0, 1e-15);
}

//============================================================================
// d_functional
//============================================================================
TEST(DFunctional, GroundAndZero) {
    for (int n : {3, 4, 5}) {
        auto g = make_grid(n, 0.02, n == 5 ? 400 : 200);
        EXPECT_EQ(d_functional(ground_state(g), RadialField(g)), 0.0);
        EXPECT_LT(rel(d_functional(RadialField(g), RadialField(g)), oracle::grad_sq_W[n]), 1e-6) << "N=" << n;
    }
}

//============================================================================
// grid and quadrature plumbing
//============================================================================
TEST(RadialGrid, RejectsShortDomainAndBadSpacing) {
    EXPECT_THROW(make_grid(3, 0.02, 50.0), OutOfRange);
    EXPECT_THROW(make_grid(3, 0.0, 200.0), OutOfRange);
    EXPECT_NO_THROW(make_grid(3, 0.02, 50.0 * std::sqrt(3.0)));
}

TEST(RadialGrid, WeightsPositive) {
    auto g = make_grid(4, 0.05, 200);
    for (std::size_t i = 1; i < g->size(); ++i) EXPECT_GT(g->weights()[i], 0.0);
}

TEST(RadialField, RejectsNonFinite) {
    auto g = make_grid(3, 0.05, 100);
    std::vector<double> v(g->size(), 0.0);
    v[3] = std::nan("");
    EXPECT_THROW(RadialField(g, v), Error);
}

TEST(Quadrature, GaussianMomentsAllN) {
    // int e^{-r^2} over R^N = pi^{N/2}
    for (int n : {3, 4, 5}) {
        auto g = make_grid(n, 0.02, 200);
        const auto f = RadialField::sample(g, [](double r) { return std::exp(-r * r); });
        EXPECT_LT(rel(integrate(f), std::pow(std::numbers::pi, n / 2.0)), 1e-10) << "N=" << n;
    }
}

TEST(Quadrature, DivergentTailForWSquaredBelowFive) {
    auto g = make_grid(3, 0.02, 200);
    const auto W = ground_state(g);
    EXPECT_THROW(l2_norm_sq(W, Tail::square), DivergentTail);
}

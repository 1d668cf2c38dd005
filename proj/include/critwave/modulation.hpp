#pragma once

#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "series.hpp"
#include "snapshot.hpp"

namespace critwave {

//============================================================================
// u_mu(y) = mu^{-(N-2)/2} u(y/mu) = (1 + alpha) W + f~ with f~ orthogonal to
// W and W~ in H^1-dot.  Both pairings are L^2 pairings against -Delta W and
// -Delta W~, evaluated analytically at mu r after substituting y = mu x:
//   <u_mu, g> = mu^{(N+2)/2} int u(x) g(mu x) dx.
//============================================================================
struct ModulationFit {
    double alpha = 0.0;
    double mu = 1.0;
    int sign = 1;                 // u was replaced by -u when sign = -1
    std::optional<RadialField> f_tilde;
    // <grad f~, grad W> / |grad W|^2 and <grad f~, grad W~>; taken on f~ when
    // it is built, otherwise from the pairings at the root
    double ortho_W = 0.0;
    double ortho_W_tilde = 0.0;
};

struct ModulationOptions {
    double delta0 = 0.1;          // admissible d, relative to |grad W|^2
    bool with_remainder = true;   // resample u_mu to build f~
    std::optional<double> mu_guess;  // warm start along a run
};

namespace detail {

inline double scaled_pairing(const RadialField& u, double mu, double (*g)(Dimension, double), int sign) {
    const Dimension d = u.dim();
    const RadialGrid& gr = *u.grid;
    std::vector<double> pr(u.size());
    for (std::size_t i = 0; i < pr.size(); ++i) pr[i] = sign * u[i] * g(d, mu * gr.r(i));
    return std::pow(mu, (d.n() + 2.0) / 2.0) * integrate(gr, pr, Tail::critical);
}

// -Delta W~ up to the factor -c~: V ((N-2)/2 W + r W')
inline double minus_laplacian_W_tilde_unscaled(Dimension d, double r) {
    return eval_potential(d, r) * eval_W_tilde_unscaled(d, r);
}

} // namespace detail

inline ModulationFit fit(const RadialField& u, const RadialField& v, ModulationOptions opt = {}) {
    require_same_grid(u, v);
    const Dimension d = u.dim();
    const double G = grad_norm_sq_W_exact(d);
    const double dist = d_functional(u, v);
    if (!(dist <= opt.delta0 * G))
        throw NoRoot("d = " + std::to_string(dist) + " is outside the modulation neighbourhood");

    ModulationFit out;
    out.sign = detail::scaled_pairing(u, 1.0, eval_minus_laplacian_W, 1) >= 0.0 ? 1 : -1;

    auto F = [&](double mu) { return detail::scaled_pairing(u, mu, detail::minus_laplacian_W_tilde_unscaled, out.sign); };
    const double overlap = out.sign * detail::scaled_pairing(u, 1.0, eval_minus_laplacian_W, 1);
    const double mu0 = opt.mu_guess && *opt.mu_guess > 0.0 ? *opt.mu_guess : G / overlap;

    // walk outward from mu0 in log steps until F changes sign
    double a = mu0, b = mu0, fa = F(mu0), fb = fa;
    bool found = fa == 0.0;
    double up = mu0, f_up = fa, dn = mu0, f_dn = fa;
    for (int k = 1; k <= 120 && !found; ++k) {
        const double m_up = up * 1.04, fm_up = F(m_up);
        if (fm_up * f_up <= 0.0) {
            a = up, fa = f_up, b = m_up, fb = fm_up;
            found = true;
            break;
        }
        up = m_up, f_up = fm_up;
        const double m_dn = dn / 1.04, fm_dn = F(m_dn);
        if (fm_dn * f_dn <= 0.0) {
            a = m_dn, fa = fm_dn, b = dn, fb = f_dn;
            found = true;
            break;
        }
        dn = m_dn, f_dn = fm_dn;
    }
    if (!found) throw NoRoot("no scale orthogonalises u against W~ near mu0 = " + std::to_string(mu0));

    double mu = fa == 0.0 ? a : b;
    if (fa != 0.0 && fb != 0.0) {
        std::uintmax_t iters = 200;
        auto tol = [](double x, double y) { return std::abs(x - y) <= 4e-16 * std::abs(x); };
        const auto br = boost::math::tools::toms748_solve(F, a, b, fa, fb, tol, iters);
        mu = 0.5 * (br.first + br.second);
    }
    out.mu = mu;
    const double proj = detail::scaled_pairing(u, mu, eval_minus_laplacian_W, out.sign);
    out.alpha = proj / G - 1.0;

    const Generators gen = generators(d, u.grid);
    out.ortho_W = (proj - (1.0 + out.alpha) * G) / G;
    out.ortho_W_tilde = -gen.c_tilde * F(mu);

    if (opt.with_remainder) {
        // recheck both conditions on the resampled remainder
        auto [um, vm] = apply_symmetry(u, v, {mu, out.sign});
        const RadialField W = ground_state(u.grid);
        out.f_tilde = um - (1.0 + out.alpha) * W;
        out.ortho_W = grad_inner(*out.f_tilde, W) / G;
        out.ortho_W_tilde = grad_inner(*out.f_tilde, gen.W_tilde);
    }
    return out;
}

//============================================================================
// |alpha| against d along a run
//============================================================================
struct EquivalenceReport {
    double max_d_over_alpha = 0.0;
    double max_alpha_over_d = 0.0;
    int samples_used = 0;
    bool pass = true;
};

// d carries the units of |grad W|^2 while alpha is a pure number, so d is
// divided by d_unit (normally |grad W|^2, as for delta0) before comparing
inline EquivalenceReport equivalence_check(const std::vector<double>& d, const std::vector<double>& alpha,
                                           double d_unit, double C_eq = 10.0, double cutoff = 1e-10) {
    if (!(d_unit > 0.0)) throw OutOfRange("d_unit must be positive", 0);
    EquivalenceReport rep;
    for (std::size_t i = 0; i < d.size() && i < alpha.size(); ++i) {
        const double dn = d[i] / d_unit;
        if (!(dn > cutoff) || !(std::abs(alpha[i]) > cutoff)) continue;
        rep.max_d_over_alpha = std::max(rep.max_d_over_alpha, dn / std::abs(alpha[i]));
        rep.max_alpha_over_d = std::max(rep.max_alpha_over_d, std::abs(alpha[i]) / dn);
        ++rep.samples_used;
    }
    rep.pass = rep.max_d_over_alpha <= C_eq && rep.max_alpha_over_d <= C_eq;
    return rep;
}

//============================================================================
// beta'' = e0^2 beta + eta,  beta = <h, Y>,  eta = <R(h), Y>
//============================================================================
struct BetaReport {
    std::vector<double> t, beta, eta, beta_pp, ode_residual;
    double max_relative_residual = 0.0;
    double fitted_rate = std::numeric_limits<double>::quiet_NaN();
};

inline BetaReport beta_ode_check(const SnapshotSet& snaps, const SpectralPair& sp) {
    BetaReport rep;
    if (snaps.size() < 3) return rep;
    const GridPtr& g = snaps.grid;
    const Dimension d = g->dim();
    const RadialLaplacian lap(g);
    std::vector<double> Wv(g->size());
    for (std::size_t i = 0; i < Wv.size(); ++i) Wv[i] = eval_W(d, g->r(i));

    std::vector<double> beta(snaps.size()), eta(snaps.size());
    std::vector<double> h(g->size()), R(g->size());
    for (std::size_t k = 0; k < snaps.size(); ++k) {
        const auto& u = snaps.frames[k].u;
        for (std::size_t i = 0; i < h.size(); ++i) {
            h[i] = u[i] - Wv[i];
            R[i] = remainder_R(d, Wv[i], h[i]);
        }
        beta[k] = lap.inner(h, sp.Y.values);
        eta[k] = lap.inner(R, sp.Y.values);
    }
    const double dt = snaps.dt();
    double scale = 0.0, worst = 0.0;
    for (std::size_t k = 1; k + 1 < snaps.size(); ++k) {
        const double bpp = (beta[k + 1] - 2.0 * beta[k] + beta[k - 1]) / (dt * dt);
        const double res = bpp - sp.e0 * sp.e0 * beta[k] - eta[k];
        rep.t.push_back(snaps.t(k));
        rep.beta.push_back(beta[k]);
        rep.eta.push_back(eta[k]);
        rep.beta_pp.push_back(bpp);
        rep.ode_residual.push_back(res);
        scale = std::max(scale, std::abs(bpp));
        worst = std::max(worst, std::abs(res));
    }
    rep.max_relative_residual = scale > 0.0 ? worst / scale : 0.0;
    std::vector<double> ab(rep.beta.size());
    for (std::size_t k = 0; k < ab.size(); ++k) ab[k] = std::abs(rep.beta[k]);
    rep.fitted_rate = fit_decay_rate(rep.t, ab);
    return rep;
}

} // namespace critwave

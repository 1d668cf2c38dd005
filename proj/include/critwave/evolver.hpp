#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "diagnostics.hpp"
#include "modulation.hpp"

namespace critwave {

enum class Direction { forward, backward };

// Background the state is stored against: u = base + h.  Near W the force
// uses -Delta W = W^{p+1} exactly, so (W, 0) is a discrete steady state.
enum class Background { automatic, ground, zero };

struct SolverConfig {
    double cfl = 0.5;
    double blowup_factor = 20.0;      // sup|u| > factor * W(0)
    int blowup_monotone_steps = 50;
    double tol_d = 1e-3;
    long max_steps = 0;               // 0: no limit
    double sample_dt = 0.1;
    double snapshot_dt = 0.0;         // 0: keep no snapshots
    double local_radius = 5.0;
    double dispersal_fraction = 0.05; // of E(W,0)
    double g_radius = 5.0;            // g_R, and y_R when N <= 4
    double delta0 = 0.1;
    bool modulation = true;
    bool stop_on_outcome = false;
    double min_span = 0.0;            // time before stop_on_outcome may fire
    double data_support = 20.0;
    Background background = Background::automatic;
};

struct EvolutionState {
    double t = 0.0;          // physical time
    long steps = 0;
    bool ground = true;      // base is W (else 0)
    RadialField h;           // u - base
    RadialField v;           // d_t u, physical orientation

    RadialField u() const {
        if (!ground) return h;
        std::vector<double> out(h.values);
        const Dimension d = h.dim();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += eval_W(d, h.grid->r(i));
        return RadialField(h.grid, std::move(out));
    }
};

struct Sample {
    double t = 0.0;
    double E = 0.0;
    double d = 0.0;
    double dtu_l2 = 0.0;
    double sup_u = 0.0;
    double local_energy = 0.0;
    double y = 0.0;
    double yprime = 0.0;
    double g_R = 0.0;
    double alpha = std::numeric_limits<double>::quiet_NaN();
    double mu = std::numeric_limits<double>::quiet_NaN();
    double grad_sq = 0.0;    // |grad u|^2
    double kinetic = 0.0;    // |v|^2
};

struct BlowUpEvent {
    double t_blow = 0.0;     // refined first crossing, physical time
    double sup_at_detection = 0.0;
    bool non_finite = false;
};

struct TimeSeries {
    std::vector<Sample> rows;
    std::optional<BlowUpEvent> blowup;
    Direction direction = Direction::forward;
    double t_start = 0.0;
    std::string stop_reason = "completed";
};

struct EvolveResult {
    TimeSeries series;
    EvolutionState final_state;
    SnapshotSet snapshots;
    double dt = 0.0;
};

// Phi(W+h) - Phi(W) - W^{p+1} h with Phi(u) = |u|^{2*}/2*, kept accurate for small h/W
inline double potential_remainder(Dimension d, double W, double h) {
    const double q = d.critical_exponent();
    const double s = h / W;
    if (s > -0.5) return d.abs_critical(W) / q * (std::expm1(q * std::log1p(s)) - q * s);
    return (d.abs_critical(W + h) - d.abs_critical(W)) / q - d.nonlinearity(W) * h;
}

//============================================================================
// Stormer-Verlet (kick-drift-kick) for u_tt = Delta u + |u|^p u on rows of
// the radial Laplacian.  Integration runs in run time s (s = t forward,
// s = -t backward); the equation is reversible so backward runs simply flip v.
// Outer node: upwind transport of r^{(N-1)/2} h (first-order outgoing wave).
//============================================================================
class Evolver {
public:
    Evolver(GridPtr g, SolverConfig cfg) : grid_(std::move(g)), cfg_(cfg), lap_(grid_) {
        if (!(cfg_.cfl > 0.0 && cfg_.cfl <= 0.5)) throw OutOfRange("cfl must lie in (0, 0.5]", 0);
        const Dimension d = grid_->dim();
        W_.resize(grid_->size());
        V_.resize(grid_->size());
        rk_.resize(grid_->size());
        for (std::size_t i = 0; i < W_.size(); ++i) {
            const double r = grid_->r(i);
            W_[i] = eval_W(d, r);
            V_[i] = eval_potential(d, r);
            rk_[i] = std::pow(r, (d.n() - 1.0) / 2.0);
        }
    }

    const GridPtr& grid() const { return grid_; }
    const SolverConfig& config() const { return cfg_; }

    double dt_for(double T) const {
        const double target = cfg_.cfl * grid_->dr();
        if (!(T > 0.0)) return target;
        return T / std::ceil(T / target - 1e-9);
    }

    bool choose_ground(const RadialField& u) const {
        if (cfg_.background == Background::ground) return true;
        if (cfg_.background == Background::zero) return false;
        double dev = 0.0, amp = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) {
            dev = std::max(dev, std::abs(u[i] - W_[i]));
            amp = std::max(amp, std::abs(u[i]));
        }
        return dev < amp;
    }

    EvolutionState make_state(const RadialField& u, const RadialField& v, double t) const {
        require_same_grid(u, v);
        if (!u.grid->same_as(*grid_)) throw MismatchedGrids();
        EvolutionState s;
        s.t = t;
        s.ground = choose_ground(u);
        std::vector<double> h(u.values);
        if (s.ground)
            for (std::size_t i = 0; i < h.size(); ++i) h[i] -= W_[i];
        lap_.fill_origin(h);
        std::vector<double> vv(v.values);
        lap_.fill_origin(vv);
        s.h = RadialField(grid_, std::move(h));
        s.v = RadialField(grid_, std::move(vv));
        return s;
    }

    // -Delta_h h + (nonlinearity relative to the base) on the rows
    void force(const EvolutionState& s, std::vector<double>& F) const {
        const Dimension d = grid_->dim();
        const auto& h = s.h.values;
        F.assign(h.size(), 0.0);
        for (std::size_t i = lap_.first(); i < lap_.end(); ++i) {
            const double nl = s.ground ? V_[i] * h[i] + remainder_R(d, W_[i], h[i]) : d.nonlinearity(h[i]);
            F[i] = -lap_.row(h, i) + nl;
        }
        lap_.fill_origin(F);
    }

    // one step of size dt in run time; sgn = +1 forward, -1 backward
    void step(EvolutionState& s, double dt, int sgn) const {
        const std::size_t M = grid_->last();
        auto& h = s.h.values;
        auto& v = s.v.values;
        std::vector<double> F;
        force(s, F);
        const double hM = h[M], hM1 = h[M - 1];
        for (std::size_t i = 0; i < M; ++i) {
            const double vr = sgn * v[i] + 0.5 * dt * F[i];
            v[i] = vr;  // run-time velocity for now
            h[i] += dt * vr;
        }
        const double c = dt / grid_->dr();
        const double wM = rk_[M] * hM, wM1 = rk_[M - 1] * hM1;
        h[M] = (wM - c * (wM - wM1)) / rk_[M];
        lap_.fill_origin(h);
        force(s, F);
        for (std::size_t i = 0; i < M; ++i) v[i] = sgn * (v[i] + 0.5 * dt * F[i]);
        v[M] = sgn * (h[M] - hM) / dt;
        lap_.fill_origin(v);
        s.t += sgn * dt;
        ++s.steps;
    }

    double sup_u(const EvolutionState& s) const {
        double m = 0.0;
        const auto& h = s.h.values;
        for (std::size_t i = 0; i < h.size(); ++i) {
            const double u = s.ground ? W_[i] + h[i] : h[i];
            if (!std::isfinite(u)) return std::numeric_limits<double>::infinity();
            m = std::max(m, std::abs(u));
        }
        return m;
    }

    // energy conserved by the semi-discrete scheme, up to a constant:
    // 1/2 <v,v> + 1/2 <h, -Delta_h h> - sum m (Phi(base+h) - Phi(base) - Phi'(base) h)
    double discrete_energy(const EvolutionState& s) const {
        const Dimension d = grid_->dim();
        const auto& h = s.h.values;
        const auto Ah = lap_.apply(h);
        std::vector<double> pot(h.size(), 0.0);
        for (std::size_t i = lap_.first(); i < lap_.end(); ++i)
            pot[i] = s.ground ? potential_remainder(d, W_[i], h[i]) : d.abs_critical(h[i]) / d.critical_exponent();
        std::vector<double> one(h.size(), 1.0);
        return 0.5 * lap_.inner(s.v.values, s.v.values) + 0.5 * lap_.inner(h, Ah) - lap_.inner(pot, one);
    }

    // E is the quadrature energy at the first sample, carried forward by the
    // scheme's conserved discrete energy (anchor = E_quad(0) - E_disc(0))
    Sample sample(const EvolutionState& s, std::optional<double>& mu_prev, double anchor) const {
        const Dimension d = grid_->dim();
        const RadialField u = s.u();
        const RadialField& v = s.v;
        Sample row;
        row.t = s.t;
        const EnergyReport e = energy(u, v);
        row.E = discrete_energy(s) + anchor;
        row.kinetic = 2.0 * e.kinetic;
        row.grad_sq = 2.0 * e.gradient;
        const double def = gradient_deficit(u);
        row.d = std::abs(def) + row.kinetic;
        row.dtu_l2 = std::sqrt(row.kinetic);
        row.sup_u = sup_u(s);
        std::vector<double> loc(u.size());
        const auto du = radial_derivative(u);
        for (std::size_t i = 0; i < loc.size(); ++i) loc[i] = 0.5 * (v[i] * v[i] + du[i] * du[i]);
        row.local_energy = integrate_ball(*grid_, loc, cfg_.local_radius);
        const CutoffPair cut(cfg_.g_radius);
        row.g_R = g_R(u, v, cut);
        const YPair yp = d.value() == 5 ? y_functionals(u, v) : y_functionals(u, v, cut);
        row.y = yp.y;
        row.yprime = yp.yprime;
        if (cfg_.modulation && row.d <= cfg_.delta0 * grad_norm_sq_W_exact(d)) {
            try {
                ModulationOptions opt;
                opt.delta0 = cfg_.delta0;
                opt.with_remainder = false;
                opt.mu_guess = mu_prev;
                const ModulationFit f = fit(u, v, opt);
                row.alpha = f.alpha;
                row.mu = f.mu;
                mu_prev = f.mu;
            } catch (const NoRoot&) {
                mu_prev.reset();
            }
        } else {
            mu_prev.reset();
        }
        return row;
    }

    EvolveResult evolve(const RadialField& u0, const RadialField& v0, double T, Direction dir, double t_start = 0.0) const {
        return evolve(make_state(u0, v0, t_start), T, dir);
    }
    // continue from a state, keeping its background
    EvolveResult evolve(EvolutionState s, double T, Direction dir) const;

private:
    GridPtr grid_;
    SolverConfig cfg_;
    RadialLaplacian lap_;
    std::vector<double> W_, V_, rk_;
};

namespace detail {

inline Snapshot snapshot_of(const EvolutionState& s) {
    return {s.t, s.u().values, s.v.values};
}

// decreasing log-linear trend of d over the trailing window
inline std::optional<double> d_decay_rate(const std::vector<Sample>& rows, double window) {
    if (rows.empty()) return std::nullopt;
    const double t_end = rows.back().t;
    const double t_first = rows.front().t;
    const double sgn = t_end >= t_first ? 1.0 : -1.0;
    std::vector<double> t, y;
    bool all_zero = true;
    for (const auto& r : rows) {
        if (sgn * (t_end - r.t) > window) continue;
        t.push_back(sgn * r.t);
        y.push_back(r.d);
        if (r.d > 1e-14) all_zero = false;
    }
    if (all_zero) return 0.0;
    const double rate = fit_decay_rate(t, y, 1e-14);
    if (!std::isfinite(rate)) return std::nullopt;
    return rate;
}

} // namespace detail

inline EvolveResult Evolver::evolve(EvolutionState s, double T, Direction dir) const {
    if (!(T > 0.0)) throw OutOfRange("evolution time T must be positive", 0);
    if (grid_->r_max() < cfg_.data_support + T + 10.0 - 1e-9)
        throw OutOfRange("r_max=" + std::to_string(grid_->r_max()) + " is inside the light cone: need at least " +
                             std::to_string(cfg_.data_support + T + 10.0),
                         0);
    const Dimension d = grid_->dim();
    const int sgn = dir == Direction::forward ? 1 : -1;
    const double dt = dt_for(T);
    const long n_steps = std::lround(T / dt);
    const long sample_every = std::max(1L, std::lround(cfg_.sample_dt / dt));
    const long snap_every = cfg_.snapshot_dt > 0.0 ? std::max(1L, std::lround(cfg_.snapshot_dt / dt)) : 0;
    const double threshold = cfg_.blowup_factor * eval_W(d, 0.0);
    const double EW = energy_W_exact(d);

    EvolveResult res;
    res.dt = dt;
    res.series.direction = dir;
    const double t_start = s.t;
    res.series.t_start = t_start;
    res.snapshots.grid = grid_;
    std::optional<double> mu_prev;
    const double anchor = energy(s.u(), s.v).total - discrete_energy(s);

    res.series.rows.push_back(sample(s, mu_prev, anchor));
    if (snap_every) res.snapshots.frames.push_back(detail::snapshot_of(s));

    std::deque<double> sups;
    std::optional<EvolutionState> before_crossing;
    EvolutionState prev = s;

    for (long n = 1; n <= n_steps; ++n) {
        if (cfg_.max_steps > 0 && s.steps >= cfg_.max_steps) {
            res.series.stop_reason = "max_steps";
            break;
        }
        prev = s;
        step(s, dt, sgn);
        const double sup = sup_u(s);
        sups.push_back(sup);
        if (sups.size() > static_cast<std::size_t>(cfg_.blowup_monotone_steps) + 1) sups.pop_front();

        if (sup > threshold) {
            if (!before_crossing) before_crossing = prev;
            bool monotone = sups.size() > static_cast<std::size_t>(cfg_.blowup_monotone_steps);
            for (std::size_t k = 1; monotone && k < sups.size(); ++k)
                if (!(sups[k] > sups[k - 1])) monotone = false;
            const bool bad = !std::isfinite(sup);
            if (monotone || bad) {
                // bisect the sub-step from the last state below threshold
                const EvolutionState& base = *before_crossing;
                double lo = 0.0, hi = dt;
                for (int it = 0; it < 12; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    EvolutionState trial = base;
                    step(trial, mid, sgn);
                    (sup_u(trial) > threshold ? hi : lo) = mid;
                }
                BlowUpEvent ev;
                ev.t_blow = base.t + sgn * hi;
                ev.sup_at_detection = sup;
                ev.non_finite = bad;
                res.series.blowup = ev;
                res.series.stop_reason = "blowup";
                break;
            }
        } else {
            before_crossing.reset();
        }

        if (n % sample_every == 0 || n == n_steps) res.series.rows.push_back(sample(s, mu_prev, anchor));
        if (snap_every && n % snap_every == 0) res.snapshots.frames.push_back(detail::snapshot_of(s));

        if (cfg_.stop_on_outcome && n % sample_every == 0 && std::abs(s.t - t_start) >= cfg_.min_span) {
            const Sample& last = res.series.rows.back();
            const auto rate = detail::d_decay_rate(res.series.rows, cfg_.min_span);
            if (last.d < cfg_.tol_d && rate && *rate >= 0.0) {
                res.series.stop_reason = "converged";
                break;
            }
            if (last.local_energy < cfg_.dispersal_fraction * EW) {
                res.series.stop_reason = "dispersed";
                break;
            }
        }
    }
    res.final_state = s;
    return res;
}

//============================================================================
// Outcome classification
//============================================================================
struct OutcomeLabel {
    enum class Kind { ConvergedToW, Dispersed, BlewUp, Undetermined };
    Kind kind = Kind::Undetermined;
    double rate = std::numeric_limits<double>::quiet_NaN();                // ConvergedToW
    double final_local_energy = std::numeric_limits<double>::quiet_NaN();  // Dispersed
    double t_blow = std::numeric_limits<double>::quiet_NaN();              // BlewUp

    std::string name() const {
        switch (kind) {
        case Kind::ConvergedToW: return "ConvergedToW";
        case Kind::Dispersed: return "Dispersed";
        case Kind::BlewUp: return "BlewUp";
        default: return "Undetermined";
        }
    }
};

inline OutcomeLabel detect_outcome(const TimeSeries& ts, const SolverConfig& cfg, Dimension dim, double min_span) {
    OutcomeLabel out;
    if (ts.blowup) {
        out.kind = OutcomeLabel::Kind::BlewUp;
        out.t_blow = ts.blowup->t_blow;
        return out;
    }
    if (ts.rows.size() < 3) return out;
    const Sample& first = ts.rows.front();
    const Sample& last = ts.rows.back();
    if (std::abs(last.t - first.t) < min_span * (1.0 - 1e-9)) return out;
    const auto rate = detail::d_decay_rate(ts.rows, min_span);
    if (last.d < cfg.tol_d && rate && *rate >= 0.0) {
        out.kind = OutcomeLabel::Kind::ConvergedToW;
        out.rate = *rate;
        return out;
    }
    const double EW = energy_W_exact(dim);
    const bool conserved = std::abs(last.E - first.E) <= 1e-3 * std::max(std::abs(first.E), EW);
    if (last.local_energy < cfg.dispersal_fraction * EW && conserved) {
        out.kind = OutcomeLabel::Kind::Dispersed;
        out.final_local_energy = last.local_energy;
    }
    return out;
}

//============================================================================
// |grad u|^2 + N/2 |v|^2 <= |grad W|^2 along a subcritical threshold run
//============================================================================
struct TrappingReport {
    bool pass = true;
    double min_margin = std::numeric_limits<double>::infinity();  // (G + slack) - lhs
    double worst_t = 0.0;
};

inline TrappingReport trapping_check(const TimeSeries& ts, Dimension dim, double slack_fraction = 1e-3) {
    const double G = grad_norm_sq_W_exact(dim);
    TrappingReport rep;
    if (ts.rows.empty()) return rep;
    if (ts.rows.front().grad_sq > G * (1.0 + slack_fraction))
        throw OutOfRange("initial data is above the threshold gradient; trapping does not apply", 0);
    const double n = dim.n();
    for (const auto& r : ts.rows) {
        const double m = G * (1.0 + slack_fraction) - (r.grad_sq + 0.5 * n * r.kinetic);
        if (m < rep.min_margin) {
            rep.min_margin = m;
            rep.worst_t = r.t;
        }
    }
    rep.pass = rep.min_margin >= 0.0;
    if (!rep.pass)
        throw Violated("energy trapping fails at t=" + std::to_string(rep.worst_t) + " by " +
                       std::to_string(-rep.min_margin));
    return rep;
}

//============================================================================
// Finite speed of propagation: data agreeing on r >= R0 must give solutions
// agreeing on r >= R0 + |t - t0|.  The three-point stencil smears the front
// over a few cells, so the comparison may start edge_margin past the cone.
//============================================================================
struct FsopReport {
    bool pass = true;
    double max_difference = 0.0;   // on r >= R0 + |t| + margin
    double edge_difference = 0.0;  // on r >= R0 + |t|, for reference
    double tolerance = 1e-6;
};

inline FsopReport fsop_check(const Evolver& ev, const std::pair<RadialField, RadialField>& data1,
                             const std::pair<RadialField, RadialField>& data2, double R0, double T,
                             double tolerance = 1e-6, double edge_margin = 0.0) {
    if (!(ev.config().snapshot_dt > 0.0)) throw OutOfRange("fsop_check needs snapshot_dt > 0 in the solver config", 0);
    const auto r1 = ev.evolve(data1.first, data1.second, T, Direction::forward);
    const auto r2 = ev.evolve(data2.first, data2.second, T, Direction::forward);
    FsopReport rep;
    rep.tolerance = tolerance;
    const RadialGrid& g = *ev.grid();
    // a run that blew up is compared up to its last snapshot
    const std::size_t frames = std::min(r1.snapshots.size(), r2.snapshots.size());
    for (std::size_t k = 0; k < frames; ++k) {
        const auto& a = r1.snapshots.frames[k];
        const auto& b = r2.snapshots.frames[k];
        const double edge = R0 + std::abs(a.t);
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (g.r(i) < edge - 1e-9) continue;
            const double diff = std::max(std::abs(a.u[i] - b.u[i]), std::abs(a.v[i] - b.v[i]));
            rep.edge_difference = std::max(rep.edge_difference, diff);
            if (g.r(i) >= edge + edge_margin - 1e-9) rep.max_difference = std::max(rep.max_difference, diff);
        }
    }
    rep.pass = rep.max_difference <= tolerance;
    return rep;
}

//============================================================================
// Radial momentum proxy: int v grad u = int v u_r x/|x|; the angular factor is
// averaged over the 2N directions +-e_k, which cancels exactly.
//============================================================================
inline std::vector<double> momentum_proxy(const RadialField& u, const RadialField& v) {
    require_same_grid(u, v);
    const int n = u.dim().value();
    const auto du = radial_derivative(u);
    std::vector<double> radial(u.size());
    for (std::size_t i = 0; i < radial.size(); ++i) radial[i] = v[i] * du[i];
    const double prof = integrate(*u.grid, radial);
    std::vector<double> P(static_cast<std::size_t>(n), 0.0);
    for (int j = 0; j < n; ++j) {
        double avg = 0.0;
        for (int k = 0; k < n; ++k)
            for (double s : {1.0, -1.0}) avg += (k == j ? s : 0.0);
        P[static_cast<std::size_t>(j)] = prof * avg / (2.0 * n);
    }
    return P;
}

//============================================================================
// Series data for the evolver.  Forward runs get the Y-component of v
// adjusted so that the leapfrog starts on its own decaying mode; otherwise
// the O(dt^2) mismatch seeds the growing mode, which dominates by t ~ 5/e0.
//============================================================================
inline std::pair<RadialField, RadialField> series_initial_data(const ApproxSolution& ap, const SpectralPair& sp,
                                                               double t0, double dt, Direction dir) {
    auto [u, v] = assemble_U(ap, t0);
    if (dir == Direction::forward && ap.a != 0.0) {
        const RadialLaplacian lap(ap.grid);
        const auto h = ap.h(t0);
        const double beta = lap.inner(h, sp.Y.values) / lap.inner(sp.Y.values, sp.Y.values);
        const double x = sp.e0 * dt;
        const double rho = std::exp(-std::acosh(1.0 + 0.5 * x * x));
        const double dv = beta * ((rho - 1.0) / dt - 0.5 * dt * sp.e0 * sp.e0 + sp.e0);
        for (std::size_t i = 0; i < v.size(); ++i) v.values[i] += dv * sp.Y[i];
    }
    return {std::move(u), std::move(v)};
}

} // namespace critwave

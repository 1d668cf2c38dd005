#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "io.hpp"

namespace critwave {

//============================================================================
// Initial data from a config
//============================================================================
struct InitialData {
    RadialField u, v;
    double t0 = 0.0;
    std::string descriptor;
};

inline GridPtr grid_for(const ExperimentConfig& c) { return make_grid(c.dim, c.dr, c.r_max); }

inline SpectralPair spectral_pair_for(const GridPtr& g) { return matrix_eigenpair(build_operator(g->dim(), g)); }

// deterministic smooth perturbation: four Gaussians, seeded
inline void add_perturbation(RadialField& u, double amp, unsigned long long seed) {
    if (amp == 0.0) return;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> coef(0.0, 1.0);
    std::uniform_real_distribution<double> centre(0.0, 5.0);
    for (int j = 0; j < 4; ++j) {
        const double c = coef(rng), r0 = centre(rng);
        for (std::size_t i = 0; i < u.size(); ++i) {
            const double x = u.grid->r(i) - r0;
            u[i] += amp * c * std::exp(-x * x);
        }
    }
}

inline InitialData make_initial_data(const ExperimentConfig& c, const GridPtr& g, Direction dir, double dt,
                                     const SpectralPair* sp = nullptr) {
    InitialData out;
    const Dimension d = g->dim();
    switch (c.init) {
    case InitKind::ground:
        out.u = ground_state(g);
        out.v = RadialField(g);
        out.descriptor = "ground";
        break;
    case InitKind::scaled_w:
        out.u = c.lambda * ground_state(g);
        out.v = RadialField(g);
        out.descriptor = "scaled-w lambda=" + format_double(c.lambda);
        break;
    case InitKind::series: {
        std::optional<SpectralPair> own;
        if (!sp) sp = &own.emplace(spectral_pair_for(g));
        const double t0 = c.t0 ? *c.t0 : 3.0 / sp->e0;
        const auto ap = build_phi_sequence(c.a, c.k, *sp, expand_J(d, c.k + 5), t0);
        auto [u, v] = series_initial_data(ap, *sp, t0, dt, dir);
        out.u = std::move(u);
        out.v = std::move(v);
        out.t0 = t0;
        out.descriptor = "series a=" + format_double(c.a) + " k=" + std::to_string(c.k);
        break;
    }
    case InitKind::file: {
        auto [u, v] = read_initial_data(c.file, g);
        out.u = std::move(u);
        out.v = std::move(v);
        out.descriptor = "file " + c.file;
        break;
    }
    }
    add_perturbation(out.u, c.perturb_amp, c.seed);
    return out;
}

//============================================================================
// One run
//============================================================================
struct RunOutput {
    InitialData data;
    EvolveResult result;
    OutcomeLabel outcome;
    double e0 = 0.0;
    double min_span = 0.0;
};

inline RunOutput run_experiment(const ExperimentConfig& c, Direction dir, const GridPtr& g, const SpectralPair& sp) {
    RunOutput out;
    out.e0 = sp.e0;
    out.min_span = 3.0 / sp.e0;
    SolverConfig sc = c.solver();
    sc.min_span = out.min_span;
    const Evolver ev(g, sc);
    out.data = make_initial_data(c, g, dir, ev.dt_for(c.T), &sp);
    out.result = ev.evolve(out.data.u, out.data.v, c.T, dir, out.data.t0);
    out.outcome = detect_outcome(out.result.series, sc, g->dim(), out.min_span);
    return out;
}

//============================================================================
// Sweeps over a (series data) and lambda (scaled W), both directions
//============================================================================
struct SweepRow {
    std::size_t index = 0;
    std::string init;
    double a = std::numeric_limits<double>::quiet_NaN();
    double lambda = std::numeric_limits<double>::quiet_NaN();
    Direction direction = Direction::forward;
    OutcomeLabel outcome;
    double rate = std::numeric_limits<double>::quiet_NaN();
    double t_blow = std::numeric_limits<double>::quiet_NaN();
    double final_local_energy = std::numeric_limits<double>::quiet_NaN();
    std::string error;
};

struct SweepResult {
    std::vector<SweepRow> rows;
};

inline SweepResult classify_sweep(const ExperimentConfig& base) {
    std::vector<ExperimentConfig> jobs;
    std::vector<SweepRow> rows;
    for (double a : base.a_values)
        for (Direction dir : {Direction::forward, Direction::backward}) {
            ExperimentConfig c = base;
            c.init = InitKind::series;
            c.a = a;
            c.direction = dir;
            SweepRow r;
            r.init = "series";
            r.a = a;
            r.direction = dir;
            jobs.push_back(c);
            rows.push_back(r);
        }
    for (double l : base.lambda_values)
        for (Direction dir : {Direction::forward, Direction::backward}) {
            ExperimentConfig c = base;
            c.init = InitKind::scaled_w;
            c.lambda = l;
            c.direction = dir;
            SweepRow r;
            r.init = "scaled-w";
            r.lambda = l;
            r.direction = dir;
            jobs.push_back(c);
            rows.push_back(r);
        }
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i].index = i;

    SweepResult res;
    if (jobs.empty()) return res;

    GridPtr g;
    std::optional<SpectralPair> sp;
    std::string setup_error;
    try {
        g = grid_for(base);
        sp = spectral_pair_for(g);
    } catch (const std::exception& e) {
        setup_error = e.what();
    }

    // each worker writes only its own row; rows come out in index order
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            SweepRow& row = rows[i];
            if (!setup_error.empty()) {
                row.error = setup_error;
                continue;
            }
            try {
                ExperimentConfig c = jobs[i];
                c.stop_on_outcome = true;
                const RunOutput out = run_experiment(c, c.direction, g, *sp);
                row.outcome = out.outcome;
                row.t_blow = out.outcome.t_blow;
                const auto& ts = out.result.series;
                if (!ts.rows.empty()) row.final_local_energy = ts.rows.back().local_energy;
                if (const auto rate = detail::d_decay_rate(ts.rows, out.min_span)) row.rate = *rate;
            } catch (const std::exception& e) {
                row.error = e.what();
            }
        }
    };
    const int n_workers = std::max(1, std::min<int>(base.workers, static_cast<int>(jobs.size())));
    std::vector<std::thread> pool;
    for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    res.rows = std::move(rows);
    return res;
}

inline std::string csv_cell(std::string s) {
    for (char& ch : s)
        if (ch == ',' || ch == '\n' || ch == '\r') ch = ';';
    return s;
}

inline void write_sweep_csv(const std::filesystem::path& path, const SweepResult& res,
                            const std::vector<std::string>& comments) {
    CsvWriter w(path, comments,
                {"index", "init", "a", "lambda", "direction", "outcome", "rate", "t_blow", "final_local_energy", "error"});
    for (const auto& r : res.rows)
        w.raw_row({std::to_string(r.index), r.init, format_double(r.a), format_double(r.lambda),
                   direction_name(r.direction), r.error.empty() ? r.outcome.name() : "Error", format_double(r.rate),
                   format_double(r.t_blow), format_double(r.final_local_energy), csv_cell(r.error)});
    w.close();
}

} // namespace critwave

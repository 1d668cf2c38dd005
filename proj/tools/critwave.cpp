// critwave: command-line front end for the threshold-dynamics lab.
//
//   critwave spectrum --dim 3 [--dr 0.02] [--r-max 200] [--out spectrum.csv]
//   critwave series   --dim 3 --a 1 --k 3 [--out-dir .]
//   critwave evolve   (--config run.cfg | --dim 3 --init series --a -1 --T 5 ...) [--out run.csv]
//   critwave modulate --snapshots snaps.csv [--out modulation.csv]
//   critwave diagnose --snapshots snaps.csv [--R 150] [--out virial.csv]
//   critwave classify --config sweep.cfg
//
// exit codes: 0 ok, 1 configuration error, 2 numerical failure, 3 blow-up

#include <CLI11.hpp>

#include <critwave/sweep.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace critwave;

namespace {

enum Exit { ok = 0, config_error = 1, numeric_failure = 2, blew_up = 3 };

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path, 0);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// flags -> "key = value" text, in the order given
struct KeyText {
    std::vector<std::pair<std::string, std::string>> kv;
    void add(const std::string& k, const std::string& v) {
        if (!v.empty()) kv.emplace_back(k, v);
    }
    bool has(const std::string& k) const {
        for (const auto& [a, b] : kv)
            if (a == k) return true;
        return false;
    }
    std::string text() const {
        std::string s;
        for (const auto& [k, v] : kv) s += k + " = " + v + "\n";
        return s;
    }
};

// grid-only commands still go through the config validator
ExperimentConfig validate_partial(const KeyText& kt) {
    std::string s = kt.text();
    if (!kt.has("init")) s += "init = ground\n";
    if (!kt.has("T")) s += "T = 1\n";
    return parse_config(s);
}

fs::path prepare_dir(const fs::path& p) {
    const fs::path dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
    fs::create_directories(dir);
    return dir;
}

std::vector<std::string> prefixed(const std::vector<std::string>& comments) {
    std::vector<std::string> out;
    for (const auto& c : comments) out.push_back(c.empty() ? "#" : "# " + c);
    return out;
}

//============================================================================
// subcommands
//============================================================================
int cmd_spectrum(const KeyText& kt, const std::string& out) {
    const ExperimentConfig c = validate_partial(kt);
    const GridPtr g = grid_for(c);
    const SpectralPair sp = ground_eigen(build_operator(g->dim(), g));
    std::vector<std::string> comments{"# dim=" + std::to_string(c.dim) + " e0=" + format_double(sp.e0) +
                                      " residual=" + format_double(sp.residual)};
    for (const auto& e : config_echo(kt.text())) comments.push_back(e);
    const fs::path path(out);
    const fs::path dir = prepare_dir(path);
    CsvWriter w(path, comments, {"r", "Y"});
    for (std::size_t i = 0; i < g->size(); ++i) w.row({g->r(i), sp.Y[i]});
    w.close();

    Manifest m;
    m.config_text = kt.text();
    m.grid_hashes.push_back(grid_hash(*g));
    m.add_file(path.filename().string());
    m.add_scalar("e0", sp.e0);
    m.add_scalar("e0_matrix", sp.e0_matrix);
    m.add_scalar("e0_shooting", sp.e0_shooting);
    m.add_scalar("residual", sp.residual);
    write_manifest(dir / (path.stem().string() + "_manifest.txt"), m);
    std::cout << "e0 = " << format_double(sp.e0) << "\n";
    return ok;
}

int cmd_series(const KeyText& kt, const std::string& out_dir) {
    const ExperimentConfig c = validate_partial(kt);
    const GridPtr g = grid_for(c);
    const SpectralPair sp = spectral_pair_for(g);
    const double t0 = c.t0 ? *c.t0 : 3.0 / sp.e0;
    const ApproxSolution ap = build_phi_sequence(c.a, c.k, sp, expand_J(g->dim(), c.k + 5), t0);
    fs::create_directories(out_dir);

    Manifest m;
    m.config_text = kt.text();
    m.grid_hashes.push_back(grid_hash(*g));
    std::vector<std::string> comments{"# a=" + format_double(c.a) + " k=" + std::to_string(c.k) +
                                      " e0=" + format_double(sp.e0)};
    for (const auto& e : config_echo(kt.text())) comments.push_back(e);
    for (int j = 1; j <= ap.k; ++j) {
        const std::string name = "phi_" + std::to_string(j) + ".csv";
        write_field_csv(fs::path(out_dir) / name, ap.phi[static_cast<std::size_t>(j - 1)], comments);
        m.add_file(name);
        m.add_scalar("cancellation_" + std::to_string(j), ap.cancellation[static_cast<std::size_t>(j - 1)]);
    }
    m.add_scalar("e0", sp.e0);
    m.add_scalar("t_ref", ap.t_ref);
    write_manifest(fs::path(out_dir) / "series_manifest.txt", m);
    return ok;
}

int cmd_evolve(const std::string& config_text, const std::string& out, const std::string& snaps_out) {
    const ExperimentConfig c = parse_config(config_text);
    const GridPtr g = grid_for(c);
    const SpectralPair sp = spectral_pair_for(g);
    const RunOutput run = run_experiment(c, c.direction, g, sp);

    const fs::path path = out.empty() ? fs::path(c.output_dir) / "run.csv" : fs::path(out);
    const fs::path dir = prepare_dir(path);
    const auto echo = config_echo(config_text);
    write_run_csv(path, run.result.series, echo);

    Manifest m;
    m.config_text = config_text;
    m.grid_hashes.push_back(grid_hash(*g));
    m.add_file(path.filename().string());
    if (!run.result.snapshots.empty()) {
        const fs::path sp_path = snaps_out.empty() ? dir / "snapshots.csv" : fs::path(snaps_out);
        write_snapshots_csv(sp_path, run.result.snapshots, echo);
        m.add_file(sp_path.filename().string());
    }
    const auto& rows = run.result.series.rows;
    m.add_scalar("initial_data", run.data.descriptor);
    m.add_scalar("e0", sp.e0);
    m.add_scalar("dt", run.result.dt);
    m.add_scalar("steps", static_cast<double>(run.result.final_state.steps));
    m.add_scalar("stop_reason", run.result.series.stop_reason);
    m.add_scalar("outcome", run.outcome.name());
    m.add_scalar("t_blow", run.outcome.t_blow);
    if (!rows.empty()) {
        const double E0 = rows.front().E;
        double drift = 0.0;
        for (const auto& r : rows) drift = std::max(drift, std::abs(r.E - E0));
        m.add_scalar("E0", E0);
        m.add_scalar("max_energy_drift", drift);
        m.add_scalar("final_d", rows.back().d);
        m.add_scalar("final_local_energy", rows.back().local_energy);
    }
    write_manifest(dir / (path.stem().string() + "_manifest.txt"), m);

    std::cout << "outcome = " << run.outcome.name() << "\n";
    if (run.result.series.blowup) {
        std::cout << "t_blow = " << format_double(run.result.series.blowup->t_blow) << "\n";
        return blew_up;
    }
    return ok;
}

int cmd_modulate(const std::string& snaps_path, const std::string& out, double delta0) {
    const CsvTable raw = read_csv(snaps_path);
    const SnapshotSet snaps = read_snapshots_csv(snaps_path);
    const fs::path path = out.empty() ? fs::path(snaps_path).parent_path() / "modulation.csv" : fs::path(out);
    const fs::path dir = prepare_dir(path);
    auto comments = prefixed(raw.comments);
    comments.push_back("# modulate delta0=" + format_double(delta0));
    CsvWriter w(path, comments, {"t", "alpha", "mu", "ortho_W", "ortho_W_tilde"});
    std::optional<double> mu_prev;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    int fitted = 0;
    for (std::size_t k = 0; k < snaps.size(); ++k) {
        try {
            ModulationOptions opt;
            opt.delta0 = delta0;
            opt.mu_guess = mu_prev;
            const auto f = fit(snaps.u(k), snaps.v(k), opt);
            mu_prev = f.mu;
            w.row({snaps.t(k), f.alpha, f.mu, f.ortho_W, f.ortho_W_tilde});
            ++fitted;
        } catch (const NoRoot&) {
            mu_prev.reset();
            w.row({snaps.t(k), nan, nan, nan, nan});
        }
    }
    w.close();
    Manifest m;
    for (const auto& c : raw.comments) m.config_text += c + "\n";
    m.grid_hashes.push_back(grid_hash(*snaps.grid));
    m.add_file(path.filename().string());
    m.add_scalar("snapshots", static_cast<double>(snaps.size()));
    m.add_scalar("fitted", static_cast<double>(fitted));
    write_manifest(dir / (path.stem().string() + "_manifest.txt"), m);
    return ok;
}

int cmd_diagnose(const std::string& snaps_path, const std::string& out, double R) {
    const CsvTable raw = read_csv(snaps_path);
    const SnapshotSet snaps = read_snapshots_csv(snaps_path);
    const auto rep = virial_identity_check(snaps, CutoffPair(R));
    const fs::path path = out.empty() ? fs::path(snaps_path).parent_path() / "virial.csv" : fs::path(out);
    const fs::path dir = prepare_dir(path);
    auto comments = prefixed(raw.comments);
    comments.push_back("# diagnose R=" + format_double(R) + " C_A=" + format_double(rep.C_A) +
                       " max_discrepancy=" + format_double(rep.max_discrepancy));
    CsvWriter w(path, comments, {"t", "gR", "gR_fd", "main_terms", "exterior_density"});
    for (std::size_t k = 0; k < rep.t.size(); ++k)
        w.row({rep.t[k], rep.gR[k], rep.gR_fd[k], rep.main_terms[k], rep.exterior_density[k]});
    w.close();
    Manifest m;
    for (const auto& c : raw.comments) m.config_text += c + "\n";
    m.grid_hashes.push_back(grid_hash(*snaps.grid));
    m.add_file(path.filename().string());
    m.add_scalar("R", R);
    m.add_scalar("C_A", rep.C_A);
    m.add_scalar("max_discrepancy", rep.max_discrepancy);
    write_manifest(dir / (path.stem().string() + "_manifest.txt"), m);
    return ok;
}

int cmd_classify(const std::string& config_text, std::optional<int> workers) {
    ExperimentConfig c = parse_config(config_text);
    if (workers) c.workers = *workers;
    const SweepResult res = classify_sweep(c);
    const fs::path dir(c.output_dir);
    fs::create_directories(dir);
    write_sweep_csv(dir / "sweep.csv", res, config_echo(config_text));
    Manifest m;
    m.config_text = config_text;
    if (!res.rows.empty()) m.grid_hashes.push_back(grid_hash(*grid_for(c)));
    m.add_file("sweep.csv");
    m.add_scalar("runs", static_cast<double>(res.rows.size()));
    for (const auto& r : res.rows)
        m.add_scalar("outcome_" + std::to_string(r.index), r.error.empty() ? r.outcome.name() : "Error");
    write_manifest(dir / "sweep_manifest.txt", m);
    for (const auto& r : res.rows)
        std::cout << r.index << " " << r.init << " a=" << format_double(r.a) << " lambda=" << format_double(r.lambda)
                  << " " << direction_name(r.direction) << " -> " << (r.error.empty() ? r.outcome.name() : r.error)
                  << "\n";
    return ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"critwave: ground state, spectrum, series and radial evolution for the energy-critical wave equation"};
    app.require_subcommand(1);

    // shared grid flags
    std::string dim, dr, r_max, a, k, t0, T, init, direction, cfl, lambda, file, sample_dt, snapshot_dt;
    std::string out, out_dir = ".", config_path, snaps_out, snaps_in;
    double R = 150.0, delta0 = 0.1;
    std::optional<int> workers;

    auto* spectrum = app.add_subcommand("spectrum", "negative eigenpair of the linearized operator");
    spectrum->add_option("--dim", dim, "dimension N (3, 4 or 5)")->required();
    spectrum->add_option("--dr", dr, "grid spacing");
    spectrum->add_option("--r-max", r_max, "outer radius");
    spectrum->add_option("--out", out, "output CSV")->default_str("spectrum.csv");

    auto* series = app.add_subcommand("series", "exponential-series profiles Phi_1..Phi_k");
    series->add_option("--dim", dim, "dimension N")->required();
    series->add_option("--a", a, "series coefficient");
    series->add_option("--k", k, "truncation order");
    series->add_option("--t0", t0, "construction time (N=5 domain check)");
    series->add_option("--dr", dr, "grid spacing");
    series->add_option("--r-max", r_max, "outer radius");
    series->add_option("--out-dir", out_dir, "output directory");

    auto* evolve = app.add_subcommand("evolve", "evolve radial data and classify the outcome");
    evolve->add_option("--config", config_path, "key = value config file");
    evolve->add_option("--dim", dim, "dimension N");
    evolve->add_option("--init", init, "ground | series | scaled-w | file");
    evolve->add_option("--a", a, "series coefficient");
    evolve->add_option("--k", k, "series truncation");
    evolve->add_option("--t0", t0, "series start time (default 3/e0)");
    evolve->add_option("--lambda", lambda, "amplitude for scaled-w");
    evolve->add_option("--file", file, "initial data CSV for init = file");
    evolve->add_option("--T", T, "duration");
    evolve->add_option("--direction", direction, "forward | backward");
    evolve->add_option("--dr", dr, "grid spacing");
    evolve->add_option("--r-max", r_max, "outer radius");
    evolve->add_option("--cfl", cfl, "dt / dr");
    evolve->add_option("--sample-dt", sample_dt, "sampling interval");
    evolve->add_option("--snapshot-dt", snapshot_dt, "snapshot interval (0: none)");
    evolve->add_option("--out", out, "run CSV (default <output_dir>/run.csv)");
    evolve->add_option("--snapshots", snaps_out, "snapshot CSV (default next to the run CSV)");

    auto* modulate = app.add_subcommand("modulate", "modulation fits along stored snapshots");
    modulate->add_option("--snapshots", snaps_in, "snapshot CSV from evolve")->required();
    modulate->add_option("--delta0", delta0, "admissible d relative to |grad W|^2");
    modulate->add_option("--out", out, "output CSV");

    auto* diagnose = app.add_subcommand("diagnose", "virial identity along stored snapshots");
    diagnose->add_option("--snapshots", snaps_in, "snapshot CSV from evolve")->required();
    diagnose->add_option("--R", R, "cutoff radius");
    diagnose->add_option("--out", out, "output CSV");

    auto* classify = app.add_subcommand("classify", "outcome sweep over a_values / lambda_values");
    classify->add_option("--config", config_path, "key = value config file")->required();
    classify->add_option("--workers", workers, "override the worker count");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? ok : config_error;
    }

    try {
        KeyText kt;
        kt.add("dim", dim);
        kt.add("init", init);
        kt.add("T", T);
        kt.add("a", a);
        kt.add("k", k);
        kt.add("t0", t0);
        kt.add("lambda", lambda);
        kt.add("file", file);
        kt.add("direction", direction);
        kt.add("dr", dr);
        kt.add("r_max", r_max);
        kt.add("cfl", cfl);
        kt.add("sample_dt", sample_dt);
        kt.add("snapshot_dt", snapshot_dt);

        if (*spectrum) return cmd_spectrum(kt, out.empty() ? "spectrum.csv" : out);
        if (*series) return cmd_series(kt, out_dir);
        if (*evolve) {
            if (!config_path.empty() && !kt.kv.empty())
                throw ConfigError("give either --config or individual flags, not both", 0);
            return cmd_evolve(config_path.empty() ? kt.text() : slurp(config_path), out, snaps_out);
        }
        if (*modulate) return cmd_modulate(snaps_in, out, delta0);
        if (*diagnose) return cmd_diagnose(snaps_in, out, R);
        if (*classify) return cmd_classify(slurp(config_path), workers);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return config_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return numeric_failure;
    }
    return ok;
}

#include <gtest/gtest.h>

#include <critwave/sweep.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace fs = std::filesystem;
using namespace critwave;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch_root() { return fs::temp_directory_path() / ("critwave_test_" + std::to_string(::getpid())); }

struct ScratchCleanup : ::testing::Environment {
    void TearDown() override { fs::remove_all(scratch_root()); }
};
[[maybe_unused]] const auto* const cleanup = ::testing::AddGlobalTestEnvironment(new ScratchCleanup);

// fresh scratch directory per test
fs::path scratch(const std::string& name) {
    const fs::path p = scratch_root() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(CRITWAVE_CLI) + " " + args + " > /dev/null 2>&1";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

// fast N = 3 grid (r_max at the admissible minimum plus a margin)
const char* small_grid_keys = "dim = 3\ndr = 0.05\nr_max = 100\n";

template <class E>
int thrown_line(const std::string& text) {
    try {
        parse_config(text);
    } catch (const E& e) {
        return e.line;
    }
    return -1;
}

// body of a CSV: everything after the comment block
std::string csv_body(const fs::path& p) {
    std::istringstream in(slurp(p));
    std::string line, out;
    while (std::getline(in, line))
        if (line.empty() || line[0] != '#') out += line + "\n";
    return out;
}

} // namespace

//============================================================================
// parse_config
//============================================================================
TEST(Config, MinimalTextFillsDefaults) {
    const auto c = parse_config("dim = 4\ninit = ground\nT = 5\n");
    ExperimentConfig expect;
    expect.dim = 4;
    expect.T = 5.0;
    EXPECT_EQ(c, expect);
    EXPECT_EQ(c.dr, 0.02);
    EXPECT_EQ(c.r_max, 200.0);
    EXPECT_EQ(c.cfl, 0.5);
    EXPECT_EQ(c.blowup_factor, 20.0);
    EXPECT_FALSE(c.t0.has_value());
    EXPECT_EQ(c.workers, 1);
    EXPECT_EQ(c.virial_radii, std::vector<double>{150.0});
}

TEST(Config, CommentsBlankLinesAndSpacing) {
    const auto c = parse_config("# header\n\n  dim=5   # trailing\n\tinit = series\nT = 2.5\na = -1\nk = 3\n"
                                "t0 = 4.25\nr_max = 400\na_values = -1, 1 ,0.5\n");
    EXPECT_EQ(c.dim, 5);
    EXPECT_EQ(c.init, InitKind::series);
    EXPECT_EQ(c.T, 2.5);
    EXPECT_EQ(c.a, -1.0);
    EXPECT_EQ(c.k, 3);
    ASSERT_TRUE(c.t0.has_value());
    EXPECT_EQ(*c.t0, 4.25);
    EXPECT_EQ(c.a_values, (std::vector<double>{-1.0, 1.0, 0.5}));
}

TEST(Config, DimensionOutOfRange) {
    EXPECT_THROW(parse_config("dim = 6\ninit = ground\nT = 1\n"), OutOfRange);
    EXPECT_EQ(thrown_line<OutOfRange>("# c\ndim = 6\ninit = ground\nT = 1\n"), 2);
    EXPECT_EQ(thrown_line<OutOfRange>("init = ground\nT = 1\ndim = 2\n"), 3);
    EXPECT_EQ(thrown_line<OutOfRange>("dim = three\ninit = ground\nT = 1\n"), 1);
}

TEST(Config, UnknownKey) {
    EXPECT_EQ(thrown_line<UnknownKey>("dim = 3\ninit = ground\nT = 1\ncolour = blue\n"), 4);
}

TEST(Config, MissingRequired) {
    EXPECT_THROW(parse_config("dim = 3\ninit = ground\n"), MissingRequired);
    EXPECT_THROW(parse_config("init = ground\nT = 1\n"), MissingRequired);
    EXPECT_THROW(parse_config("dim = 3\nT = 1\n"), MissingRequired);
    EXPECT_EQ(thrown_line<MissingRequired>("dim = 3\ninit = file\nT = 1\n"), 2);
}

TEST(Config, FieldRangesAreChecked) {
    const std::string base = "dim = 3\ninit = ground\nT = 1\n";
    for (const char* bad : {"T2 = 1", "a = 2.5", "k = 0", "k = 7", "lambda = 0", "dr = 0.1", "dr = -1", "cfl = 0.6",
                            "blowup_factor = 1", "tol_d = 0", "max_steps = -1", "sample_dt = 0", "snapshot_dt = -1",
                            "dispersal_fraction = 1", "delta0 = 0", "modulation = maybe", "direction = up",
                            "background = W", "virial_radii = 1,-2", "a_values = 3", "lambda_values = 0",
                            "workers = 0", "workers = 65", "seed = -3", "perturb_amp = -1", "init = W",
                            "r_max = 50", "T = nan", "T = 1e400"}) {
        EXPECT_THROW(parse_config(base + bad + "\n"), ConfigError) << bad;
    }
    EXPECT_THROW(parse_config(base + "dim = 3\n"), ConfigError);  // duplicate
    EXPECT_THROW(parse_config(base + "just words\n"), ConfigError);
    // r_max floor depends on N
    EXPECT_NO_THROW(parse_config("dim = 3\ninit = ground\nT = 1\nr_max = 87\n"));
    EXPECT_THROW(parse_config("dim = 5\ninit = ground\nT = 1\nr_max = 150\n"), OutOfRange);
}

TEST(Config, SerializeRoundTrip) {
    const auto c = parse_config(std::string(small_grid_keys) +
                                "init = series\nT = 3\na = -0.7\nk = 5\nt0 = 2.125\ndirection = backward\n"
                                "snapshot_dt = 0.01\nbackground = zero\nvirial_radii = 2,3,150\n"
                                "lambda_values = 0.8,1.2\nworkers = 3\noutput_dir = out dir\n");
    const auto c2 = parse_config(serialize(c));
    EXPECT_EQ(c, c2);
    EXPECT_EQ(serialize(c), serialize(c2));
}

TEST(Config, RandomConfigsRoundTrip) {
    std::mt19937_64 rng(20261016);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        ExperimentConfig c;
        c.dim = 3 + static_cast<int>(rng() % 3);
        c.init = static_cast<InitKind>(rng() % 4);
        if (c.init == InitKind::file) c.file = "data_" + std::to_string(trial) + ".csv";
        c.T = 0.1 + 50.0 * u01(rng);
        c.a = 4.0 * u01(rng) - 2.0;
        c.k = 1 + static_cast<int>(rng() % 6);
        if (rng() % 2) c.t0 = 10.0 * u01(rng) - 5.0;
        c.lambda = 0.1 + 2.0 * u01(rng);
        c.direction = rng() % 2 ? Direction::forward : Direction::backward;
        c.perturb_amp = u01(rng) * 1e-3;
        c.seed = rng() % 1000000;
        c.dr = 0.001 + 0.049 * u01(rng);
        c.r_max = 200.0 + 500.0 * u01(rng);
        c.cfl = 0.01 + 0.49 * u01(rng);
        c.tol_d = u01(rng) + 1e-9;
        c.max_steps = static_cast<long>(rng() % 100000);
        c.sample_dt = 0.01 + u01(rng);
        c.snapshot_dt = u01(rng);
        c.dispersal_fraction = 0.01 + 0.9 * u01(rng);
        c.delta0 = 0.01 + 0.9 * u01(rng);
        c.modulation = rng() % 2;
        c.stop_on_outcome = rng() % 2;
        c.background = static_cast<Background>(rng() % 3);
        c.virial_radii = {1.0 + u01(rng), 150.0 * u01(rng) + 1.0};
        if (rng() % 2) c.a_values = {-1.0, 4.0 * u01(rng) - 2.0};
        c.workers = 1 + static_cast<int>(rng() % 8);
        const auto back = parse_config(serialize(c));
        ASSERT_EQ(back, c) << serialize(c);
    }
}

TEST(Config, SolverConfigCarriesFields) {
    const auto c = parse_config("dim = 3\ninit = ground\nT = 1\ncfl = 0.25\ntol_d = 0.002\ng_radius = 7\n");
    const auto s = c.solver();
    EXPECT_EQ(s.cfl, 0.25);
    EXPECT_EQ(s.tol_d, 0.002);
    EXPECT_EQ(s.g_radius, 7.0);
}

//============================================================================
// number formatting and CSV
//============================================================================
TEST(Io, FormatDoubleRoundTrips) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> e(-300.0, 300.0), m(-1.0, 1.0);
    for (int i = 0; i < 10000; ++i) {
        const double x = m(rng) * std::pow(10.0, e(rng));
        EXPECT_EQ(std::stod(format_double(x)), x);
    }
    EXPECT_EQ(format_double(0.1), "0.10000000000000001");
    EXPECT_EQ(format_double(std::nan("")), "nan");
    EXPECT_EQ(format_double(-INFINITY), "-inf");
}

TEST(Io, SnapshotCsvRoundTrip) {
    const fs::path dir = scratch("snapcsv");
    SnapshotSet s;
    s.grid = make_grid(3, 0.05, 100.0);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> z;
    for (int k = 0; k < 3; ++k) {
        Snapshot f;
        f.t = 1.0 - 0.1 * k;
        for (std::size_t i = 0; i < s.grid->size(); ++i) {
            f.u.push_back(z(rng));
            f.v.push_back(z(rng) * 1e-9);
        }
        s.frames.push_back(f);
    }
    write_snapshots_csv(dir / "s.csv", s, {"# note"});
    const auto back = read_snapshots_csv(dir / "s.csv");
    EXPECT_EQ(back.grid->dim().value(), 3);
    EXPECT_EQ(back.grid->size(), s.grid->size());
    EXPECT_EQ(back.grid->dr(), s.grid->dr());
    ASSERT_EQ(back.size(), 3u);
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_EQ(back.frames[k].t, s.frames[k].t);
        EXPECT_EQ(back.frames[k].u, s.frames[k].u);
        EXPECT_EQ(back.frames[k].v, s.frames[k].v);
    }
    EXPECT_LT(back.dt(), 0.0);
}

TEST(Io, InitialDataFromFile) {
    const fs::path dir = scratch("initfile");
    auto g = make_grid(3, 0.05, 100.0);
    const auto W = ground_state(g);
    write_field_csv(dir / "w.csv", W);
    const auto [u, v] = read_initial_data(dir / "w.csv", g);
    EXPECT_EQ(u.values, W.values);
    EXPECT_EQ(sup_norm(v), 0.0);
    EXPECT_THROW(read_initial_data(dir / "w.csv", make_grid(3, 0.04, 100.0)), IoError);
    EXPECT_THROW(read_initial_data(dir / "missing.csv", g), IoError);

    // init = file through the config
    auto c = parse_config(std::string(small_grid_keys) + "init = file\nT = 1\nfile = " + (dir / "w.csv").string() + "\n");
    const auto data = make_initial_data(c, g, Direction::forward, 0.01);
    EXPECT_EQ(data.u.values, W.values);
}

TEST(Io, MalformedCsv) {
    const fs::path dir = scratch("badcsv");
    std::ofstream(dir / "a.csv") << "# x\nt,u\n1,2\n3\n";
    EXPECT_THROW(read_csv(dir / "a.csv"), IoError);
    std::ofstream(dir / "b.csv") << "t,u\n1,zz\n";
    EXPECT_THROW(read_csv(dir / "b.csv"), IoError);
    std::ofstream(dir / "c.csv") << "# only comments\n";
    EXPECT_THROW(read_csv(dir / "c.csv"), IoError);
    std::ofstream(dir / "d.csv") << "t,r,u,v\n0,0,1,0\n";
    EXPECT_THROW(read_snapshots_csv(dir / "d.csv"), IoError);
}

TEST(Io, GridHashIsStableAndDistinguishes) {
    const auto h = grid_hash(*make_grid(3, 0.05, 100.0));
    EXPECT_EQ(h, grid_hash(*make_grid(3, 0.05, 100.0)));
    EXPECT_EQ(h.size(), 16u);
    EXPECT_NE(h, grid_hash(*make_grid(3, 0.04, 100.0)));
    EXPECT_NE(grid_hash(*make_grid(4, 0.05, 200.0)), grid_hash(*make_grid(5, 0.05, 200.0)));
    EXPECT_NE(h, grid_hash(*make_grid(3, 0.05, 120.0)));
}

TEST(Io, PerturbationIsSeeded) {
    auto g = make_grid(3, 0.05, 100.0);
    RadialField a(g), b(g), c(g);
    add_perturbation(a, 1e-3, 42);
    add_perturbation(b, 1e-3, 42);
    add_perturbation(c, 1e-3, 43);
    EXPECT_EQ(a.values, b.values);
    EXPECT_NE(a.values, c.values);
    EXPECT_GT(sup_norm(a), 0.0);
    RadialField z(g);
    add_perturbation(z, 0.0, 42);
    EXPECT_EQ(sup_norm(z), 0.0);
}

//============================================================================
// manifest
//============================================================================
TEST(Manifest, ListsEveryFileOnce) {
    const fs::path dir = scratch("manifest");
    Manifest m;
    m.config_text = "dim = 3\n\nT = 1\n";
    m.add_file("run.csv");
    m.add_file("snapshots.csv");
    m.add_file("run.csv");
    m.add_scalar("e0", 1.25);
    m.add_scalar("outcome", "Dispersed");
    write_manifest(dir / "m.txt", m);
    const std::string text = slurp(dir / "m.txt");
    EXPECT_NE(text.find("# dim = 3\n#\n# T = 1\n"), std::string::npos);
    EXPECT_NE(text.find("files = 2\n"), std::string::npos);
    EXPECT_EQ(text.find("file = run.csv"), text.rfind("file = run.csv"));
    EXPECT_NE(text.find("file = snapshots.csv"), std::string::npos);
    EXPECT_NE(text.find("e0 = 1.25\n"), std::string::npos);
    EXPECT_NE(text.find("version = "), std::string::npos);
    EXPECT_THROW(write_manifest(dir / "no" / "such" / "m.txt", m), IoError);
}

//============================================================================
// classify_sweep
//============================================================================
TEST(Sweep, EmptySweepHasHeaderOnly) {
    const fs::path dir = scratch("empty_sweep");
    const auto c = parse_config(std::string(small_grid_keys) + "init = ground\nT = 1\n");
    const auto res = classify_sweep(c);
    EXPECT_TRUE(res.rows.empty());
    write_sweep_csv(dir / "sweep.csv", res, config_echo(serialize(c)));
    const auto t = read_csv(dir / "sweep.csv");
    EXPECT_EQ(t.columns.size(), 10u);
    EXPECT_EQ(t.columns.front(), "index");
    EXPECT_TRUE(t.rows.empty());
    EXPECT_FALSE(t.comments.empty());
}

TEST(Sweep, LambdaTableAndDeterminismAcrossWorkers) {
    const fs::path dir = scratch("lambda_sweep");
    auto c = parse_config(std::string(small_grid_keys) + "init = ground\nT = 30\nlambda_values = 0.8,1.0,1.2\n");
    const auto one = classify_sweep(c);
    c.workers = 4;
    const auto four = classify_sweep(c);
    ASSERT_EQ(one.rows.size(), 6u);
    const char* expect[] = {"Dispersed", "Dispersed", "ConvergedToW", "ConvergedToW", "BlewUp", "BlewUp"};
    for (std::size_t i = 0; i < 6; ++i) {
        EXPECT_EQ(one.rows[i].index, i);
        EXPECT_TRUE(one.rows[i].error.empty()) << one.rows[i].error;
        EXPECT_EQ(one.rows[i].outcome.name(), expect[i]) << "row " << i;
    }
    EXPECT_LT(one.rows[4].t_blow, 0.0 + 5.0);
    EXPECT_GT(one.rows[4].t_blow, 0.0);
    EXPECT_NEAR(one.rows[5].t_blow, -one.rows[4].t_blow, 1e-12);
    write_sweep_csv(dir / "a.csv", one, {});
    write_sweep_csv(dir / "b.csv", four, {});
    EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
}

TEST(Sweep, RowErrorsDoNotAbort) {
    // T past the light cone for r_max = 100: every run is refused, each row says why
    const auto c = parse_config(std::string(small_grid_keys) + "init = ground\nT = 80\nlambda_values = 0.9,1.1\n");
    const auto res = classify_sweep(c);
    ASSERT_EQ(res.rows.size(), 4u);
    for (const auto& r : res.rows) EXPECT_FALSE(r.error.empty());
    const fs::path dir = scratch("error_sweep");
    write_sweep_csv(dir / "sweep.csv", res, {});
    const std::string body = csv_body(dir / "sweep.csv");
    EXPECT_NE(body.find(",Error,"), std::string::npos);
}

//============================================================================
// command line
//============================================================================
TEST(Cli, SpectrumWritesEigenfunction) {
    const fs::path dir = scratch("cli_spectrum");
    ASSERT_EQ(run_cli("spectrum --dim 3 --dr 0.02 --r-max 100 --out " + (dir / "eigen.csv").string()), 0);
    const auto t = read_csv(dir / "eigen.csv");
    EXPECT_EQ(t.columns, (std::vector<std::string>{"r", "Y"}));
    EXPECT_EQ(t.rows.size(), make_grid(3, 0.02, 100.0)->size());
    const auto meta = parse_meta(t.comments.front());
    EXPECT_NEAR(std::stod(meta.at("e0")), 1.1, 0.01);
    EXPECT_TRUE(fs::exists(dir / "eigen_manifest.txt"));
    // too coarse: the two eigensolvers disagree, a numerical failure
    EXPECT_EQ(run_cli("spectrum --dim 3 --dr 0.05 --r-max 100 --out " + (dir / "coarse.csv").string()), 2);
}

TEST(Cli, ConfigErrorsExitOne) {
    const fs::path dir = scratch("cli_errors");
    EXPECT_EQ(run_cli("spectrum --dim 6"), 1);
    EXPECT_EQ(run_cli("evolve --dim 3 --init ground"), 1);
    EXPECT_EQ(run_cli("nonsense"), 1);
    std::ofstream(dir / "bad.cfg") << "dim = 3\ninit = ground\nT = 1\nfoo = 1\n";
    EXPECT_EQ(run_cli("evolve --config " + (dir / "bad.cfg").string()), 1);
    EXPECT_EQ(run_cli("classify --config " + (dir / "missing.cfg").string()), 1);
}

TEST(Cli, EvolveBlowUpExitsThree) {
    const fs::path dir = scratch("cli_blowup");
    const std::string out = (dir / "run.csv").string();
    ASSERT_EQ(run_cli("evolve --dim 3 --dr 0.05 --r-max 100 --init scaled-w --lambda 1.2 --T 5 --out " + out), 3);
    const auto t = read_csv(out);
    EXPECT_EQ(t.columns, run_columns());
    EXPECT_FALSE(t.rows.empty());
    // config echo in the header
    EXPECT_NE(std::find(t.comments.begin(), t.comments.end(), "lambda = 1.2"), t.comments.end());
    const std::string manifest = slurp(dir / "run_manifest.txt");
    EXPECT_NE(manifest.find("outcome = BlewUp"), std::string::npos);
}

TEST(Cli, EvolveSnapshotsThenModulateAndDiagnose) {
    const fs::path dir = scratch("cli_pipeline");
    std::ofstream(dir / "run.cfg") << small_grid_keys << "init = ground\nT = 1\nsnapshot_dt = 0.1\noutput_dir = "
                                   << dir.string() << "\n";
    ASSERT_EQ(run_cli("evolve --config " + (dir / "run.cfg").string()), 0);
    ASSERT_TRUE(fs::exists(dir / "run.csv"));
    ASSERT_TRUE(fs::exists(dir / "snapshots.csv"));
    const std::string manifest = slurp(dir / "run_manifest.txt");
    EXPECT_NE(manifest.find("file = run.csv"), std::string::npos);
    EXPECT_NE(manifest.find("file = snapshots.csv"), std::string::npos);

    ASSERT_EQ(run_cli("diagnose --snapshots " + (dir / "snapshots.csv").string() + " --R 40"), 0);
    const auto v = read_csv(dir / "virial.csv");
    EXPECT_EQ(v.columns, (std::vector<std::string>{"t", "gR", "gR_fd", "main_terms", "exterior_density"}));
    EXPECT_EQ(v.rows.size(), 9u);
    for (const auto& r : v.rows) EXPECT_EQ(r[1], 0.0);

    ASSERT_EQ(run_cli("modulate --snapshots " + (dir / "snapshots.csv").string()), 0);
    const auto m = read_csv(dir / "modulation.csv");
    ASSERT_EQ(m.rows.size(), 11u);
    for (const auto& r : m.rows) EXPECT_NEAR(r[m.column("mu")], 1.0, 1e-8);
}

TEST(Cli, ClassifyIsDeterministic) {
    const fs::path dir = scratch("cli_classify");
    const fs::path cfg = dir / "sweep.cfg";
    std::ofstream(cfg) << small_grid_keys << "init = ground\nT = 30\nlambda_values = 0.8,1.2\noutput_dir = "
                       << (dir / "out").string() << "\n";
    ASSERT_EQ(run_cli("classify --config " + cfg.string()), 0);
    const std::string first = slurp(dir / "out" / "sweep.csv");
    ASSERT_EQ(run_cli("classify --workers 3 --config " + cfg.string()), 0);
    EXPECT_EQ(slurp(dir / "out" / "sweep.csv"), first);
    EXPECT_EQ(csv_body(dir / "out" / "sweep.csv").substr(0, 6), "index,");
    EXPECT_NE(first.find("Dispersed"), std::string::npos);
    EXPECT_NE(first.find("BlewUp"), std::string::npos);
    const std::string manifest = slurp(dir / "out" / "sweep_manifest.txt");
    EXPECT_NE(manifest.find("runs = 4"), std::string::npos);
    EXPECT_NE(manifest.find("file = sweep.csv"), std::string::npos);
}

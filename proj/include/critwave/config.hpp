#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "evolver.hpp"

namespace critwave {

//============================================================================
// key = value experiment description
//============================================================================
enum class InitKind { ground, series, scaled_w, file };

struct ExperimentConfig {
    int dim = 3;
    InitKind init = InitKind::ground;
    double T = 0.0;

    // initial data
    double a = 1.0;
    int k = 4;
    std::optional<double> t0;  // empty: 3/e0
    double lambda = 1.0;
    std::string file;
    Direction direction = Direction::forward;
    double perturb_amp = 0.0;
    unsigned long long seed = 0;

    // grid and solver
    double dr = 0.02;
    double r_max = 200.0;
    double cfl = 0.5;
    double blowup_factor = 20.0;
    double tol_d = 1e-3;
    long max_steps = 0;
    double sample_dt = 0.1;
    double snapshot_dt = 0.0;
    double local_radius = 5.0;
    double dispersal_fraction = 0.05;
    double g_radius = 5.0;
    double delta0 = 0.1;
    bool modulation = true;
    bool stop_on_outcome = false;
    double data_support = 20.0;
    Background background = Background::automatic;

    // diagnostics and sweeps
    std::vector<double> virial_radii{150.0};
    std::vector<double> a_values;
    std::vector<double> lambda_values;
    int workers = 1;
    std::string output_dir = ".";

    bool operator==(const ExperimentConfig&) const = default;

    SolverConfig solver() const {
        SolverConfig s;
        s.cfl = cfl;
        s.blowup_factor = blowup_factor;
        s.tol_d = tol_d;
        s.max_steps = max_steps;
        s.sample_dt = sample_dt;
        s.snapshot_dt = snapshot_dt;
        s.local_radius = local_radius;
        s.dispersal_fraction = dispersal_fraction;
        s.g_radius = g_radius;
        s.delta0 = delta0;
        s.modulation = modulation;
        s.stop_on_outcome = stop_on_outcome;
        s.data_support = data_support;
        s.background = background;
        return s;
    }
};

inline std::string init_name(InitKind k) {
    switch (k) {
    case InitKind::ground: return "ground";
    case InitKind::series: return "series";
    case InitKind::scaled_w: return "scaled-w";
    default: return "file";
    }
}

inline std::string direction_name(Direction d) { return d == Direction::forward ? "forward" : "backward"; }

inline std::string background_name(Background b) {
    switch (b) {
    case Background::ground: return "ground";
    case Background::zero: return "zero";
    default: return "auto";
    }
}

// shortest text that reads back to the same double
inline std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v, int line) {
    double x = 0.0;
    const char* first = v.data();
    const char* last = v.data() + v.size();
    const auto res = std::from_chars(first, last, x);
    if (res.ec != std::errc() || res.ptr != last || !std::isfinite(x))
        throw OutOfRange(key + ": '" + v + "' is not a finite number", line);
    return x;
}

inline long parse_long(const std::string& key, const std::string& v, int line) {
    long x = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), x);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw OutOfRange(key + ": '" + v + "' is not an integer", line);
    return x;
}

inline bool parse_bool(const std::string& key, const std::string& v, int line) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw OutOfRange(key + ": '" + v + "' is not a boolean", line);
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v, int line) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(parse_double(key, item, line));
    }
    return out;
}

inline std::string join(const std::vector<double>& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + format_double(xs[i]);
    return s;
}

inline void require(bool ok, const std::string& key, const std::string& why, int line) {
    if (!ok) throw OutOfRange(key + " " + why, line);
}

} // namespace detail

inline ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig c;
    std::map<std::string, int> seen;
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    using detail::parse_double, detail::parse_long, detail::parse_bool, detail::require;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const std::string body = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw ConfigError("expected 'key = value', got '" + body + "'", line);
        const std::string key = detail::trim(body.substr(0, eq));
        const std::string v = detail::trim(body.substr(eq + 1));
        if (seen.count(key)) throw ConfigError("duplicate key '" + key + "'", line);
        seen[key] = line;

        if (key == "dim") {
            const long n = parse_long(key, v, line);
            require(n >= 3 && n <= 5, key, "must be 3, 4 or 5", line);
            c.dim = static_cast<int>(n);
        } else if (key == "init") {
            if (v == "ground") c.init = InitKind::ground;
            else if (v == "series") c.init = InitKind::series;
            else if (v == "scaled-w") c.init = InitKind::scaled_w;
            else if (v == "file") c.init = InitKind::file;
            else throw OutOfRange("init must be ground, series, scaled-w or file", line);
        } else if (key == "T") {
            c.T = parse_double(key, v, line);
            require(c.T > 0.0, key, "must be positive", line);
        } else if (key == "a") {
            c.a = parse_double(key, v, line);
            require(std::abs(c.a) <= 2.0, key, "must satisfy |a| <= 2", line);
        } else if (key == "k") {
            const long k = parse_long(key, v, line);
            require(k >= 1 && k <= 6, key, "must lie in 1..6", line);
            c.k = static_cast<int>(k);
        } else if (key == "t0") {
            if (v == "auto") c.t0.reset();
            else c.t0 = parse_double(key, v, line);
        } else if (key == "lambda") {
            c.lambda = parse_double(key, v, line);
            require(c.lambda > 0.0, key, "must be positive", line);
        } else if (key == "file") {
            c.file = v;
        } else if (key == "direction") {
            if (v == "forward") c.direction = Direction::forward;
            else if (v == "backward") c.direction = Direction::backward;
            else throw OutOfRange("direction must be forward or backward", line);
        } else if (key == "perturb_amp") {
            c.perturb_amp = parse_double(key, v, line);
            require(c.perturb_amp >= 0.0, key, "must be non-negative", line);
        } else if (key == "seed") {
            const long s = parse_long(key, v, line);
            require(s >= 0, key, "must be non-negative", line);
            c.seed = static_cast<unsigned long long>(s);
        } else if (key == "dr") {
            c.dr = parse_double(key, v, line);
            require(c.dr > 0.0 && c.dr <= 0.05, key, "must lie in (0, 0.05]", line);
        } else if (key == "r_max") {
            c.r_max = parse_double(key, v, line);
            require(c.r_max > 0.0, key, "must be positive", line);
        } else if (key == "cfl") {
            c.cfl = parse_double(key, v, line);
            require(c.cfl > 0.0 && c.cfl <= 0.5, key, "must lie in (0, 0.5]", line);
        } else if (key == "blowup_factor") {
            c.blowup_factor = parse_double(key, v, line);
            require(c.blowup_factor > 1.0, key, "must exceed 1", line);
        } else if (key == "tol_d") {
            c.tol_d = parse_double(key, v, line);
            require(c.tol_d > 0.0, key, "must be positive", line);
        } else if (key == "max_steps") {
            c.max_steps = parse_long(key, v, line);
            require(c.max_steps >= 0, key, "must be non-negative", line);
        } else if (key == "sample_dt") {
            c.sample_dt = parse_double(key, v, line);
            require(c.sample_dt > 0.0, key, "must be positive", line);
        } else if (key == "snapshot_dt") {
            c.snapshot_dt = parse_double(key, v, line);
            require(c.snapshot_dt >= 0.0, key, "must be non-negative", line);
        } else if (key == "local_radius") {
            c.local_radius = parse_double(key, v, line);
            require(c.local_radius > 0.0, key, "must be positive", line);
        } else if (key == "dispersal_fraction") {
            c.dispersal_fraction = parse_double(key, v, line);
            require(c.dispersal_fraction > 0.0 && c.dispersal_fraction < 1.0, key, "must lie in (0, 1)", line);
        } else if (key == "g_radius") {
            c.g_radius = parse_double(key, v, line);
            require(c.g_radius > 0.0, key, "must be positive", line);
        } else if (key == "delta0") {
            c.delta0 = parse_double(key, v, line);
            require(c.delta0 > 0.0 && c.delta0 <= 1.0, key, "must lie in (0, 1]", line);
        } else if (key == "modulation") {
            c.modulation = parse_bool(key, v, line);
        } else if (key == "stop_on_outcome") {
            c.stop_on_outcome = parse_bool(key, v, line);
        } else if (key == "data_support") {
            c.data_support = parse_double(key, v, line);
            require(c.data_support >= 0.0, key, "must be non-negative", line);
        } else if (key == "background") {
            if (v == "auto") c.background = Background::automatic;
            else if (v == "ground") c.background = Background::ground;
            else if (v == "zero") c.background = Background::zero;
            else throw OutOfRange("background must be auto, ground or zero", line);
        } else if (key == "virial_radii") {
            c.virial_radii = detail::parse_list(key, v, line);
            for (double R : c.virial_radii) require(R > 0.0, key, "entries must be positive", line);
        } else if (key == "a_values") {
            c.a_values = detail::parse_list(key, v, line);
            for (double a : c.a_values) require(std::abs(a) <= 2.0, key, "entries must satisfy |a| <= 2", line);
        } else if (key == "lambda_values") {
            c.lambda_values = detail::parse_list(key, v, line);
            for (double l : c.lambda_values) require(l > 0.0, key, "entries must be positive", line);
        } else if (key == "workers") {
            const long w = parse_long(key, v, line);
            require(w >= 1 && w <= 64, key, "must lie in 1..64", line);
            c.workers = static_cast<int>(w);
        } else if (key == "output_dir") {
            c.output_dir = v;
        } else {
            throw UnknownKey("unknown key '" + key + "'", line);
        }
    }
    for (const char* req : {"dim", "init", "T"})
        if (!seen.count(req)) throw MissingRequired(std::string("missing required key '") + req + "'", 0);

    // cross-field checks
    const double r_min = 50.0 * std::sqrt(c.dim * (c.dim - 2.0));
    if (c.r_max < r_min) throw OutOfRange("r_max must be at least " + format_double(r_min), seen.count("r_max") ? seen["r_max"] : 0);
    if (c.init == InitKind::file && c.file.empty()) throw MissingRequired("init = file needs 'file'", seen["init"]);
    if (c.a_values.size() + c.lambda_values.size() > 64)
        throw OutOfRange("a sweep is limited to 64 data", seen.count("a_values") ? seen["a_values"] : seen["lambda_values"]);
    return c;
}

inline std::string serialize(const ExperimentConfig& c) {
    std::ostringstream o;
    o << "dim = " << c.dim << "\n";
    o << "init = " << init_name(c.init) << "\n";
    o << "T = " << format_double(c.T) << "\n";
    o << "a = " << format_double(c.a) << "\n";
    o << "k = " << c.k << "\n";
    o << "t0 = " << (c.t0 ? format_double(*c.t0) : "auto") << "\n";
    o << "lambda = " << format_double(c.lambda) << "\n";
    if (!c.file.empty()) o << "file = " << c.file << "\n";
    o << "direction = " << direction_name(c.direction) << "\n";
    o << "perturb_amp = " << format_double(c.perturb_amp) << "\n";
    o << "seed = " << c.seed << "\n";
    o << "dr = " << format_double(c.dr) << "\n";
    o << "r_max = " << format_double(c.r_max) << "\n";
    o << "cfl = " << format_double(c.cfl) << "\n";
    o << "blowup_factor = " << format_double(c.blowup_factor) << "\n";
    o << "tol_d = " << format_double(c.tol_d) << "\n";
    o << "max_steps = " << c.max_steps << "\n";
    o << "sample_dt = " << format_double(c.sample_dt) << "\n";
    o << "snapshot_dt = " << format_double(c.snapshot_dt) << "\n";
    o << "local_radius = " << format_double(c.local_radius) << "\n";
    o << "dispersal_fraction = " << format_double(c.dispersal_fraction) << "\n";
    o << "g_radius = " << format_double(c.g_radius) << "\n";
    o << "delta0 = " << format_double(c.delta0) << "\n";
    o << "modulation = " << (c.modulation ? "true" : "false") << "\n";
    o << "stop_on_outcome = " << (c.stop_on_outcome ? "true" : "false") << "\n";
    o << "data_support = " << format_double(c.data_support) << "\n";
    o << "background = " << background_name(c.background) << "\n";
    o << "virial_radii = " << detail::join(c.virial_radii) << "\n";
    if (!c.a_values.empty()) o << "a_values = " << detail::join(c.a_values) << "\n";
    if (!c.lambda_values.empty()) o << "lambda_values = " << detail::join(c.lambda_values) << "\n";
    o << "workers = " << c.workers << "\n";
    o << "output_dir = " << c.output_dir << "\n";
    return o.str();
}

} // namespace critwave

#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "config.hpp"

namespace critwave {

inline constexpr const char* version_string = "0.1.0";

//============================================================================
// CSV files: "# " comment lines (metadata, then the config echo), one header
// row, numeric rows at 17 significant digits.
//============================================================================
inline std::vector<std::string> config_echo(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        out.push_back(line.empty() ? "#" : "# " + line);
    }
    return out;
}

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& comments,
              const std::vector<std::string>& columns)
        : path_(path), out_(path) {
        if (!out_) throw IoError("cannot open " + path.string() + " for writing");
        for (const auto& c : comments) out_ << c << "\n";
        for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
        out_ << "\n";
        ncol_ = columns.size();
    }

    void row(const std::vector<double>& xs) {
        if (xs.size() != ncol_) throw IoError("row width does not match header in " + path_.string());
        for (std::size_t i = 0; i < xs.size(); ++i) out_ << (i ? "," : "") << format_double(xs[i]);
        out_ << "\n";
    }

    // mixed text/number rows (sweep tables)
    void raw_row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
        out_ << "\n";
    }

    void close() {
        out_.close();
        if (!out_) throw IoError("write failed for " + path_.string());
    }

private:
    std::filesystem::path path_;
    std::ofstream out_;
    std::size_t ncol_ = 0;
};

struct CsvTable {
    std::vector<std::string> comments;  // without the leading "# "
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return i;
        throw IoError("missing column '" + name + "'");
    }
    bool has(const std::string& name) const {
        for (const auto& c : columns)
            if (c == name) return true;
        return false;
    }
};

inline CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    CsvTable t;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            t.comments.push_back(line.size() > 2 ? line.substr(2) : "");
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(detail::trim(cell));
        if (t.columns.empty()) {
            t.columns = cells;
            continue;
        }
        if (cells.size() != t.columns.size())
            throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                          std::to_string(t.columns.size()) + " fields");
        std::vector<double> row(cells.size());
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const std::string& c = cells[i];
            if (c == "nan") row[i] = std::numeric_limits<double>::quiet_NaN();
            else if (c == "inf") row[i] = std::numeric_limits<double>::infinity();
            else if (c == "-inf") row[i] = -std::numeric_limits<double>::infinity();
            else {
                const auto res = std::from_chars(c.data(), c.data() + c.size(), row[i]);
                if (res.ec != std::errc() || res.ptr != c.data() + c.size())
                    throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + c + "'");
            }
        }
        t.rows.push_back(std::move(row));
    }
    if (t.columns.empty()) throw IoError(path.string() + " has no header row");
    return t;
}

// "key=value key=value" metadata comment
inline std::map<std::string, std::string> parse_meta(const std::string& comment) {
    std::map<std::string, std::string> out;
    std::stringstream ss(comment);
    std::string tok;
    while (ss >> tok) {
        const auto eq = tok.find('=');
        if (eq != std::string::npos) out[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    return out;
}

inline std::string grid_meta(const RadialGrid& g) {
    return "# dim=" + std::to_string(g.dim().value()) + " dr=" + format_double(g.dr()) +
           " r_max=" + format_double(g.r_max());
}

//============================================================================
// Writers for the library types
//============================================================================
inline void write_field_csv(const std::filesystem::path& path, const RadialField& f,
                            std::vector<std::string> comments = {}) {
    comments.insert(comments.begin(), grid_meta(*f.grid));
    CsvWriter w(path, comments, {"r", "value"});
    for (std::size_t i = 0; i < f.size(); ++i) w.row({f.grid->r(i), f[i]});
    w.close();
}

inline const std::vector<std::string>& run_columns() {
    static const std::vector<std::string> cols{"t", "E", "d", "dtu_l2", "sup_u", "local_energy",
                                               "y", "yprime", "g_R", "alpha", "mu"};
    return cols;
}

inline void write_run_csv(const std::filesystem::path& path, const TimeSeries& ts,
                          const std::vector<std::string>& comments) {
    CsvWriter w(path, comments, run_columns());
    for (const auto& s : ts.rows)
        w.row({s.t, s.E, s.d, s.dtu_l2, s.sup_u, s.local_energy, s.y, s.yprime, s.g_R, s.alpha, s.mu});
    w.close();
}

inline void write_snapshots_csv(const std::filesystem::path& path, const SnapshotSet& snaps,
                                std::vector<std::string> comments) {
    comments.insert(comments.begin(), grid_meta(*snaps.grid));
    CsvWriter w(path, comments, {"t", "r", "u", "v"});
    for (const auto& f : snaps.frames)
        for (std::size_t i = 0; i < f.u.size(); ++i) w.row({f.t, snaps.grid->r(i), f.u[i], f.v[i]});
    w.close();
}

inline GridPtr grid_from_meta(const CsvTable& t, const std::string& what) {
    for (const auto& c : t.comments) {
        const auto m = parse_meta(c);
        if (m.count("dim") && m.count("dr") && m.count("r_max"))
            return make_grid(std::stoi(m.at("dim")), std::stod(m.at("dr")), std::stod(m.at("r_max")));
    }
    throw IoError(what + " carries no '# dim= dr= r_max=' line");
}

inline SnapshotSet read_snapshots_csv(const std::filesystem::path& path) {
    const CsvTable t = read_csv(path);
    SnapshotSet s;
    s.grid = grid_from_meta(t, path.string());
    const std::size_t ct = t.column("t"), cu = t.column("u"), cv = t.column("v");
    const std::size_t n = s.grid->size();
    if (t.rows.size() % n != 0) throw IoError(path.string() + ": row count is not a whole number of frames");
    for (std::size_t k = 0; k < t.rows.size() / n; ++k) {
        Snapshot f;
        f.t = t.rows[k * n][ct];
        f.u.resize(n);
        f.v.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            f.u[i] = t.rows[k * n + i][cu];
            f.v[i] = t.rows[k * n + i][cv];
        }
        s.frames.push_back(std::move(f));
    }
    return s;
}

// Initial data from a file: columns r,u[,v] or r,value on the run grid.
inline std::pair<RadialField, RadialField> read_initial_data(const std::filesystem::path& path, const GridPtr& g) {
    const CsvTable t = read_csv(path);
    const std::size_t cr = t.column("r");
    const std::size_t cu = t.has("u") ? t.column("u") : t.column("value");
    if (t.rows.size() != g->size())
        throw IoError(path.string() + " has " + std::to_string(t.rows.size()) + " nodes, the grid has " +
                      std::to_string(g->size()));
    std::vector<double> u(g->size()), v(g->size(), 0.0);
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (std::abs(t.rows[i][cr] - g->r(i)) > 1e-9 * std::max(1.0, g->r(i)))
            throw IoError(path.string() + ": node " + std::to_string(i) + " is not on the run grid");
        u[i] = t.rows[i][cu];
        if (t.has("v")) v[i] = t.rows[i][t.column("v")];
    }
    return {RadialField(g, std::move(u)), RadialField(g, std::move(v))};
}

//============================================================================
// Manifest
//============================================================================
// FNV-1a over (N, M, dr bits)
inline std::string grid_hash(const RadialGrid& g) {
    std::uint64_t h = 1469598103934665603ULL;
    auto feed = [&](const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 1099511628211ULL;
        }
    };
    const std::int32_t n = g.dim().value();
    const std::uint64_t M = g.last();
    const double dr = g.dr();
    feed(&n, sizeof n);
    feed(&M, sizeof M);
    feed(&dr, sizeof dr);
    char buf[19];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

struct Manifest {
    std::string config_text;
    std::vector<std::string> grid_hashes;
    std::vector<std::string> files;
    std::vector<std::pair<std::string, std::string>> scalars;

    void add_file(const std::string& f) {
        for (const auto& x : files)
            if (x == f) return;
        files.push_back(f);
    }
    void add_scalar(const std::string& k, double v) { scalars.emplace_back(k, format_double(v)); }
    void add_scalar(const std::string& k, const std::string& v) { scalars.emplace_back(k, v); }
};

inline void write_manifest(const std::filesystem::path& path, const Manifest& m) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "# critwave manifest\n";
    for (const auto& c : config_echo(m.config_text)) out << c << "\n";
    out << "version = " << version_string << "\n";
    for (const auto& h : m.grid_hashes) out << "grid_hash = " << h << "\n";
    out << "files = " << m.files.size() << "\n";
    for (const auto& f : m.files) out << "file = " << f << "\n";
    for (const auto& [k, v] : m.scalars) out << k << " = " << v << "\n";
    out.close();
    if (!out) throw IoError("write failed for " + path.string());
}

} // namespace critwave

#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rot/dual_solver.hpp"
#include "rot/errors.hpp"
#include "rot/measures.hpp"
#include "rot/rate_harness.hpp"

namespace rot {

inline constexpr const char* kToolVersion = "rot 1.0.0";

/// Thrown when an artifact file is missing, malformed, or inconsistent with the run.
class ArtifactError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace io {

/// Shortest decimal form that reads back to the same double.
inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string fnv1a64(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Provenance block written as leading `# key: value` lines of every CSV artifact.
struct ArtifactHeader {
    std::string tool = kToolVersion;
    std::string config;  // effective config, compact JSON
    int d = 0;
    double p = 0.0;
    double epsilon = 0.0;
    std::size_t m = 0;
    std::map<std::string, std::string> extra;

    std::string config_hash() const { return "fnv1a64:" + fnv1a64(config); }
};

inline void write_header(std::ostream& os, const ArtifactHeader& h) {
    os << "# tool: " << h.tool << '\n'
       << "# config_hash: " << h.config_hash() << '\n'
       << "# d: " << h.d << '\n'
       << "# p: " << fmt(h.p) << '\n'
       << "# epsilon: " << fmt(h.epsilon) << '\n'
       << "# m: " << h.m << '\n';
    for (const auto& [k, v] : h.extra) os << "# " << k << ": " << v << '\n';
    os << "# config: " << h.config << '\n';
}

inline double parse_double(const std::string& s, const std::string& where) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) throw ArtifactError(where + ": cannot parse number '" + s + "'");
    return v;
}

/// Parsed CSV: header key/values, column names, numeric rows (text cells kept separately).
struct CsvTable {
    std::map<std::string, std::string> meta;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> cells;

    std::size_t column(const std::string& name) const {
        for (std::size_t k = 0; k < columns.size(); ++k)
            if (columns[k] == name) return k;
        throw ArtifactError("missing column '" + name + "'");
    }
};

inline std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(line);
    while (std::getline(is, cur, sep)) out.push_back(cur);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

inline CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ArtifactError("cannot open " + path.string());
    CsvTable t;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.rfind("# ", 0) == 0) {
            const auto colon = line.find(": ");
            if (colon != std::string::npos) t.meta[line.substr(2, colon - 2)] = line.substr(colon + 2);
            continue;
        }
        if (t.columns.empty()) {
            t.columns = split(line, ',');
            continue;
        }
        auto row = split(line, ',');
        if (row.size() != t.columns.size())
            throw ArtifactError(path.string() + ": row with " + std::to_string(row.size()) + " cells, expected " +
                                std::to_string(t.columns.size()));
        t.cells.push_back(std::move(row));
    }
    if (t.columns.empty()) throw ArtifactError(path.string() + ": no column header");
    return t;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw ArtifactError("cannot write " + path.string());
    return out;
}

inline std::string coord_columns(const std::string& prefix, int d) {
    std::string s;
    for (int a = 1; a <= d; ++a) s += (a > 1 ? "," : "") + prefix + std::to_string(a);
    return s;
}

// ---- measures ----

inline nlohmann::json domain_to_json(const Domain& dom) {
    nlohmann::json j{{"kind", to_string(dom.kind())}, {"dim", dom.dim()}};
    if (!dom.is_torus()) {
        j["lower"] = dom.lower();
        j["upper"] = dom.upper();
    }
    return j;
}

inline Domain domain_from_json(const nlohmann::json& j) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "torus") return Domain::torus(j.at("dim").get<int>());
    if (kind == "box") return Domain::box(j.at("lower").get<std::vector<double>>(), j.at("upper").get<std::vector<double>>());
    throw ArtifactError("unknown domain kind '" + kind + "'");
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
    auto p = csv;
    p += ".json";
    return p;
}

/// Writes `x_1..x_d,weight` rows plus a JSON sidecar (`<csv>.json`) holding domain, cell volume and grid layout.
inline void write_measure(const std::filesystem::path& csv, const DiscreteMeasure& m, const ArtifactHeader& h) {
    auto out = open_out(csv);
    write_header(out, h);
    const int d = m.dim();
    out << coord_columns("x_", d) << ",weight\n";
    for (std::size_t i = 0; i < m.size(); ++i) {
        for (int a = 0; a < d; ++a) out << fmt(m.point(i)[a]) << ',';
        out << fmt(m.weight(i)) << '\n';
    }
    nlohmann::json meta{{"domain", domain_to_json(m.domain())}};
    meta["cell_volume"] = m.cell_volume() ? nlohmann::json(*m.cell_volume()) : nlohmann::json(nullptr);
    if (m.grid()) {
        meta["grid"] = {{"resolution", m.grid()->resolution}, {"origin", m.grid()->origin}, {"step", m.grid()->step}};
    } else {
        meta["grid"] = nullptr;
    }
    auto side = open_out(sidecar_path(csv));
    side << meta.dump(2) << '\n';
}

inline DiscreteMeasure read_measure(const std::filesystem::path& csv) {
    const auto side_path = sidecar_path(csv);
    std::ifstream side(side_path);
    if (!side) throw ArtifactError("measure sidecar not found: " + side_path.string());
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(side);
    } catch (const nlohmann::json::exception& e) {
        throw ArtifactError(side_path.string() + ": " + e.what());
    }
    const auto dom = domain_from_json(meta.at("domain"));
    const auto t = read_csv(csv);
    const int d = dom.dim();
    std::vector<std::size_t> xcol;
    for (int a = 1; a <= d; ++a) xcol.push_back(t.column("x_" + std::to_string(a)));
    const auto wcol = t.column("weight");
    std::vector<double> coords, weights;
    for (std::size_t r = 0; r < t.cells.size(); ++r) {
        const auto where = csv.string() + " row " + std::to_string(r + 1);
        for (auto c : xcol) coords.push_back(parse_double(t.cells[r][c], where));
        weights.push_back(parse_double(t.cells[r][wcol], where));
    }
    std::optional<double> cell;
    if (meta.contains("cell_volume") && !meta["cell_volume"].is_null()) cell = meta["cell_volume"].get<double>();
    std::optional<GridInfo> grid;
    if (meta.contains("grid") && !meta["grid"].is_null()) {
        const auto& g = meta["grid"];
        grid = GridInfo{g.at("resolution").get<std::vector<int>>(), g.at("origin").get<std::vector<double>>(),
                        g.at("step").get<std::vector<double>>()};
    }
    return DiscreteMeasure(dom, std::move(coords), std::move(weights), cell, std::move(grid));
}

// ---- duals ----

inline void write_duals(const std::filesystem::path& csv, const DualPotentials& duals, const DiscreteMeasure& lambda,
                        const DiscreteMeasure& mu, const ArtifactHeader& h) {
    auto out = open_out(csv);
    auto hdr = h;
    hdr.extra["gauge"] = to_string(duals.gauge);
    write_header(out, hdr);
    const int d = lambda.dim();
    out << "marginal," << coord_columns("x_", d) << ",value\n";
    auto rows = [&](const char* name, const DiscreteMeasure& m, const std::vector<double>& v) {
        for (std::size_t i = 0; i < m.size(); ++i) {
            out << name;
            for (int a = 0; a < d; ++a) out << ',' << fmt(m.point(i)[a]);
            out << ',' << fmt(v[i]) << '\n';
        }
    };
    rows("lambda", lambda, duals.f);
    rows("mu", mu, duals.g);
}

struct DualsArtifact {
    std::map<std::string, std::string> meta;
    DualPotentials duals;
    std::vector<double> lambda_coords;
    std::vector<double> mu_coords;
};

inline DualsArtifact read_duals(const std::filesystem::path& csv, int d) {
    const auto t = read_csv(csv);
    DualsArtifact a;
    a.meta = t.meta;
    const auto mcol = t.column("marginal"), vcol = t.column("value");
    std::vector<std::size_t> xcol;
    for (int k = 1; k <= d; ++k) xcol.push_back(t.column("x_" + std::to_string(k)));
    for (std::size_t r = 0; r < t.cells.size(); ++r) {
        const auto where = csv.string() + " row " + std::to_string(r + 1);
        const auto& name = t.cells[r][mcol];
        auto& coords = name == "lambda" ? a.lambda_coords : a.mu_coords;
        auto& vals = name == "lambda" ? a.duals.f : a.duals.g;
        if (name != "lambda" && name != "mu") throw ArtifactError(where + ": marginal must be lambda or mu");
        for (auto c : xcol) coords.push_back(parse_double(t.cells[r][c], where));
        vals.push_back(parse_double(t.cells[r][vcol], where));
    }
    const auto g = t.meta.find("gauge");
    if (g != t.meta.end()) {
        if (g->second == "mean-zero-f") a.duals.gauge = Gauge::mean_zero_f;
        else if (g->second == "symmetric") a.duals.gauge = Gauge::symmetric;
        else a.duals.gauge = Gauge::none;
    }
    return a;
}

// ---- reports ----

inline void write_convergence(const std::filesystem::path& csv, const std::vector<ConvergenceReport>& reports,
                              const ArtifactHeader& h) {
    auto out = open_out(csv);
    write_header(out, h);
    out << "epsilon,p,iters,final_residual_rel,primal,dual,gap\n";
    for (const auto& r : reports)
        out << fmt(r.epsilon) << ',' << fmt(r.p) << ',' << r.iterations << ',' << fmt(r.final_residual_rel) << ','
            << fmt(r.primal) << ',' << fmt(r.dual) << ',' << fmt(r.gap) << '\n';
}

inline void write_sections(const std::filesystem::path& csv, const std::vector<SectionRow>& rows, int d,
                           const ArtifactHeader& h) {
    auto out = open_out(csv);
    write_header(out, h);
    out << coord_columns("center_", d) << ",diameter,volume_estimate,outer_ratio,inner_ratio,lambda_min,max_xi,members\n";
    for (const auto& r : rows) {
        for (int a = 0; a < d; ++a) out << fmt(r.center[a]) << ',';
        out << fmt(r.diameter) << ',' << fmt(r.volume_estimate) << ',' << fmt(r.outer_ratio) << ','
            << fmt(r.inner_ratio) << ',' << fmt(r.lambda_min) << ',' << fmt(r.max_xi) << ',' << r.members << '\n';
    }
}

/// Per-epsilon values with the discretization and solver diagnostics; one column per named series.
inline void write_sweep(const std::filesystem::path& csv, const SweepData& data, const std::string& quantity,
                        const std::vector<std::pair<std::string, std::vector<double>>>& series,
                        const ArtifactHeader& h) {
    auto out = open_out(csv);
    auto hdr = h;
    hdr.extra["quantity"] = quantity;
    write_header(out, hdr);
    out << "epsilon";
    for (const auto& [name, values] : series) out << ',' << name;
    out << ",h,n,resolution,iters,residual\n";
    for (std::size_t k = 0; k < data.points.size(); ++k) {
        const auto& pt = data.points[k];
        out << fmt(pt.epsilon);
        for (const auto& [name, values] : series) out << ',' << fmt(values[k]);
        out << ',' << fmt(pt.h) << ',' << pt.n << ',' << pt.resolution << ',' << pt.iterations << ','
            << fmt(pt.residual) << '\n';
    }
}

}  // namespace io
}  // namespace rot

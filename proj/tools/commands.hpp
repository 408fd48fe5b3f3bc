#pragma once

#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rot/dual_solver.hpp"
#include "rot/io.hpp"
#include "rot/measures.hpp"
#include "rot/plan.hpp"
#include "rot/rate_harness.hpp"
#include "rot/report.hpp"
#include "rot/torus_oracle.hpp"

namespace rot::cli {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode : int { ok = 0, config_error = 1, solver_error = 2, oracle_regime = 3, sweep_failed = 4 };

/// Invalid or inconsistent configuration; the message starts with the offending key path.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Typed, path-aware view of one config section. Unknown keys are rejected.
class Section {
public:
    Section(json j, std::string path, std::set<std::string> allowed) : j_(std::move(j)), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
        for (const auto& [k, v] : j_.items())
            if (!allowed.count(k)) throw ConfigError(key(k) + ": unknown key");
    }

    std::string key(const std::string& k) const { return path_ + "." + k; }
    bool has(const std::string& k) const { return j_.contains(k) && !j_[k].is_null(); }
    const json& raw() const { return j_; }

    double number(const std::string& k, std::optional<double> fallback = std::nullopt) const {
        if (!has(k)) return required(k, fallback);
        if (!j_[k].is_number()) throw ConfigError(key(k) + ": expected a number");
        const double v = j_[k].get<double>();
        if (!std::isfinite(v)) throw ConfigError(key(k) + ": must be finite");
        return v;
    }

    int integer(const std::string& k, std::optional<int> fallback = std::nullopt) const {
        if (!has(k)) return required(k, fallback);
        const auto& v = j_[k];
        if (v.is_number_integer()) return v.get<int>();
        if (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>()) return static_cast<int>(v.get<double>());
        throw ConfigError(key(k) + ": expected an integer");
    }

    std::string text(const std::string& k, std::optional<std::string> fallback = std::nullopt) const {
        if (!has(k)) return required(k, fallback);
        if (!j_[k].is_string()) throw ConfigError(key(k) + ": expected a string");
        return j_[k].get<std::string>();
    }

    bool flag(const std::string& k, bool fallback) const {
        if (!has(k)) return fallback;
        if (!j_[k].is_boolean()) throw ConfigError(key(k) + ": expected true or false");
        return j_[k].get<bool>();
    }

    std::vector<double> numbers(const std::string& k) const {
        const auto& v = j_.at(k);
        std::vector<double> out;
        if (v.is_number()) return {v.get<double>()};
        if (!v.is_array()) throw ConfigError(key(k) + ": expected a list of numbers");
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) throw ConfigError(key(k) + "[" + std::to_string(i) + "]: expected a number");
            out.push_back(v[i].get<double>());
        }
        return out;
    }

    std::vector<std::string> texts(const std::string& k) const {
        const auto& v = j_.at(k);
        if (v.is_string()) return v.get<std::string>().empty() ? std::vector<std::string>{} : std::vector{v.get<std::string>()};
        if (!v.is_array()) throw ConfigError(key(k) + ": expected a list of names");
        std::vector<std::string> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_string()) throw ConfigError(key(k) + "[" + std::to_string(i) + "]: expected a string");
            out.push_back(v[i].get<std::string>());
        }
        return out;
    }

private:
    template <class T>
    T required(const std::string& k, const std::optional<T>& fallback) const {
        if (!fallback) throw ConfigError(key(k) + ": required");
        return *fallback;
    }

    json j_;
    std::string path_;
};

// ---------------------------------------------------------------------------
// shared pieces
// ---------------------------------------------------------------------------

inline double checked_p(const Section& s) {
    const double p = s.number("p", 2.0);
    if (!(p > 1.0 && p <= 2.0)) {
        std::ostringstream msg;
        msg << s.key("p") << ": " << p << " is outside the allowed range (1,2]";
        throw ConfigError(msg.str());
    }
    return p;
}

inline double checked_eps(const Section& s, const std::string& k) {
    const double e = s.number(k);
    if (!(e > 0.0)) throw ConfigError(s.key(k) + ": must be positive");
    return e;
}

inline int checked_dim(const Section& s) {
    const int d = s.integer("d", 1);
    if (d < 1 || d > 3) throw ConfigError(s.key("d") + ": must be 1, 2 or 3");
    return d;
}

inline Gauge parse_gauge(const Section& s) {
    const auto g = s.text("gauge", "mean-zero-f");
    if (g == "mean-zero-f") return Gauge::mean_zero_f;
    if (g == "symmetric") return Gauge::symmetric;
    if (g == "none") return Gauge::none;
    throw ConfigError(s.key("gauge") + ": expected mean-zero-f, symmetric or none");
}

inline HessianMethod parse_hessian(const Section& s) {
    const auto h = s.text("hessian", "fd");
    if (h == "fd" || h == "finite-difference") return HessianMethod::finite_difference;
    if (h == "formula") return HessianMethod::formula;
    throw ConfigError(s.key("hessian") + ": expected fd or formula");
}

inline DiscreteMeasure load_measure(const Section& s, const std::string& k) {
    const auto path = s.text(k);
    try {
        return io::read_measure(path);
    } catch (const ArtifactError& e) {
        throw ConfigError(s.key(k) + ": " + e.what());
    } catch (const InvalidArgument& e) {
        throw ConfigError(s.key(k) + ": " + e.what());
    } catch (const json::exception& e) {
        throw ConfigError(s.key(k) + ": malformed sidecar: " + e.what());
    }
}

inline void write_text(const fs::path& path, const std::string& text) {
    auto out = io::open_out(path);
    out << text;
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

inline const std::set<std::string> kSolveKeys{"instance", "d", "m", "p", "eps", "perturbation", "lambda", "mu",
                                              "tol_residual", "max_outer_iters", "gauge", "threads", "out"};

struct SolveSetup {
    std::string instance;
    int d = 1;
    int m = 0;
    std::optional<RotProblem> problem;
    Gauge gauge = Gauge::mean_zero_f;
    fs::path out;
};

inline SolveSetup parse_solve(const Section& s) {
    SolveSetup st;
    st.instance = s.text("instance", "torus-self");
    const double p = checked_p(s);
    const double eps = checked_eps(s, "eps");
    SolverParams prm(eps, p);
    prm.tol_residual = s.number("tol_residual", 1e-10);
    if (!(prm.tol_residual > 0.0)) throw ConfigError(s.key("tol_residual") + ": must be positive");
    prm.max_outer_iters = s.integer("max_outer_iters", 10000);
    if (prm.max_outer_iters < 1) throw ConfigError(s.key("max_outer_iters") + ": must be >= 1");
    const int threads = s.integer("threads", 1);
    if (threads < 1) throw ConfigError(s.key("threads") + ": must be >= 1");
    prm.threads = static_cast<unsigned>(threads);
    st.gauge = parse_gauge(s);
    st.out = s.text("out", "rot_solve");

    if (st.instance == "csv") {
        auto lambda = load_measure(s, "lambda");
        auto mu = load_measure(s, "mu");
        if (lambda.domain() != mu.domain()) throw ConfigError(s.key("mu") + ": domain differs from lambda's");
        st.d = lambda.dim();
        st.m = lambda.grid() ? lambda.grid()->resolution[0] : static_cast<int>(lambda.size());
        auto kernel = CostKernel::for_domain(lambda.domain());
        st.problem.emplace(std::move(lambda), std::move(mu), std::move(kernel), prm);
        return st;
    }
    st.d = checked_dim(s);
    st.m = s.integer("m", 256);
    if (st.m < 2) throw ConfigError(s.key("m") + ": must be >= 2");
    const std::vector<int> res(st.d, st.m);
    if (st.instance == "torus-self") {
        const auto dom = Domain::torus(st.d);
        auto meas = uniform_grid_measure(dom, res);
        st.problem.emplace(meas, meas, CostKernel::for_domain(dom), prm);
    } else if (st.instance == "torus-perturbed") {
        const double a = s.number("perturbation", 0.2);
        if (!(std::abs(a) < 1.0)) throw ConfigError(s.key("perturbation") + ": |a| must be < 1");
        const auto dom = Domain::torus(st.d);
        auto meas = density_grid_measure(dom, res, [a](std::span<const double> x) {
            return 1.0 + a * std::cos(2.0 * std::numbers::pi * x[0]);
        });
        st.problem.emplace(meas, meas, CostKernel::for_domain(dom), prm);
    } else if (st.instance == "box-self") {
        const auto dom = Domain::unit_box(st.d);
        auto meas = uniform_grid_measure(dom, res);
        st.problem.emplace(meas, meas, CostKernel::for_domain(dom), prm);
    } else {
        throw ConfigError(s.key("instance") + ": expected torus-self, torus-perturbed, box-self or csv");
    }
    return st;
}

inline io::ArtifactHeader header_for(const json& effective, int d, double p, double eps, std::size_t m) {
    io::ArtifactHeader h;
    h.config = effective.dump();
    h.d = d;
    h.p = p;
    h.epsilon = eps;
    h.m = m;
    return h;
}

inline json report_json(const ConvergenceReport& r) {
    return {{"epsilon", r.epsilon},           {"p", r.p},         {"iterations", r.iterations},
            {"final_residual_rel", r.final_residual_rel},          {"primal", r.primal},
            {"dual", r.dual},                 {"gap", r.gap},     {"min_normalizer", r.min_normalizer},
            {"converged", r.converged}};
}

/// One row per lambda point: support size, peak slack, row mass and barycentric image.
inline void write_plan_summary(const fs::path& path, const PlanAnalysis& an, const io::ArtifactHeader& h) {
    const auto& pb = an.problem();
    const int d = pb.dim();
    auto out = io::open_out(path);
    io::write_header(out, h);
    out << io::coord_columns("x_", d) << ",support_size,max_xi,row_mass," << io::coord_columns("T_", d) << '\n';
    for (std::size_t i = 0; i < pb.lambda.size(); ++i) {
        const auto rho = an.density_row(i);
        std::size_t support = 0;
        double mass = 0.0;
        for (std::size_t j = 0; j < rho.size(); ++j) {
            if (rho[j] > 0.0) ++support;
            mass += rho[j] * pb.mu.weight(j);
        }
        for (int a = 0; a < d; ++a) out << io::fmt(pb.lambda.point(i)[a]) << ',';
        out << support << ',' << io::fmt(an.max_xi(i)) << ',' << io::fmt(mass);
        const auto t = support > 0 ? an.barycentric(i) : std::vector<double>(d, std::nan(""));
        for (int a = 0; a < d; ++a) out << ',' << io::fmt(t[a]);
        out << '\n';
    }
}

inline int cmd_solve(const json& effective, std::ostream& log) {
    const Section s(effective, "solve", kSolveKeys);
    const auto st = parse_solve(s);
    const auto& pb = *st.problem;
    const auto& prm = pb.params;
    const auto hdr = header_for(effective, st.d, prm.p(), prm.epsilon(), static_cast<std::size_t>(st.m));

    DualSolution sol;
    try {
        sol = solve_dual(pb, {.init = std::nullopt, .gauge = st.gauge});
    } catch (const NonConvergence& e) {
        auto out = io::open_out(st.out / "residual_trace.csv");
        io::write_header(out, hdr);
        out << "iteration,residual_rel\n";
        for (std::size_t k = 0; k < e.residual_trace().size(); ++k)
            out << k + 1 << ',' << io::fmt(e.residual_trace()[k]) << '\n';
        throw;
    }

    io::write_measure(st.out / "lambda.csv", pb.lambda, hdr);
    io::write_measure(st.out / "mu.csv", pb.mu, hdr);
    io::write_duals(st.out / "duals.csv", sol.duals, pb.lambda, pb.mu, hdr);
    io::write_convergence(st.out / "convergence.csv", {sol.report}, hdr);
    const PlanAnalysis an(pb, sol.duals);
    write_plan_summary(st.out / "plan_summary.csv", an, hdr);

    json run{{"tool", kToolVersion},
             {"config", effective},
             {"config_hash", hdr.config_hash()},
             {"d", st.d},
             {"p", prm.p()},
             {"epsilon", prm.epsilon()},
             {"m", st.m},
             {"instance", st.instance},
             {"kernel", to_string(pb.kernel.kind)},
             {"gauge", to_string(sol.duals.gauge)},
             {"report", report_json(sol.report)}};

    const auto& r = sol.report;
    log << "converged in " << r.iterations << " iterations, residual/kappa " << r.final_residual_rel << '\n'
        << "primal " << io::fmt(r.primal) << "  dual " << io::fmt(r.dual) << "  gap " << r.gap << '\n';

    if (st.instance == "torus-self") {
        const auto oracle = TorusSolution::make(st.d, prm.p(), prm.epsilon());
        auto sym = sol.duals;
        apply_gauge(sym, pb.lambda, pb.mu, Gauge::symmetric);
        double dev = 0.0;
        for (double v : sym.f) dev = std::max(dev, std::abs(v - oracle.c_eps));
        log << "oracle C_eps " << io::fmt(oracle.c_eps) << "  max|f - C_eps| (symmetric split) " << dev
            << (oracle.valid ? "" : "  [closed form not asserted: R_eps >= 1/2]") << '\n';
        run["oracle"] = {{"c_eps", oracle.c_eps}, {"r_eps", oracle.r_eps}, {"valid", oracle.valid},
                         {"max_abs_f_minus_c_eps", dev}};
    }
    write_text(st.out / "run.json", run.dump(2) + "\n");
    log << "artifacts in " << st.out.string() << '\n';
    return ok;
}

// ---------------------------------------------------------------------------
// oracle
// ---------------------------------------------------------------------------

inline const std::set<std::string> kOracleKeys{"d", "p", "eps", "out"};

inline int cmd_oracle(const json& effective, std::ostream& log) {
    const Section s(effective, "oracle", kOracleKeys);
    const int d = checked_dim(s);
    const double p = checked_p(s);
    if (!s.has("eps")) throw ConfigError(s.key("eps") + ": required");
    const auto eps = s.numbers("eps");
    if (eps.empty()) throw ConfigError(s.key("eps") + ": empty list");
    for (std::size_t k = 0; k < eps.size(); ++k)
        if (!(eps[k] > 0.0)) throw ConfigError(s.key("eps") + "[" + std::to_string(k) + "]: must be positive");

    std::ostringstream csv;
    csv << "epsilon,c_eps_closed_form,c_eps_quadrature,rel_diff,r_eps,valid\n";
    char line[256];
    std::snprintf(line, sizeof line, "%-12s %-22s %-22s %-10s %-12s %s\n", "epsilon", "C_eps(closed)", "C_eps(quad)",
                  "rel_diff", "R_eps", "valid");
    log << line;
    int valid_rows = 0;
    for (double e : eps) {
        const auto sol = TorusSolution::make(d, p, e);
        double quad = std::nan("");
        bool valid = sol.valid;
        try {
            quad = c_eps_quadrature(d, p, e);
        } catch (const OutOfRegime&) {
            valid = false;
        }
        const double rel = std::abs(quad - sol.c_eps) / sol.c_eps;
        valid_rows += valid ? 1 : 0;
        std::snprintf(line, sizeof line, "%-12.6g %-22.17g %-22.17g %-10.3g %-12.6g %s\n", e, sol.c_eps, quad, rel,
                      sol.r_eps, valid ? "yes" : "out-of-regime");
        log << line;
        csv << io::fmt(e) << ',' << io::fmt(sol.c_eps) << ',' << io::fmt(quad) << ',' << io::fmt(rel) << ','
            << io::fmt(sol.r_eps) << ',' << (valid ? 1 : 0) << '\n';
    }
    if (s.has("out")) {
        auto out = io::open_out(fs::path(s.text("out")) / "oracle.csv");
        io::write_header(out, header_for(effective, d, p, eps.back(), 0));
        out << csv.str();
    }
    return valid_rows == 0 ? oracle_regime : ok;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

inline const std::set<std::string> kSweepKeys{
    "instance",  "d",          "p",           "eps",           "eps_range",    "sweeps",        "radius_scale",
    "interior_margin", "resolution", "min_resolution", "max_points", "max_centers", "perturbation", "hessian",
    "warm_start", "sparsity_tolerance", "default_tolerance", "convexity_threshold", "sandwich_spread",
    "tol_residual", "max_outer_iters", "threads", "svg", "out", "lambda", "mu", "ot_value"};

inline const std::vector<std::string> kSweepNames{"sparsity", "max_xi",          "volume",        "map_rate",
                                                  "gap",      "strong_convexity", "ratio_sandwich"};

struct SweepSetup {
    SweepConfig config;
    std::vector<std::string> sweeps;
    Quantities quantities;
    bool svg = true;
    fs::path out;
};

inline SweepSetup parse_sweep(const Section& s) {
    SweepSetup st;
    auto& c = st.config;
    if (!s.has("sweeps")) throw ConfigError(s.key("sweeps") + ": required (any of sparsity, max_xi, volume, map_rate, gap, strong_convexity, ratio_sandwich)");
    st.sweeps = s.texts("sweeps");
    if (st.sweeps.empty()) throw ConfigError(s.key("sweeps") + ": empty sweep list");
    for (const auto& name : st.sweeps) {
        if (name == "sparsity") st.quantities.sparsity = true;
        else if (name == "max_xi") st.quantities.max_xi = true;
        else if (name == "volume") st.quantities.volume = true;
        else if (name == "map_rate") st.quantities.map_rate = true;
        else if (name == "gap") st.quantities.gap = true;
        else if (name == "strong_convexity") st.quantities.strong_convexity = true;
        else if (name == "ratio_sandwich") st.quantities.ratio_sandwich = true;
        else throw ConfigError(s.key("sweeps") + ": unknown sweep '" + name + "'");
    }

    const auto instance = s.text("instance", "torus-self");
    if (instance == "torus-self") c.instance = InstanceKind::torus_self;
    else if (instance == "torus-perturbed") c.instance = InstanceKind::torus_perturbed;
    else if (instance == "box-self") c.instance = InstanceKind::box_self;
    else if (instance == "csv") c.instance = InstanceKind::custom;
    else throw ConfigError(s.key("instance") + ": expected torus-self, torus-perturbed, box-self or csv");

    c.p = checked_p(s);
    if (c.instance == InstanceKind::custom) {
        auto lambda = load_measure(s, "lambda");
        auto mu = load_measure(s, "mu");
        if (lambda.domain() != mu.domain()) throw ConfigError(s.key("mu") + ": domain differs from lambda's");
        c.d = lambda.dim();
        std::optional<double> ot;
        if (s.has("ot_value")) ot = s.number("ot_value");
        auto kernel = CostKernel::for_domain(lambda.domain());
        c.custom = CustomInstance{std::move(lambda), std::move(mu), std::move(kernel), std::nullopt, ot};
    } else {
        c.d = checked_dim(s);
    }

    if (s.has("eps") && s.has("eps_range")) throw ConfigError(s.key("eps") + ": give either eps or eps_range, not both");
    if (s.has("eps")) {
        c.epsilon_list = s.numbers("eps");
    } else if (s.has("eps_range")) {
        const auto r = s.numbers("eps_range");
        if (r.size() != 3 || r[2] < 3 || std::floor(r[2]) != r[2])
            throw ConfigError(s.key("eps_range") + ": expected [first, last, count] with integer count >= 3");
        c.epsilon_list = log_spaced(r[0], r[1], static_cast<int>(r[2]));
    }

    c.radius_scale = s.number("radius_scale", c.radius_scale);
    c.interior_margin = s.number("interior_margin", c.interior_margin);
    if (s.has("resolution")) c.resolution_override = s.integer("resolution");
    c.min_resolution = s.integer("min_resolution", c.min_resolution);
    const int max_points = s.integer("max_points", static_cast<int>(c.max_points));
    if (max_points < 1) throw ConfigError(s.key("max_points") + ": must be >= 1");
    c.max_points = static_cast<std::size_t>(max_points);
    const int max_centers = s.integer("max_centers", static_cast<int>(c.max_centers));
    if (max_centers < 0) throw ConfigError(s.key("max_centers") + ": must be >= 0 (0 = all interior points)");
    c.max_centers = static_cast<std::size_t>(max_centers);
    c.perturbation = s.number("perturbation", c.perturbation);
    c.hessian_method = parse_hessian(s);
    c.warm_start = s.flag("warm_start", true);
    c.sparsity_tolerance = s.number("sparsity_tolerance", c.sparsity_tolerance);
    c.default_tolerance = s.number("default_tolerance", c.default_tolerance);
    c.convexity_threshold = s.number("convexity_threshold", c.convexity_threshold);
    c.sandwich_spread = s.number("sandwich_spread", c.sandwich_spread);
    c.tol_residual = s.number("tol_residual", c.tol_residual);
    c.max_outer_iters = s.integer("max_outer_iters", c.max_outer_iters);
    const int threads = s.integer("threads", 1);
    if (threads < 1) throw ConfigError(s.key("threads") + ": must be >= 1");
    c.threads = static_cast<unsigned>(threads);
    st.svg = s.flag("svg", true);
    st.out = s.text("out", "rot_sweep");

    if (st.quantities.gap && c.instance == InstanceKind::custom && !c.custom->ot_value)
        throw ConfigError(s.key("ot_value") + ": the gap sweep on a csv instance needs the unregularized OT value");
    try {
        c.validate();
    } catch (const InvalidArgument& e) {
        // validate() names its own sweep.* key
        throw ConfigError(e.what());
    }
    return st;
}

inline int cmd_sweep(const json& effective, std::ostream& log) {
    const Section s(effective, "sweep", kSweepKeys);
    const auto st = parse_sweep(s);
    const auto& c = st.config;
    const auto data = run_sweep(c, st.quantities);
    for (const auto& w : data.warnings) log << w << '\n';

    const auto& finest = data.points.back();
    auto hdr = header_for(effective, c.d, c.p, finest.epsilon, static_cast<std::size_t>(finest.resolution));
    hdr.extra["instance"] = to_string(c.instance);

    json results = json::array();
    bool all_pass = true;
    auto per_eps = [&](double SweepPoint::*field) {
        std::vector<double> v;
        for (const auto& pt : data.points) v.push_back(pt.*field);
        return v;
    };
    auto emit_fit = [&](const std::string& name, const RateFit& fit, double SweepPoint::*field) {
        io::write_sweep(st.out / ("sweep_" + name + ".csv"), data, name, {{"value", per_eps(field)}}, hdr);
        if (st.svg) write_text(st.out / ("plot_" + name + ".svg"), report::svg_loglog(fit, name + " vs epsilon"));
        results.push_back(report::to_json(fit));
        all_pass = all_pass && fit.pass;
        char line[256];
        if (fit.degenerate) {
            std::snprintf(line, sizeof line, "%-17s %s  %s\n", name.c_str(), fit.note.c_str(), fit.pass ? "pass" : "FAIL");
        } else {
            char target[96];
            if (fit.sidedness == Sidedness::two_sided)
                std::snprintf(target, sizeof target, "%.4f +- %.3f", fit.expected_slope, fit.tolerance);
            else
                std::snprintf(target, sizeof target, ">= %.4f (%.4f - %.3f)", fit.expected_slope - fit.tolerance,
                              fit.expected_slope, fit.tolerance);
            std::snprintf(line, sizeof line, "%-17s slope %.4f  expected %s  r2 %.5f  %s%s\n", name.c_str(), fit.slope,
                          target, fit.r_squared, fit.pass ? "pass" : "FAIL",
                          fit.note.empty() ? "" : ("  (" + fit.note + ")").c_str());
        }
        log << line;
    };

    for (const auto& name : st.sweeps) {
        if (name == "sparsity") emit_fit(name, fit_sparsity(data), &SweepPoint::diameter);
        else if (name == "max_xi") emit_fit(name, fit_max_xi(data), &SweepPoint::max_xi);
        else if (name == "volume") emit_fit(name, fit_volume(data), &SweepPoint::volume);
        else if (name == "map_rate") emit_fit(name, fit_map_rate(data), &SweepPoint::map_error);
        else if (name == "gap") emit_fit(name, fit_gap(data), &SweepPoint::gap_value);
        else if (name == "strong_convexity") {
            const auto r = check_strong_convexity(data);
            io::write_sweep(st.out / "sweep_strong_convexity.csv", data, name, {{"value", per_eps(&SweepPoint::min_lambda)}}, hdr);
            results.push_back(report::to_json(r));
            all_pass = all_pass && r.pass;
            log << "strong_convexity  min lambda_min " << r.minimum << " at eps " << r.worst_epsilon << "  threshold "
                << r.threshold << "  " << (r.pass ? "pass" : "FAIL") << '\n';
        } else if (name == "ratio_sandwich") {
            const auto r = check_ratio_sandwich(data);
            io::write_sweep(st.out / "sweep_ratio_sandwich.csv", data, name,
                            {{"min_inner_ratio", per_eps(&SweepPoint::min_inner_ratio)},
                             {"max_outer_ratio", per_eps(&SweepPoint::max_outer_ratio)}},
                            hdr);
            results.push_back(report::to_json(r));
            all_pass = all_pass && r.pass;
            log << "ratio_sandwich    spread " << r.spread << "  limit " << r.limit << "  eps0 proxy "
                << r.epsilon0_proxy << "  " << (r.pass ? "pass" : "FAIL") << '\n';
        }
    }
    if (st.quantities.needs_sections()) {
        for (std::size_t k = 0; k < data.points.size(); ++k) {
            auto h = hdr;
            h.epsilon = data.points[k].epsilon;
            h.m = static_cast<std::size_t>(data.points[k].resolution);
            io::write_sections(st.out / ("sections_eps" + std::to_string(k) + ".csv"), data.points[k].sections, c.d, h);
        }
    }

    std::vector<json> points;
    for (const auto& pt : data.points)
        points.push_back({{"epsilon", pt.epsilon}, {"h", pt.h}, {"n", pt.n}, {"resolution", pt.resolution},
                          {"iterations", pt.iterations}, {"residual", pt.residual}, {"gap", pt.gap}});
    const json summary{{"tool", kToolVersion},    {"config", effective}, {"config_hash", hdr.config_hash()},
                       {"results", results},      {"points", points},    {"warnings", data.warnings},
                       {"all_pass", all_pass}};
    write_text(st.out / "summary.json", summary.dump(2) + "\n");
    log << "artifacts in " << st.out.string() << '\n';
    return all_pass ? ok : sweep_failed;
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

inline const std::set<std::string> kAnalyzeKeys{"artifact", "p", "eps", "interior_margin", "max_centers",
                                                "hessian", "lambda_min", "detail", "out"};

inline int cmd_analyze(const json& effective, std::ostream& log) {
    const Section s(effective, "analyze", kAnalyzeKeys);
    const fs::path dir = s.text("artifact");
    json run;
    {
        std::ifstream in(dir / "run.json");
        if (!in) throw ArtifactError("analyze.artifact: no run.json in " + dir.string());
        try {
            run = json::parse(in);
        } catch (const json::exception& e) {
            throw ArtifactError("analyze.artifact: malformed run.json: " + std::string(e.what()));
        }
    }
    const double p = run.at("p").get<double>();
    const double eps = run.at("epsilon").get<double>();
    const int d = run.at("d").get<int>();
    if (s.has("p") && s.number("p") != p) {
        std::ostringstream msg;
        msg << s.key("p") << ": " << s.number("p") << " does not match the artifact's p = " << p;
        throw ConfigError(msg.str());
    }
    if (s.has("eps") && s.number("eps") != eps) {
        std::ostringstream msg;
        msg << s.key("eps") << ": " << s.number("eps") << " does not match the artifact's eps = " << eps;
        throw ConfigError(msg.str());
    }
    const double margin = s.number("interior_margin", 0.25);
    const int max_centers = s.integer("max_centers", 0);
    if (max_centers < 0) throw ConfigError(s.key("max_centers") + ": must be >= 0 (0 = all interior points)");
    const auto method = parse_hessian(s);
    const bool want_lambda = s.flag("lambda_min", true);
    const fs::path out = s.text("out", dir.string());

    auto lambda = io::read_measure(dir / "lambda.csv");
    auto mu = io::read_measure(dir / "mu.csv");
    const auto art = io::read_duals(dir / "duals.csv", d);
    if (art.duals.f.size() != lambda.size() || art.duals.g.size() != mu.size())
        throw ArtifactError("analyze.artifact: duals.csv does not match the stored marginals");
    if (!std::equal(art.lambda_coords.begin(), art.lambda_coords.end(), lambda.coords().begin()) ||
        !std::equal(art.mu_coords.begin(), art.mu_coords.end(), mu.coords().begin()))
        throw ArtifactError("analyze.artifact: duals.csv coordinates differ from the stored marginals");
    const auto kernel = CostKernel::for_domain(lambda.domain());
    const RotProblem pb(std::move(lambda), std::move(mu), kernel, SolverParams(eps, p));
    const PlanAnalysis an(pb, art.duals);

    const auto centers = analysis_centers(pb.lambda, margin, static_cast<std::size_t>(max_centers));
    if (centers.empty()) throw ConfigError(s.key("interior_margin") + ": no interior points at this margin");
    std::vector<SectionRow> rows;
    std::vector<double> diam;
    std::size_t refused = 0;
    for (std::size_t i : centers) {
        const auto sec = an.section(i);
        SectionRow row;
        row.center.assign(pb.lambda.point(i).begin(), pb.lambda.point(i).end());
        row.diameter = sec.diameter;
        row.volume_estimate = sec.volume_estimate;
        row.outer_ratio = sec.outer_ratio;
        row.inner_ratio = sec.inner_ratio;
        row.max_xi = an.max_xi(i);
        row.members = sec.member_indices.size();
        if (want_lambda) {
            try {
                row.lambda_min = an.strong_convexity_lambda_min(i, method);
            } catch (const DegenerateSection&) {
                ++refused;
            }
        }
        diam.push_back(row.diameter);
        rows.push_back(std::move(row));
    }
    const auto hdr = header_for(effective, d, p, eps, static_cast<std::size_t>(run.value("m", 0)));
    io::write_sections(out / "sections.csv", rows, d, hdr);
    log << rows.size() << " interior sections, median diameter " << io::fmt(median(diam)) << '\n';
    if (refused > 0)
        log << "lambda_min left empty at " << refused << " centres: section resolved by fewer than 5 grid steps\n";
    if (run.value("instance", "") == "torus-self") {
        const auto oracle = TorusSolution::make(d, p, eps);
        log << "oracle 2 R_eps " << io::fmt(2.0 * oracle.r_eps) << " (relative deviation of median diameter "
            << std::abs(median(diam) / (2.0 * oracle.r_eps) - 1.0) << ")\n";
    }

    if (s.has("detail")) {
        const int idx = s.integer("detail");
        if (idx < 0 || static_cast<std::size_t>(idx) >= pb.lambda.size())
            throw ConfigError(s.key("detail") + ": index outside 0.." + std::to_string(pb.lambda.size() - 1));
        const auto sec = an.section(static_cast<std::size_t>(idx));
        const auto xi = an.xi_row(static_cast<std::size_t>(idx));
        auto h = hdr;
        h.extra["center_index"] = std::to_string(idx);
        auto f = io::open_out(out / "section_detail.csv");
        io::write_header(f, h);
        f << "index," << io::coord_columns("y_", d) << ",xi,density\n";
        for (std::size_t j : sec.member_indices) {
            f << j;
            for (int a = 0; a < d; ++a) f << ',' << io::fmt(pb.mu.point(j)[a]);
            f << ',' << io::fmt(xi[j]) << ',' << io::fmt(pb.params.density_scale() * positive_power(xi[j], pb.params.q() - 1.0))
              << '\n';
        }
        log << "section of point " << idx << ": " << sec.member_indices.size() << " members\n";
    }
    log << "artifacts in " << out.string() << '\n';
    return ok;
}

}  // namespace rot::cli

// rot: solve, analyze and benchmark L^p-regularized optimal transport from the command line.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "commands.hpp"

namespace {

using nlohmann::json;
using namespace rot::cli;

struct FlagSpec {
    const char* flag;
    const char* key;
    const char* help;
};

const std::vector<FlagSpec> kSolveFlags{
    {"--instance", "instance", "torus-self | torus-perturbed | box-self | csv"},
    {"--d", "d", "dimension of built-in grids"},
    {"--m", "m", "grid points per axis"},
    {"--p", "p", "entropy exponent in (1,2]"},
    {"--eps", "eps", "regularization strength"},
    {"--perturbation", "perturbation", "torus-perturbed amplitude a in 1 + a cos(2 pi x_1)"},
    {"--lambda", "lambda", "first marginal CSV (instance csv)"},
    {"--mu", "mu", "second marginal CSV (instance csv)"},
    {"--tol-residual", "tol_residual", "stop when sup residual <= tol * kappa"},
    {"--max-outer-iters", "max_outer_iters", "Gauss-Seidel sweep budget"},
    {"--gauge", "gauge", "mean-zero-f | symmetric | none"},
    {"--threads", "threads", "worker threads"},
    {"--out", "out", "artifact directory"},
};

const std::vector<FlagSpec> kOracleFlags{
    {"--d", "d", "torus dimension"},
    {"--p", "p", "entropy exponent in (1,2]"},
    {"--eps", "eps", "comma-separated epsilon values"},
    {"--out", "out", "optional directory for oracle.csv"},
};

const std::vector<FlagSpec> kSweepFlags{
    {"--instance", "instance", "torus-self | torus-perturbed | box-self | csv"},
    {"--d", "d", "dimension"},
    {"--p", "p", "entropy exponent in (1,2]"},
    {"--eps", "eps", "comma-separated, strictly decreasing epsilon values"},
    {"--eps-range", "eps_range", "first,last,count (log-spaced)"},
    {"--sweeps", "sweeps", "comma-separated subset of sparsity,max_xi,volume,map_rate,gap,strong_convexity,ratio_sandwich"},
    {"--radius-scale", "radius_scale", "grid rule h <= radius_scale * eps^{1/(d(p-1)+2)} / 8"},
    {"--interior-margin", "interior_margin", "box interior margin as a fraction of the side"},
    {"--resolution", "resolution", "fixed grid points per axis (checked against the rule)"},
    {"--min-resolution", "min_resolution", "lower bound on grid points per axis"},
    {"--max-points", "max_points", "refuse grids with more points"},
    {"--max-centers", "max_centers", "section centres per epsilon (0 = all interior)"},
    {"--perturbation", "perturbation", "torus-perturbed amplitude"},
    {"--hessian", "hessian", "fd | formula"},
    {"--sparsity-tolerance", "sparsity_tolerance", "slope tolerance for sparsity"},
    {"--default-tolerance", "default_tolerance", "slope tolerance for the other rates"},
    {"--convexity-threshold", "convexity_threshold", "lower bound on lambda_min"},
    {"--sandwich-spread", "sandwich_spread", "bound on max outer / min inner ratio"},
    {"--tol-residual", "tol_residual", "solver tolerance relative to kappa"},
    {"--max-outer-iters", "max_outer_iters", "solver sweep budget"},
    {"--threads", "threads", "worker threads"},
    {"--lambda", "lambda", "first marginal CSV (instance csv)"},
    {"--mu", "mu", "second marginal CSV (instance csv)"},
    {"--ot-value", "ot_value", "unregularized OT value (gap sweep on csv instances)"},
    {"--out", "out", "artifact directory"},
};

const std::vector<FlagSpec> kAnalyzeFlags{
    {"--artifact", "artifact", "directory written by solve"},
    {"--p", "p", "expected p (must match the artifact)"},
    {"--eps", "eps", "expected epsilon (must match the artifact)"},
    {"--interior-margin", "interior_margin", "box interior margin"},
    {"--max-centers", "max_centers", "section centres (0 = all interior)"},
    {"--hessian", "hessian", "fd | formula"},
    {"--detail", "detail", "dump the section of this lambda index"},
    {"--out", "out", "output directory (default: the artifact directory)"},
};

const std::map<std::string, std::vector<std::string>> kListKeys{
    {"oracle", {"eps"}}, {"sweep", {"eps", "eps_range", "sweeps"}}};

json scalar_from_text(const std::string& text) {
    try {
        auto v = json::parse(text);
        if (v.is_primitive()) return v;
    } catch (const json::exception&) {
    }
    return text;
}

json value_from_text(const std::string& cmd, const std::string& key, const std::string& text) {
    const auto it = kListKeys.find(cmd);
    const bool list = it != kListKeys.end() && std::find(it->second.begin(), it->second.end(), key) != it->second.end();
    if (!list) return scalar_from_text(text);
    json arr = json::array();
    std::string item;
    std::istringstream is(text);
    while (std::getline(is, item, ','))
        if (!item.empty()) arr.push_back(scalar_from_text(item));
    return arr;
}

struct Command {
    CLI::App* app = nullptr;
    std::map<std::string, std::string> values;
    std::string config_path;
    std::vector<bool*> toggles;
};

json load_config(const std::string& path, const std::string& cmd) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config: " + path + " is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    if (j.contains(cmd)) {
        if (!j[cmd].is_object()) throw ConfigError(cmd + ": expected an object");
        return j[cmd];
    }
    return j;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"L^p-regularized optimal transport: dual solver, sparsity analysis and rate sweeps"};
    app.require_subcommand(1);
    app.set_version_flag("--version", rot::kToolVersion);

    std::map<std::string, Command> cmds;
    auto add = [&](const std::string& name, const std::string& help, const std::vector<FlagSpec>& flags) -> Command& {
        auto& c = cmds[name];
        c.app = app.add_subcommand(name, help);
        c.app->add_option("--config", c.config_path, "JSON config file; flags override its values");
        for (const auto& f : flags) c.app->add_option(f.flag, c.values[f.key], f.help);
        return c;
    };
    add("solve", "solve one instance and write duals, plan summary and convergence report", kSolveFlags);
    add("oracle", "tabulate the closed-form torus constant against quadrature", kOracleFlags);
    auto& sweep = add("sweep", "run epsilon sweeps and fit log-log rates", kSweepFlags);
    auto& analyze = add("analyze", "section report from a saved solve", kAnalyzeFlags);

    bool no_svg = false, no_warm = false, no_lambda = false;
    sweep.app->add_flag("--no-svg", no_svg, "skip SVG plots");
    sweep.app->add_flag("--no-warm-start", no_warm, "solve every epsilon from zero potentials");
    analyze.app->add_flag("--no-lambda-min", no_lambda, "skip Hessian eigenvalues");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : config_error;
    }

    for (auto& [name, c] : cmds) {
        if (!c.app->parsed()) continue;
        try {
            json effective = load_config(c.config_path, name);
            for (const auto& [key, text] : c.values) {
                const auto* opt = c.app->get_option_no_throw("--" + [&] {
                    std::string f = key;
                    std::replace(f.begin(), f.end(), '_', '-');
                    return f;
                }());
                if (opt && opt->count() > 0) effective[key] = value_from_text(name, key, text);
            }
            if (name == "sweep") {
                if (no_svg) effective["svg"] = false;
                if (no_warm) effective["warm_start"] = false;
            }
            if (name == "analyze" && no_lambda) effective["lambda_min"] = false;

            if (name == "solve") return cmd_solve(effective, std::cout);
            if (name == "oracle") return cmd_oracle(effective, std::cout);
            if (name == "sweep") return cmd_sweep(effective, std::cout);
            if (name == "analyze") return cmd_analyze(effective, std::cout);
        } catch (const ConfigError& e) {
            std::cerr << "config error: " << e.what() << '\n';
            return config_error;
        } catch (const rot::ArtifactError& e) {
            std::cerr << "artifact error: " << e.what() << '\n';
            return config_error;
        } catch (const rot::InvalidArgument& e) {
            std::cerr << "invalid input: " << e.what() << '\n';
            return config_error;
        } catch (const rot::NonConvergence& e) {
            std::cerr << "solver failure: " << e.what() << '\n';
            return solver_error;
        } catch (const rot::RootFindError& e) {
            std::cerr << "solver failure: " << e.what() << '\n';
            return solver_error;
        } catch (const rot::DegenerateSection& e) {
            std::cerr << "analysis failure: " << e.what() << '\n';
            return solver_error;
        } catch (const rot::UnsupportedMethod& e) {
            std::cerr << "unsupported: " << e.what() << '\n';
            return config_error;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return config_error;
        }
    }
    return config_error;
}

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rot/dual_solver.hpp"
#include "rot/errors.hpp"
#include "rot/measures.hpp"
#include "rot/plan.hpp"
#include "rot/torus_oracle.hpp"

namespace rot {

// ---------------------------------------------------------------------------
// log-log regression
// ---------------------------------------------------------------------------

enum class Sidedness { two_sided, at_least };

struct RateFit {
    std::string quantity;
    std::vector<double> epsilons;
    std::vector<double> values;
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double expected_slope = 0.0;
    double tolerance = 0.0;
    Sidedness sidedness = Sidedness::two_sided;
    bool degenerate = false;  // all values vanish; passes vacuously
    bool pass = false;
    std::string note;
};

inline bool slope_passes(double slope, double expected, double tolerance, Sidedness s) {
    return s == Sidedness::two_sided ? std::abs(slope - expected) <= tolerance : slope >= expected - tolerance;
}

/// Ordinary least squares of log(value) on log(eps).
inline RateFit fit_loglog(std::vector<double> epsilons, std::vector<double> values, double expected_slope,
                          double tolerance, Sidedness sidedness = Sidedness::two_sided, std::string quantity = {}) {
    if (epsilons.size() != values.size()) throw InvalidArgument("fit_loglog: epsilon and value lists differ in length");
    if (epsilons.size() < 3) throw InvalidArgument("fit_loglog: need at least 3 (epsilon, value) pairs");
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (!(epsilons[k] > 0.0) || !(values[k] > 0.0) || !std::isfinite(values[k])) {
            std::ostringstream msg;
            msg << "fit_loglog: non-positive data at epsilon = " << epsilons[k] << " (value " << values[k] << ")";
            throw InvalidArgument(msg.str());
        }
    }
    const auto n = static_cast<double>(values.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) {
        mx += std::log(epsilons[k]);
        my += std::log(values[k]);
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) {
        const double dx = std::log(epsilons[k]) - mx, dy = std::log(values[k]) - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (!(sxx > 0.0)) throw InvalidArgument("fit_loglog: epsilons must not all coincide");
    RateFit fit;
    fit.quantity = std::move(quantity);
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    const double ss_res = std::max(0.0, syy - fit.slope * sxy);
    fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
    fit.expected_slope = expected_slope;
    fit.tolerance = tolerance;
    fit.sidedness = sidedness;
    fit.pass = slope_passes(fit.slope, expected_slope, tolerance, sidedness);
    fit.epsilons = std::move(epsilons);
    fit.values = std::move(values);
    return fit;
}

inline std::vector<double> log_spaced(double first, double last, int count) {
    if (count < 2 || !(first > 0.0) || !(last > 0.0)) throw InvalidArgument("log_spaced: need count >= 2 and positive ends");
    std::vector<double> out(count);
    const double a = std::log(first), b = std::log(last);
    for (int k = 0; k < count; ++k) out[k] = std::exp(a + (b - a) * k / (count - 1));
    out.front() = first;
    out.back() = last;
    return out;
}

// ---------------------------------------------------------------------------
// sweep configuration and instances
// ---------------------------------------------------------------------------

enum class InstanceKind { torus_self, torus_perturbed, box_self, custom };

inline const char* to_string(InstanceKind k) {
    switch (k) {
        case InstanceKind::torus_self: return "torus-self";
        case InstanceKind::torus_perturbed: return "torus-perturbed";
        case InstanceKind::box_self: return "box-self";
        case InstanceKind::custom: return "custom";
    }
    return "?";
}

using ReferenceMap = std::function<std::vector<double>(std::span<const double>)>;

struct CustomInstance {
    DiscreteMeasure lambda;
    DiscreteMeasure mu;
    CostKernel kernel;
    std::optional<ReferenceMap> reference_map;
    std::optional<double> ot_value;
};

struct SweepConfig {
    int d = 1;
    double p = 2.0;
    std::vector<double> epsilon_list = log_spaced(1e-2, 1e-4, 15);
    double radius_scale = 1.0;
    double interior_margin = 0.25;
    InstanceKind instance = InstanceKind::torus_self;
    double perturbation = 0.2;                 // torus_perturbed: density 1 + a cos(2 pi x_1)
    std::optional<CustomInstance> custom;
    std::optional<int> resolution_override;    // fixed per-axis count; must satisfy the rule
    int min_resolution = 16;
    std::size_t max_points = 40000;
    std::size_t max_centers = 64;
    bool warm_start = true;

    double sparsity_tolerance = 0.05;
    double default_tolerance = 0.1;
    double convexity_threshold = 0.5;
    double sandwich_spread = 10.0;
    HessianMethod hessian_method = HessianMethod::finite_difference;

    double tol_residual = 1e-10;
    int max_outer_iters = 10000;
    unsigned threads = 1;

    double radius_exponent() const { return 1.0 / (d * (p - 1.0) + 2.0); }

    /// Largest admissible grid step at this epsilon.
    double max_step(double eps) const { return radius_scale * std::pow(eps, radius_exponent()) / 8.0; }

    void validate() const {
        if (d < 1) throw InvalidArgument("sweep.d: must be >= 1");
        if (!(p > 1.0 && p <= 2.0)) throw InvalidArgument("sweep.p: must lie in (1,2]");
        if (epsilon_list.size() < 3) throw InvalidArgument("sweep.epsilon_list: need at least 3 values");
        for (std::size_t k = 0; k < epsilon_list.size(); ++k) {
            if (!(epsilon_list[k] > 0.0)) throw InvalidArgument("sweep.epsilon_list: values must be positive");
            if (k > 0 && !(epsilon_list[k] < epsilon_list[k - 1]))
                throw InvalidArgument("sweep.epsilon_list: values must be strictly decreasing");
        }
        if (!(radius_scale > 0.0)) throw InvalidArgument("sweep.radius_scale: must be positive");
        if (instance == InstanceKind::custom && !custom) throw InvalidArgument("sweep.instance: custom requires measures");
        if (instance == InstanceKind::torus_perturbed && !(std::abs(perturbation) < 1.0))
            throw InvalidArgument("sweep.perturbation: |a| must be < 1 for a positive density");
    }
};

struct SweepInstance {
    RotProblem problem;
    int resolution = 0;  // per axis; 0 for custom clouds
    double spacing = 0.0;
    std::optional<ReferenceMap> reference_map;
    std::optional<double> ot_value;
    std::optional<TorusSolution> oracle;
};

inline ReferenceMap identity_map() {
    return [](std::span<const double> x) { return std::vector<double>(x.begin(), x.end()); };
}

/// Per-axis resolution demanded by the rule h <= radius_scale * eps^{1/(d(p-1)+2)} / 8.
inline int required_resolution(const SweepConfig& cfg, double eps, double side = 1.0) {
    return std::max(cfg.min_resolution, static_cast<int>(std::ceil(side / cfg.max_step(eps) - 1e-12)));
}

inline SweepInstance make_instance(const SweepConfig& cfg, double eps) {
    SolverParams prm(eps, cfg.p);
    prm.tol_residual = cfg.tol_residual;
    prm.max_outer_iters = cfg.max_outer_iters;
    prm.threads = cfg.threads;

    if (cfg.instance == InstanceKind::custom) {
        const auto& c = *cfg.custom;
        const double h = std::max(c.lambda.spacing(), c.mu.spacing());
        if (!(h > 0.0) || h > cfg.max_step(eps) * (1.0 + 1e-12)) {
            std::ostringstream msg;
            msg << "custom instance spacing " << h << " violates the resolution rule at eps = " << eps
                << " (need <= " << cfg.max_step(eps) << ")";
            throw InvalidArgument(msg.str());
        }
        return {RotProblem(c.lambda, c.mu, c.kernel, prm), 0, h, c.reference_map, c.ot_value, std::nullopt};
    }

    int m = required_resolution(cfg, eps);
    if (cfg.resolution_override) {
        if (1.0 / *cfg.resolution_override > cfg.max_step(eps) * (1.0 + 1e-12)) {
            std::ostringstream msg;
            msg << "grid resolution " << *cfg.resolution_override << " violates the resolution rule at eps = " << eps
                << " (need >= " << required_resolution(cfg, eps) << " per axis)";
            throw InvalidArgument(msg.str());
        }
        m = *cfg.resolution_override;
    }
    const double n = std::pow(static_cast<double>(m), cfg.d);
    if (n > static_cast<double>(cfg.max_points)) {
        std::ostringstream msg;
        msg << "resolution rule needs " << m << "^" << cfg.d << " points at eps = " << eps << ", above max_points "
            << cfg.max_points;
        throw InvalidArgument(msg.str());
    }
    const std::vector<int> res(cfg.d, m);
    switch (cfg.instance) {
        case InstanceKind::torus_self: {
            const auto dom = Domain::torus(cfg.d);
            auto meas = uniform_grid_measure(dom, res);
            auto oracle = TorusSolution::make(cfg.d, cfg.p, eps);
            return {RotProblem(meas, meas, CostKernel::for_domain(dom), prm), m, 1.0 / m, identity_map(), 0.0,
                    oracle.valid ? std::optional(oracle) : std::nullopt};
        }
        case InstanceKind::torus_perturbed: {
            const auto dom = Domain::torus(cfg.d);
            const double a = cfg.perturbation;
            auto meas = density_grid_measure(dom, res, [a](std::span<const double> x) {
                return 1.0 + a * std::cos(2.0 * std::numbers::pi * x[0]);
            });
            return {RotProblem(meas, meas, CostKernel::for_domain(dom), prm), m, 1.0 / m, identity_map(), 0.0,
                    std::nullopt};
        }
        case InstanceKind::box_self: {
            const auto dom = Domain::unit_box(cfg.d);
            auto meas = uniform_grid_measure(dom, res);
            return {RotProblem(meas, meas, CostKernel::for_domain(dom), prm), m, 1.0 / m, identity_map(), 0.0,
                    std::nullopt};
        }
        case InstanceKind::custom: break;
    }
    throw InvalidArgument("unknown instance kind");
}

/// Multilinear interpolation of a grid function onto another grid of the same domain.
inline std::vector<double> transfer_potential(const DiscreteMeasure& from, std::span<const double> values,
                                              const DiscreteMeasure& to) {
    if (!from.grid() || from.domain() != to.domain()) throw InvalidArgument("transfer_potential: needs a source grid");
    const auto& g = *from.grid();
    const int d = from.dim();
    const bool periodic = from.domain().is_torus();
    std::vector<double> out(to.size());
    std::vector<int> base(d);
    std::vector<double> frac(d);
    for (std::size_t i = 0; i < to.size(); ++i) {
        const auto x = to.point(i);
        for (int a = 0; a < d; ++a) {
            double s = (x[a] - g.origin[a]) / g.step[a];
            if (!periodic) s = std::clamp(s, 0.0, static_cast<double>(g.resolution[a] - 1));
            double fl = std::floor(s);
            if (!periodic && fl >= g.resolution[a] - 1) fl = g.resolution[a] - 2;
            base[a] = static_cast<int>(fl);
            frac[a] = s - fl;
        }
        double acc = 0.0;
        for (int corner = 0; corner < (1 << d); ++corner) {
            double w = 1.0;
            std::size_t idx = 0;
            for (int a = 0; a < d; ++a) {
                const int bit = (corner >> a) & 1;
                w *= bit ? frac[a] : 1.0 - frac[a];
                int k = base[a] + bit;
                if (periodic) k = ((k % g.resolution[a]) + g.resolution[a]) % g.resolution[a];
                idx += static_cast<std::size_t>(k) * g.stride(a);
            }
            acc += w * values[idx];
        }
        out[i] = acc;
    }
    return out;
}

// ---------------------------------------------------------------------------
// sweep execution
// ---------------------------------------------------------------------------

struct Quantities {
    bool sparsity = false;
    bool max_xi = false;
    bool volume = false;
    bool map_rate = false;
    bool gap = false;
    bool strong_convexity = false;
    bool ratio_sandwich = false;

    static Quantities all() { return {true, true, true, true, true, true, true}; }
    bool needs_sections() const { return sparsity || max_xi || volume || ratio_sandwich || strong_convexity; }
};

struct SectionRow {
    std::vector<double> center;
    double diameter = 0.0;
    double volume_estimate = 0.0;
    double outer_ratio = 0.0;
    double inner_ratio = 0.0;
    double lambda_min = std::numeric_limits<double>::quiet_NaN();
    double max_xi = 0.0;
    std::size_t members = 0;
};

struct SweepPoint {
    double epsilon = 0.0;
    double h = 0.0;
    int resolution = 0;
    std::size_t n = 0;
    int iterations = 0;
    double residual = 0.0;
    double primal = 0.0;
    double dual = 0.0;
    double gap = 0.0;

    double diameter = 0.0;   // median over centres
    double volume = 0.0;     // median
    double max_xi = 0.0;     // median
    double min_inner_ratio = 0.0;
    double max_outer_ratio = 0.0;
    double min_lambda = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> min_lambda_at;
    double map_error = std::numeric_limits<double>::quiet_NaN();
    double gap_value = std::numeric_limits<double>::quiet_NaN();

    std::optional<TorusSolution> oracle;
    std::vector<SectionRow> sections;
};

struct SweepData {
    SweepConfig config;
    Quantities quantities;
    std::vector<SweepPoint> points;
    bool reference_extrapolated = false;
    std::vector<std::string> warnings;
};

inline double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    const auto mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double upper = v[mid];
    if (v.size() % 2 == 1) return upper;
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

/// Interior lambda indices, thinned to at most `max_centers` evenly strided entries.
inline std::vector<std::size_t> analysis_centers(const DiscreteMeasure& lambda, double margin, std::size_t max_centers) {
    std::vector<std::size_t> interior;
    for (std::size_t i = 0; i < lambda.size(); ++i)
        if (is_interior(lambda.point(i), lambda.domain(), margin)) interior.push_back(i);
    if (max_centers == 0 || interior.size() <= max_centers) return interior;
    std::vector<std::size_t> picked;
    for (std::size_t k = 0; k < max_centers; ++k) picked.push_back(interior[k * interior.size() / max_centers]);
    return picked;
}

/// L2(K0, lambda) distance between grad phi_eps and a reference map.
inline double map_error(const PlanAnalysis& plan, const std::function<std::vector<double>(std::size_t)>& reference,
                        double margin) {
    const auto& lambda = plan.problem().lambda;
    double acc = 0.0;
    for (std::size_t i = 0; i < lambda.size(); ++i) {
        if (!is_interior(lambda.point(i), lambda.domain(), margin)) continue;
        const auto grad = plan.grad_phi(i);
        const auto ref = reference(i);
        acc += squared_distance(grad, ref, plan.periodic()) * lambda.weight(i);
    }
    return std::sqrt(acc);
}

/// Solves and analyses every epsilon of the sweep, in decreasing order.
inline SweepData run_sweep(const SweepConfig& cfg, const Quantities& what) {
    cfg.validate();
    SweepData data{cfg, what, {}, false, {}};

    std::optional<SweepInstance> previous;
    std::optional<DualPotentials> previous_duals;
    std::vector<std::vector<double>> custom_gradients;  // for reference-extrapolated map rates

    const bool needs_reference_extrapolation =
        what.map_rate && cfg.instance == InstanceKind::custom && !cfg.custom->reference_map;
    if (needs_reference_extrapolation) {
        data.reference_extrapolated = true;
        data.warnings.push_back(
            "warning: no reference map for the custom instance; map_rate uses the smallest-epsilon gradient as a "
            "reference-extrapolated target");
    }

    for (double eps : cfg.epsilon_list) {
        auto inst = make_instance(cfg, eps);
        const auto& pb = inst.problem;
        SolveOptions opts;
        if (cfg.warm_start && previous && previous_duals) {
            const auto& old = previous->problem;
            DualPotentials init;
            if (old.lambda.size() == pb.lambda.size() && old.lambda.grid() == pb.lambda.grid()) {
                init = *previous_duals;
            } else if (old.lambda.grid() && old.mu.grid()) {
                init.f = transfer_potential(old.lambda, previous_duals->f, pb.lambda);
                init.g = transfer_potential(old.mu, previous_duals->g, pb.mu);
            }
            if (init.f.size() == pb.lambda.size()) opts.init = init;
        }
        DualSolution sol;
        try {
            sol = solve_dual(pb, opts);
        } catch (const NonConvergence& e) {
            std::ostringstream msg;
            msg << "at eps = " << eps << ": " << e.what();
            throw NonConvergence(msg.str(), e.residual_trace());
        }

        SweepPoint pt;
        pt.epsilon = eps;
        pt.h = inst.spacing;
        pt.resolution = inst.resolution;
        pt.n = pb.lambda.size();
        pt.iterations = sol.report.iterations;
        pt.residual = sol.report.final_residual_rel;
        pt.primal = sol.report.primal;
        pt.dual = sol.report.dual;
        pt.gap = sol.report.gap;
        pt.oracle = inst.oracle;

        const PlanAnalysis plan(pb, sol.duals);
        if (what.needs_sections()) {
            const auto centers = analysis_centers(pb.lambda, cfg.interior_margin, cfg.max_centers);
            if (centers.empty()) throw InvalidArgument("sweep: no interior points at this interior margin");
            std::vector<double> diam, vol, mx;
            pt.min_inner_ratio = std::numeric_limits<double>::infinity();
            pt.max_outer_ratio = 0.0;
            pt.min_lambda = std::numeric_limits<double>::infinity();
            for (std::size_t i : centers) {
                const auto sec = plan.section(i);
                SectionRow row;
                row.center.assign(pb.lambda.point(i).begin(), pb.lambda.point(i).end());
                row.diameter = sec.diameter;
                row.volume_estimate = sec.volume_estimate;
                row.outer_ratio = sec.outer_ratio;
                row.inner_ratio = sec.inner_ratio;
                row.max_xi = plan.max_xi(i);
                row.members = sec.member_indices.size();
                if (what.strong_convexity) {
                    row.lambda_min = plan.strong_convexity_lambda_min(i, cfg.hessian_method);
                    if (row.lambda_min < pt.min_lambda) {
                        pt.min_lambda = row.lambda_min;
                        pt.min_lambda_at = row.center;
                    }
                }
                diam.push_back(row.diameter);
                vol.push_back(row.volume_estimate);
                mx.push_back(row.max_xi);
                pt.min_inner_ratio = std::min(pt.min_inner_ratio, row.inner_ratio);
                pt.max_outer_ratio = std::max(pt.max_outer_ratio, row.outer_ratio);
                pt.sections.push_back(std::move(row));
            }
            pt.diameter = median(diam);
            pt.volume = median(vol);
            pt.max_xi = median(mx);
        }
        if (what.map_rate) {
            if (inst.reference_map) {
                const auto& ref = *inst.reference_map;
                pt.map_error = map_error(plan, [&](std::size_t i) { return ref(pb.lambda.point(i)); },
                                         cfg.interior_margin);
            } else {
                std::vector<double> flat;
                for (std::size_t i = 0; i < pb.lambda.size(); ++i) {
                    const auto gr = plan.grad_phi(i);
                    flat.insert(flat.end(), gr.begin(), gr.end());
                }
                custom_gradients.push_back(std::move(flat));
            }
        }
        if (what.gap) {
            if (!inst.ot_value) throw InvalidArgument("gap sweep needs the unregularized OT value of the instance");
            pt.gap_value = pt.primal - entropy_baseline(pb.params) - *inst.ot_value;
        }
        data.points.push_back(std::move(pt));
        previous_duals = std::move(sol.duals);
        previous.emplace(std::move(inst));
    }

    if (needs_reference_extrapolation && !custom_gradients.empty()) {
        const auto& ref = custom_gradients.back();
        const auto& lambda = cfg.custom->lambda;
        const auto d = static_cast<std::size_t>(lambda.dim());
        const bool periodic = cfg.custom->kernel.periodic();
        for (std::size_t k = 0; k + 1 < data.points.size(); ++k) {
            double acc = 0.0;
            for (std::size_t i = 0; i < lambda.size(); ++i) {
                if (!is_interior(lambda.point(i), lambda.domain(), cfg.interior_margin)) continue;
                const std::span<const double> a(custom_gradients[k].data() + i * d, d), b(ref.data() + i * d, d);
                acc += squared_distance(a, b, periodic) * lambda.weight(i);
            }
            data.points[k].map_error = std::sqrt(acc);
        }
    }
    return data;
}

// ---------------------------------------------------------------------------
// per-quantity fits and reports
// ---------------------------------------------------------------------------

inline RateFit fit_quantity(const SweepData& data, const std::string& name, double SweepPoint::*field, double expected,
                            double tolerance, Sidedness s) {
    std::vector<double> eps, vals;
    for (const auto& pt : data.points) {
        if (std::isnan(pt.*field)) continue;
        eps.push_back(pt.epsilon);
        vals.push_back(pt.*field);
    }
    return fit_loglog(std::move(eps), std::move(vals), expected, tolerance, s, name);
}

inline RateFit fit_sparsity(const SweepData& data) {
    const auto& c = data.config;
    return fit_quantity(data, "sparsity", &SweepPoint::diameter, c.radius_exponent(), c.sparsity_tolerance,
                        Sidedness::two_sided);
}

inline RateFit fit_max_xi(const SweepData& data) {
    const auto& c = data.config;
    const double tol = c.instance == InstanceKind::torus_self ? c.sparsity_tolerance : c.default_tolerance;
    return fit_quantity(data, "max_xi", &SweepPoint::max_xi, 2.0 * c.radius_exponent(), tol, Sidedness::two_sided);
}

inline RateFit fit_volume(const SweepData& data) {
    const auto& c = data.config;
    const double tol = c.instance == InstanceKind::torus_self ? c.sparsity_tolerance : c.default_tolerance;
    return fit_quantity(data, "volume", &SweepPoint::volume, c.d * c.radius_exponent(), tol, Sidedness::two_sided);
}

inline RateFit fit_map_rate(const SweepData& data) {
    const auto& c = data.config;
    std::vector<double> eps, vals;
    for (const auto& pt : data.points) {
        if (std::isnan(pt.map_error)) continue;
        eps.push_back(pt.epsilon);
        vals.push_back(pt.map_error);
    }
    const double top = vals.empty() ? 0.0 : *std::max_element(vals.begin(), vals.end());
    if (top <= 1e-10) {
        RateFit fit;
        fit.quantity = "map_rate";
        fit.epsilons = std::move(eps);
        fit.values = std::move(vals);
        fit.expected_slope = c.radius_exponent();
        fit.tolerance = c.default_tolerance;
        fit.sidedness = Sidedness::at_least;
        fit.degenerate = true;
        fit.pass = true;
        fit.note = "degenerate: gradient matches the reference map at every epsilon";
        return fit;
    }
    auto fit = fit_loglog(std::move(eps), std::move(vals), c.radius_exponent(), c.default_tolerance,
                          Sidedness::at_least, "map_rate");
    if (data.reference_extrapolated) fit.note = "reference-extrapolated";
    return fit;
}

inline RateFit fit_gap(const SweepData& data) {
    const auto& c = data.config;
    return fit_quantity(data, "gap", &SweepPoint::gap_value, 2.0 * c.radius_exponent(), c.default_tolerance,
                        Sidedness::at_least);
}

struct ConvexityReport {
    std::vector<double> epsilons;
    std::vector<double> values;  // min lambda_min over interior centres, per eps
    double minimum = 0.0;
    double threshold = 0.0;
    double worst_epsilon = 0.0;
    std::vector<double> worst_point;
    bool pass = false;
};

inline ConvexityReport check_strong_convexity(const SweepData& data) {
    ConvexityReport r;
    r.threshold = data.config.convexity_threshold;
    r.minimum = std::numeric_limits<double>::infinity();
    for (const auto& pt : data.points) {
        r.epsilons.push_back(pt.epsilon);
        r.values.push_back(pt.min_lambda);
        if (pt.min_lambda < r.minimum || std::isnan(pt.min_lambda)) {
            r.minimum = pt.min_lambda;
            r.worst_epsilon = pt.epsilon;
            r.worst_point = pt.min_lambda_at;
        }
    }
    r.pass = !r.values.empty() && r.minimum >= r.threshold;
    return r;
}

struct SandwichReport {
    std::vector<double> epsilons;
    std::vector<double> min_inner;
    std::vector<double> max_outer;
    /// Largest sweep epsilon below which every inner ratio is positive; 0 if none.
    double epsilon0_proxy = 0.0;
    double spread = std::numeric_limits<double>::infinity();
    double limit = 10.0;
    bool pass = false;
};

inline SandwichReport check_ratio_sandwich(const SweepData& data) {
    SandwichReport r;
    r.limit = data.config.sandwich_spread;
    for (const auto& pt : data.points) {
        r.epsilons.push_back(pt.epsilon);
        r.min_inner.push_back(pt.min_inner_ratio);
        r.max_outer.push_back(pt.max_outer_ratio);
    }
    // points are in decreasing epsilon: walk from the smallest upwards
    double inner = std::numeric_limits<double>::infinity(), outer = 0.0;
    for (std::size_t k = r.epsilons.size(); k-- > 0;) {
        if (!(r.min_inner[k] > 0.0)) break;
        r.epsilon0_proxy = r.epsilons[k];
        inner = std::min(inner, r.min_inner[k]);
        outer = std::max(outer, r.max_outer[k]);
    }
    if (r.epsilon0_proxy > 0.0) {
        r.spread = outer / inner;
        r.pass = r.spread <= r.limit;
    }
    return r;
}

/// Whether values are nonincreasing as epsilon decreases, allowing a relative slack.
inline bool nonincreasing_in_decreasing_epsilon(const std::vector<double>& values_by_decreasing_eps, double slack) {
    for (std::size_t k = 1; k < values_by_decreasing_eps.size(); ++k)
        if (values_by_decreasing_eps[k] > values_by_decreasing_eps[k - 1] * (1.0 + slack)) return false;
    return true;
}

inline RateFit sweep_sparsity(const SweepConfig& cfg) {
    Quantities q;
    q.sparsity = true;
    return fit_sparsity(run_sweep(cfg, q));
}

inline RateFit sweep_max_xi(const SweepConfig& cfg) {
    Quantities q;
    q.max_xi = true;
    return fit_max_xi(run_sweep(cfg, q));
}

inline RateFit sweep_volume(const SweepConfig& cfg) {
    Quantities q;
    q.volume = true;
    return fit_volume(run_sweep(cfg, q));
}

inline RateFit sweep_map_rate(const SweepConfig& cfg) {
    Quantities q;
    q.map_rate = true;
    return fit_map_rate(run_sweep(cfg, q));
}

inline RateFit sweep_gap(const SweepConfig& cfg) {
    Quantities q;
    q.gap = true;
    return fit_gap(run_sweep(cfg, q));
}

inline ConvexityReport sweep_strong_convexity(const SweepConfig& cfg) {
    Quantities q;
    q.strong_convexity = true;
    return check_strong_convexity(run_sweep(cfg, q));
}

inline SandwichReport sweep_ratio_sandwich(const SweepConfig& cfg) {
    Quantities q;
    q.ratio_sandwich = true;
    return check_ratio_sandwich(run_sweep(cfg, q));
}

}  // namespace rot

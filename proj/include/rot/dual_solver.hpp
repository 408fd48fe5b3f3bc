#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rot/errors.hpp"
#include "rot/measures.hpp"
#include "rot/parallel.hpp"

namespace rot {

/// Regularization parameters. epsilon and p are fixed at construction; q and kappa derive from them.
class SolverParams {
public:
    SolverParams(double epsilon, double p) : epsilon_(epsilon), p_(p) {
        if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw InvalidArgument("epsilon must be positive and finite");
        if (!(p > 1.0 && p <= 2.0)) throw InvalidArgument("p must lie in (1,2]");
        q_ = p / (p - 1.0);
        kappa_ = std::pow(epsilon, q_ - 1.0) * std::pow(q_, q_ - 1.0);
    }

    double epsilon() const noexcept { return epsilon_; }
    double p() const noexcept { return p_; }
    double q() const noexcept { return q_; }
    /// Right-hand side eps^{q-1} q^{q-1} of the Schrodinger system.
    double kappa() const noexcept { return kappa_; }
    /// 1 / (eps^{q-1} q^{q-1}); the plan density prefactor.
    double density_scale() const noexcept { return 1.0 / kappa_; }
    /// Sparsity exponent 1/(d(p-1)+2).
    double radius_exponent(int d) const noexcept { return 1.0 / (d * (p_ - 1.0) + 2.0); }

    double tol_residual = 1e-10;       // sup-norm residual relative to kappa
    int max_outer_iters = 10000;
    double newton_tol = 1e-14;         // |Phi(t) - kappa| relative to kappa
    int newton_max_iters = 100;
    std::size_t cost_cache_limit = 20'000'000;  // cache n0*n1 costs up to this many entries
    unsigned threads = 1;

private:
    double epsilon_;
    double p_;
    double q_;
    double kappa_;
};

/// (t)_+^e with the convention (t)_+^0 = 1_{t >= 0}.
inline double positive_power(double t, double e) {
    if (e == 0.0) return t >= 0.0 ? 1.0 : 0.0;
    if (t <= 0.0) return 0.0;
    if (e == 1.0) return t;
    if (e == 2.0) return t * t;
    return std::pow(t, e);
}

struct RotProblem {
    DiscreteMeasure lambda;
    DiscreteMeasure mu;
    CostKernel kernel;
    SolverParams params;

    RotProblem(DiscreteMeasure l, DiscreteMeasure m, CostKernel k, SolverParams prm)
        : lambda(std::move(l)), mu(std::move(m)), kernel(std::move(k)), params(prm) {
        if (lambda.dim() != mu.dim() || lambda.dim() != kernel.domain.dim())
            throw InvalidArgument("marginals and cost kernel must share one dimension");
    }

    int dim() const noexcept { return lambda.dim(); }
};

/// Cost matrix, cached densely below a size threshold and recomputed on demand above it.
class CostMatrix {
public:
    CostMatrix(const DiscreteMeasure& lambda, const DiscreteMeasure& mu, const CostKernel& kernel,
               std::size_t cache_limit)
        : lambda_(&lambda), mu_(&mu), kernel_(&kernel) {
        const std::size_t n0 = lambda.size(), n1 = mu.size();
        if (n0 * n1 <= cache_limit) {
            cache_.resize(n0 * n1);
            for (std::size_t i = 0; i < n0; ++i)
                for (std::size_t j = 0; j < n1; ++j) cache_[i * n1 + j] = cost(lambda.point(i), mu.point(j), kernel);
        }
    }

    explicit CostMatrix(const RotProblem& pb)
        : CostMatrix(pb.lambda, pb.mu, pb.kernel, pb.params.cost_cache_limit) {}

    std::size_t rows() const noexcept { return lambda_->size(); }
    std::size_t cols() const noexcept { return mu_->size(); }
    bool cached() const noexcept { return !cache_.empty(); }

    double operator()(std::size_t i, std::size_t j) const {
        return cached() ? cache_[i * cols() + j] : cost(lambda_->point(i), mu_->point(j), *kernel_);
    }

    void row(std::size_t i, std::span<double> out) const {
        if (cached()) {
            std::copy_n(cache_.begin() + static_cast<std::ptrdiff_t>(i * cols()), cols(), out.begin());
            return;
        }
        const auto x = lambda_->point(i);
        for (std::size_t j = 0; j < cols(); ++j) out[j] = cost(x, mu_->point(j), *kernel_);
    }

    void col(std::size_t j, std::span<double> out) const {
        if (cached()) {
            for (std::size_t i = 0; i < rows(); ++i) out[i] = cache_[i * cols() + j];
            return;
        }
        const auto y = mu_->point(j);
        for (std::size_t i = 0; i < rows(); ++i) out[i] = cost(lambda_->point(i), y, *kernel_);
    }

private:
    const DiscreteMeasure* lambda_;
    const DiscreteMeasure* mu_;
    const CostKernel* kernel_;
    std::vector<double> cache_;
};

enum class Gauge { none, mean_zero_f, symmetric };

inline const char* to_string(Gauge g) {
    switch (g) {
        case Gauge::none: return "none";
        case Gauge::mean_zero_f: return "mean-zero-f";
        case Gauge::symmetric: return "symmetric";
    }
    return "?";
}

struct DualPotentials {
    std::vector<double> f;  // over lambda points
    std::vector<double> g;  // over mu points
    Gauge gauge = Gauge::none;
};

inline double integrate(std::span<const double> values, const DiscreteMeasure& m) {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) s += values[i] * m.weight(i);
    return s;
}

/// Moves the additive constant between f and g; the plan is unchanged.
inline void apply_gauge(DualPotentials& duals, const DiscreteMeasure& lambda, const DiscreteMeasure& mu, Gauge gauge) {
    double shift = 0.0;
    if (gauge == Gauge::mean_zero_f) {
        shift = integrate(duals.f, lambda);
    } else if (gauge == Gauge::symmetric) {
        shift = 0.5 * (integrate(duals.f, lambda) - integrate(duals.g, mu));
    }
    for (double& v : duals.f) v -= shift;
    for (double& v : duals.g) v += shift;
    duals.gauge = gauge;
}

namespace detail {

/// Phi(t) = sum_j ((t + other_j) - cost_j)_+^{q-1} w_j and its derivative.
struct RowEval {
    double value;
    double slope;
};

inline RowEval eval_row(double t, std::span<const double> other, std::span<const double> costs,
                        std::span<const double> weights, double q) {
    double v = 0.0, s = 0.0;
    if (q == 2.0) {
        for (std::size_t j = 0; j < costs.size(); ++j) {
            const double xi = (t + other[j]) - costs[j];
            if (xi >= 0.0) {
                v += xi * weights[j];
                s += weights[j];
            }
        }
        return {v, s};
    }
    for (std::size_t j = 0; j < costs.size(); ++j) {
        const double xi = (t + other[j]) - costs[j];
        if (xi > 0.0) {
            const double lower = positive_power(xi, q - 2.0);
            v += lower * xi * weights[j];
            s += lower * weights[j];
        }
    }
    return {v, (q - 1.0) * s};
}

inline double row_value(double t, std::span<const double> other, std::span<const double> costs,
                        std::span<const double> weights, double q) {
    double v = 0.0;
    for (std::size_t j = 0; j < costs.size(); ++j) v += positive_power((t + other[j]) - costs[j], q - 1.0) * weights[j];
    return v;
}

}  // namespace detail

struct RowSolve {
    double value;
    int iterations;
};

/// Unique t with sum_j (t + other_j - c_j)_+^{q-1} w_j = kappa, by Newton from the right
/// with a bisection fallback. Phi is convex and nondecreasing, so Newton steps from an
/// upper bracket stay inside [lo, hi].
inline RowSolve solve_row(std::span<const double> other, std::span<const double> costs,
                          std::span<const double> weights, const SolverParams& params) {
    if (other.size() != costs.size() || costs.size() != weights.size() || costs.empty())
        throw InvalidArgument("row solve: mismatched or empty inputs");
    const double q = params.q();
    const double kappa = params.kappa();

    std::size_t jmin = 0;
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < costs.size(); ++j) {
        if (!std::isfinite(costs[j]) || !std::isfinite(other[j])) throw InvalidArgument("row solve: non-finite input");
        const double a = costs[j] - other[j];
        if (a < lo || (a == lo && weights[j] > weights[jmin])) {
            lo = a;
            jmin = j;
        }
    }
    if (!(weights[jmin] > 0.0)) throw RootFindError("row solve: no positive weight at the bracket minimum", lo, lo);

    // the single term at jmin already reaches kappa here
    double step = std::pow(kappa / weights[jmin], 1.0 / (q - 1.0));
    double hi = lo + step;
    for (int k = 0; detail::row_value(hi, other, costs, weights, q) < kappa; ++k) {
        if (k > 60) throw RootFindError("row solve: bracket construction failed", lo, hi);
        step *= 2.0;
        hi = lo + step;
    }

    const double target_tol = params.newton_tol * kappa;
    double t = hi;
    for (int it = 1; it <= params.newton_max_iters; ++it) {
        const auto [phi, dphi] = detail::eval_row(t, other, costs, weights, q);
        const double r = phi - kappa;
        if (std::abs(r) <= target_tol) return {t, it};
        if (r > 0.0)
            hi = t;
        else
            lo = t;
        double next = dphi > 0.0 ? t - r / dphi : lo;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (next == t || !(hi - lo > 2.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(lo), std::abs(hi))))
            return {t, it};
        t = next;
    }
    std::ostringstream msg;
    msg << "row solve: no convergence after " << params.newton_max_iters << " iterations, bracket [" << lo << ", "
        << hi << "]";
    throw RootFindError(msg.str(), lo, hi);
}

/// Scalar update of f at one lambda point given g; `costs_row` holds c(x_i, y_j).
inline double update_f_row(std::span<const double> g, const DiscreteMeasure& mu, std::span<const double> costs_row,
                           const SolverParams& params) {
    return solve_row(g, costs_row, mu.weights(), params).value;
}

/// Residuals of both marginal equations, in the order (over lambda, over mu).
inline std::pair<std::vector<double>, std::vector<double>> schrodinger_residual(const DualPotentials& duals,
                                                                                 const RotProblem& pb,
                                                                                 const CostMatrix& costs) {
    const double q = pb.params.q();
    const double kappa = pb.params.kappa();
    std::vector<double> rf(pb.lambda.size()), rg(pb.mu.size());
    parallel_for(rf.size(), pb.params.threads, [&](std::size_t i) {
        std::vector<double> c(pb.mu.size());
        costs.row(i, c);
        rf[i] = detail::row_value(duals.f[i], duals.g, c, pb.mu.weights(), q) - kappa;
    });
    parallel_for(rg.size(), pb.params.threads, [&](std::size_t j) {
        std::vector<double> c(pb.lambda.size());
        costs.col(j, c);
        rg[j] = detail::row_value(duals.g[j], duals.f, c, pb.lambda.weights(), q) - kappa;
    });
    return {std::move(rf), std::move(rg)};
}

inline std::pair<std::vector<double>, std::vector<double>> schrodinger_residual(const DualPotentials& duals,
                                                                                 const RotProblem& pb) {
    return schrodinger_residual(duals, pb, CostMatrix(pb));
}

inline double sup_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

/// Dual value: int f + int g - (eps^{q-1} q^q)^{-1} int (f + g - c)_+^q.
inline double dual_objective(const DualPotentials& duals, const RotProblem& pb, const CostMatrix& costs) {
    const double q = pb.params.q();
    const double scale = 1.0 / (std::pow(pb.params.epsilon(), q - 1.0) * std::pow(q, q));
    std::vector<double> row_sums(pb.lambda.size());
    parallel_for(row_sums.size(), pb.params.threads, [&](std::size_t i) {
        std::vector<double> c(pb.mu.size());
        costs.row(i, c);
        double s = 0.0;
        for (std::size_t j = 0; j < c.size(); ++j)
            s += positive_power((duals.f[i] + duals.g[j]) - c[j], q) * pb.mu.weight(j);
        row_sums[i] = s * pb.lambda.weight(i);
    });
    double penalty = 0.0;
    for (double s : row_sums) penalty += s;
    return integrate(duals.f, pb.lambda) + integrate(duals.g, pb.mu) - scale * penalty;
}

inline double dual_objective(const DualPotentials& duals, const RotProblem& pb) {
    return dual_objective(duals, pb, CostMatrix(pb));
}

/// eps * h_p(0) = -eps/(p-1): the constant separating the primal from dual_objective at optimality.
inline double entropy_baseline(const SolverParams& params) { return -params.epsilon() / (params.p() - 1.0); }

/// primal - (dual - eps(q-1)); zero at the optimum.
inline double duality_gap(double primal, double dual, const SolverParams& params) {
    return primal - (dual + entropy_baseline(params));
}

/// Primal value of the plan induced by the duals, computed row by row without storing it.
inline double primal_objective_from_duals(const DualPotentials& duals, const RotProblem& pb, const CostMatrix& costs) {
    const double q = pb.params.q();
    const double p = pb.params.p();
    const double eps = pb.params.epsilon();
    const double scale = pb.params.density_scale();
    std::vector<double> row_sums(pb.lambda.size());
    parallel_for(row_sums.size(), pb.params.threads, [&](std::size_t i) {
        std::vector<double> c(pb.mu.size());
        costs.row(i, c);
        double s = 0.0;
        for (std::size_t j = 0; j < c.size(); ++j) {
            const double rho = scale * positive_power((duals.f[i] + duals.g[j]) - c[j], q - 1.0);
            s += (c[j] * rho + eps * h_p(rho, p)) * pb.mu.weight(j);
        }
        row_sums[i] = s * pb.lambda.weight(i);
    });
    double total = 0.0;
    for (double s : row_sums) total += s;
    return total;
}

struct ConvergenceReport {
    double epsilon = 0.0;
    double p = 0.0;
    int iterations = 0;
    double final_residual_rel = 0.0;
    std::vector<double> residual_trace;
    double primal = 0.0;
    double dual = 0.0;
    double gap = 0.0;
    /// min over both marginals of int xi_+^{q-2}; positive at a valid solution.
    double min_normalizer = 0.0;
    bool converged = false;
};

struct DualSolution {
    DualPotentials duals;
    ConvergenceReport report;
};

struct SolveOptions {
    std::optional<DualPotentials> init;
    Gauge gauge = Gauge::mean_zero_f;
    bool evaluate_objectives = true;
};

inline double min_normalizer(const DualPotentials& duals, const RotProblem& pb, const CostMatrix& costs) {
    const double e = pb.params.q() - 2.0;
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> c(pb.mu.size());
    for (std::size_t i = 0; i < pb.lambda.size(); ++i) {
        costs.row(i, c);
        double s = 0.0;
        for (std::size_t j = 0; j < c.size(); ++j)
            s += positive_power((duals.f[i] + duals.g[j]) - c[j], e) * pb.mu.weight(j);
        best = std::min(best, s);
    }
    std::vector<double> col(pb.lambda.size());
    for (std::size_t j = 0; j < pb.mu.size(); ++j) {
        costs.col(j, col);
        double s = 0.0;
        for (std::size_t i = 0; i < col.size(); ++i)
            s += positive_power((duals.f[i] + duals.g[j]) - col[i], e) * pb.lambda.weight(i);
        best = std::min(best, s);
    }
    return best;
}

/// Alternating exact maximization over f and g (nonlinear Gauss-Seidel on the Schrodinger
/// system). Throws NonConvergence once max_outer_iters is exhausted.
inline DualSolution solve_dual(const RotProblem& pb, const SolveOptions& opts = {}) {
    const auto& prm = pb.params;
    const std::size_t n0 = pb.lambda.size(), n1 = pb.mu.size();
    const CostMatrix costs(pb);

    DualPotentials duals;
    if (opts.init) {
        if (opts.init->f.size() != n0 || opts.init->g.size() != n1)
            throw InvalidArgument("initial potentials do not match the marginals");
        duals = *opts.init;
    } else {
        duals.f.assign(n0, 0.0);
        duals.g.assign(n1, 0.0);
    }

    ConvergenceReport report;
    report.epsilon = prm.epsilon();
    report.p = prm.p();
    const double kappa = prm.kappa();

    for (int it = 1; it <= prm.max_outer_iters; ++it) {
        parallel_for(n0, prm.threads, [&](std::size_t i) {
            std::vector<double> c(n1);
            costs.row(i, c);
            duals.f[i] = solve_row(duals.g, c, pb.mu.weights(), prm).value;
        });
        parallel_for(n1, prm.threads, [&](std::size_t j) {
            std::vector<double> c(n0);
            costs.col(j, c);
            duals.g[j] = solve_row(duals.f, c, pb.lambda.weights(), prm).value;
        });
        const auto [rf, rg] = schrodinger_residual(duals, pb, costs);
        const double rel = std::max(sup_norm(rf), sup_norm(rg)) / kappa;
        report.residual_trace.push_back(rel);
        report.iterations = it;
        report.final_residual_rel = rel;
        if (rel <= prm.tol_residual) {
            report.converged = true;
            break;
        }
    }
    if (!report.converged) {
        std::ostringstream msg;
        msg << "dual solve did not converge in " << prm.max_outer_iters
            << " outer iterations (residual/kappa = " << report.final_residual_rel << ")";
        throw NonConvergence(msg.str(), report.residual_trace);
    }

    apply_gauge(duals, pb.lambda, pb.mu, opts.gauge);
    if (opts.evaluate_objectives) {
        report.primal = primal_objective_from_duals(duals, pb, costs);
        report.dual = dual_objective(duals, pb, costs);
        report.gap = duality_gap(report.primal, report.dual, prm);
        report.min_normalizer = min_normalizer(duals, pb, costs);
    }
    return {std::move(duals), std::move(report)};
}

}  // namespace rot

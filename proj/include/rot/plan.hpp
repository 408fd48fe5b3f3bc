#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "rot/dual_solver.hpp"
#include "rot/errors.hpp"
#include "rot/measures.hpp"

namespace rot {

/// Dense plan density with respect to lambda x mu, row-major n0 x n1.
struct PlanDensity {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> rho;

    double operator()(std::size_t i, std::size_t j) const { return rho[i * cols + j]; }
    std::span<const double> row(std::size_t i) const { return {rho.data() + i * cols, cols}; }
};

/// rho_ij = (f_i + g_j - c_ij)_+^{q-1} / (eps^{q-1} q^{q-1}).
inline PlanDensity density(const DualPotentials& duals, const RotProblem& pb) {
    const CostMatrix costs(pb);
    PlanDensity plan{pb.lambda.size(), pb.mu.size(), {}};
    plan.rho.resize(plan.rows * plan.cols);
    const double scale = pb.params.density_scale();
    const double e = pb.params.q() - 1.0;
    for (std::size_t i = 0; i < plan.rows; ++i)
        for (std::size_t j = 0; j < plan.cols; ++j)
            plan.rho[i * plan.cols + j] = scale * positive_power((duals.f[i] + duals.g[j]) - costs(i, j), e);
    return plan;
}

inline double primal_objective(const PlanDensity& plan, const RotProblem& pb) {
    if (plan.rows != pb.lambda.size() || plan.cols != pb.mu.size())
        throw InvalidArgument("plan dimensions do not match the marginals");
    const CostMatrix costs(pb);
    const double eps = pb.params.epsilon();
    double total = 0.0;
    for (std::size_t i = 0; i < plan.rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < plan.cols; ++j)
            s += (costs(i, j) * plan(i, j) + eps * h_p(plan(i, j), pb.params.p())) * pb.mu.weight(j);
        total += s * pb.lambda.weight(i);
    }
    return total;
}

/// Conditional mean of y given x_i under the plan; torus targets are lifted next to x_i.
inline std::vector<double> barycentric_map(std::size_t i, const PlanDensity& plan, const DiscreteMeasure& lambda,
                                           const DiscreteMeasure& mu, bool periodic) {
    const auto x = lambda.point(i);
    const auto d = x.size();
    std::vector<double> acc(d, 0.0);
    double mass = 0.0;
    for (std::size_t j = 0; j < plan.cols; ++j) {
        const double w = plan(i, j) * mu.weight(j);
        if (w <= 0.0) continue;
        const auto y = mu.point(j);
        for (std::size_t a = 0; a < d; ++a) acc[a] += w * (x[a] + axis_offset(x[a], y[a], periodic));
        mass += w;
    }
    if (!(mass > 0.0)) throw DegenerateSection("barycentric map: plan row has no mass");
    for (double& v : acc) v /= mass;
    if (periodic) reduce_to_domain(acc, lambda.domain());
    return acc;
}

struct Section {
    std::size_t center_index = 0;
    std::vector<std::size_t> member_indices;
    double diameter = 0.0;
    std::vector<double> barycenter_weighted;
    double volume_estimate = 0.0;
    double outer_radius = 0.0;
    double inner_radius = 0.0;
    double outer_ratio = 0.0;
    double inner_ratio = 0.0;
};

enum class HessianMethod { formula, finite_difference };

/// Weighted average of (lifted) points: the gradient formula and its convex weights.
struct Barycenter {
    std::vector<double> point;        // lifted next to the centre, not reduced
    std::vector<double> weights;      // normalized, aligned with the other marginal's points
    double normalizer = 0.0;          // sum_j xi_+^{q-2} w_j before normalization
};

namespace detail {

inline std::vector<double> lifted(std::span<const double> centre, std::span<const double> y, bool periodic) {
    std::vector<double> out(centre.size());
    for (std::size_t a = 0; a < centre.size(); ++a) out[a] = centre[a] + axis_offset(centre[a], y[a], periodic);
    return out;
}

inline double cross(const std::array<double, 2>& o, const std::array<double, 2>& a, const std::array<double, 2>& b) {
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

/// Diameter of a point set given as flat d-dimensional coordinates.
inline double point_set_diameter(const std::vector<double>& pts, std::size_t d) {
    const std::size_t n = pts.size() / d;
    if (n < 2) return 0.0;
    if (d == 1) {
        const auto [lo, hi] = std::minmax_element(pts.begin(), pts.end());
        return *hi - *lo;
    }
    std::vector<double> work;
    std::size_t m = n;
    if (d == 2) {
        // monotone chain hull; the diameter is attained on hull vertices
        std::vector<std::array<double, 2>> p(n);
        for (std::size_t k = 0; k < n; ++k) p[k] = {pts[2 * k], pts[2 * k + 1]};
        std::sort(p.begin(), p.end());
        std::vector<std::array<double, 2>> hull(2 * n);
        std::size_t k = 0;
        for (std::size_t i = 0; i < n; ++i) {
            while (k >= 2 && cross(hull[k - 2], hull[k - 1], p[i]) <= 0) --k;
            hull[k++] = p[i];
        }
        for (std::size_t i = n - 1, t = k + 1; i-- > 0;) {
            while (k >= t && cross(hull[k - 2], hull[k - 1], p[i]) <= 0) --k;
            hull[k++] = p[i];
        }
        m = k > 1 ? k - 1 : k;
        work.resize(2 * m);
        for (std::size_t i = 0; i < m; ++i) {
            work[2 * i] = hull[i][0];
            work[2 * i + 1] = hull[i][1];
        }
    }
    const std::vector<double>& q = d == 2 ? work : pts;
    double best = 0.0;
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = a + 1; b < m; ++b) {
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double t = q[a * d + k] - q[b * d + k];
                s += t * t;
            }
            best = std::max(best, s);
        }
    return std::sqrt(best);
}

}  // namespace detail

/// Interior test: on boxes the distance to the boundary must exceed margin * (shortest side).
inline bool is_interior(std::span<const double> x, const Domain& domain, double margin) {
    if (domain.is_torus()) return true;
    double shortest = std::numeric_limits<double>::infinity();
    for (int a = 0; a < domain.dim(); ++a) shortest = std::min(shortest, domain.side(a));
    return domain.boundary_distance(x) > margin * shortest;
}

/// Read-only analysis of a solved instance. Holds references: `pb` and `duals` must outlive it.
class PlanAnalysis {
public:
    PlanAnalysis(const RotProblem& pb, const DualPotentials& duals) : pb_(pb), duals_(duals), costs_(pb) {
        if (duals.f.size() != pb.lambda.size() || duals.g.size() != pb.mu.size())
            throw InvalidArgument("potentials do not match the marginals");
    }

    const RotProblem& problem() const noexcept { return pb_; }
    const DualPotentials& duals() const noexcept { return duals_; }
    const CostMatrix& costs() const noexcept { return costs_; }
    bool periodic() const noexcept { return pb_.kernel.periodic(); }

    /// f_i + g_j - c_ij.
    double xi(std::size_t i, std::size_t j) const { return (duals_.f[i] + duals_.g[j]) - costs_(i, j); }

    std::vector<double> xi_row(std::size_t i) const {
        std::vector<double> c(pb_.mu.size());
        costs_.row(i, c);
        for (std::size_t j = 0; j < c.size(); ++j) c[j] = (duals_.f[i] + duals_.g[j]) - c[j];
        return c;
    }

    std::vector<double> xi_col(std::size_t j) const {
        std::vector<double> c(pb_.lambda.size());
        costs_.col(j, c);
        for (std::size_t i = 0; i < c.size(); ++i) c[i] = (duals_.f[i] + duals_.g[j]) - c[i];
        return c;
    }

    std::vector<double> density_row(std::size_t i) const {
        auto r = xi_row(i);
        for (double& v : r) v = pb_.params.density_scale() * positive_power(v, pb_.params.q() - 1.0);
        return r;
    }

    double max_xi(std::size_t i) const {
        const auto r = xi_row(i);
        return *std::max_element(r.begin(), r.end());
    }

    /// grad phi_eps(x_i): average of y over S_x with weights xi_+^{q-2} mu.
    Barycenter gradient_phi(std::size_t i) const {
        return barycenter(pb_.lambda.point(i), xi_row(i), pb_.mu);
    }

    Barycenter gradient_psi(std::size_t j) const {
        return barycenter(pb_.mu.point(j), xi_col(j), pb_.lambda);
    }

    std::vector<double> grad_phi(std::size_t i) const { return reduced(gradient_phi(i).point); }
    std::vector<double> grad_psi(std::size_t j) const { return reduced(gradient_psi(j).point); }

    /// f_eps at an arbitrary point of the lambda domain, from the first Schrodinger equation.
    double f_at(std::span<const double> x) const {
        std::vector<double> c(pb_.mu.size());
        for (std::size_t j = 0; j < c.size(); ++j) c[j] = cost(x, pb_.mu.point(j), pb_.kernel);
        return solve_row(duals_.g, c, pb_.mu.weights(), pb_.params).value;
    }

    /// grad phi_eps at an arbitrary point (lifted next to x, not reduced).
    std::vector<double> grad_phi_at(std::span<const double> x) const {
        std::vector<double> c(pb_.mu.size());
        for (std::size_t j = 0; j < c.size(); ++j) c[j] = cost(x, pb_.mu.point(j), pb_.kernel);
        const double fx = solve_row(duals_.g, c, pb_.mu.weights(), pb_.params).value;
        for (std::size_t j = 0; j < c.size(); ++j) c[j] = (fx + duals_.g[j]) - c[j];
        return barycenter(x, c, pb_.mu).point;
    }

    /// Barycentric map T_eps(x_i) from the duals (density-weighted conditional mean).
    std::vector<double> barycentric(std::size_t i) const {
        const auto x = pb_.lambda.point(i);
        const auto rho = density_row(i);
        std::vector<double> acc(x.size(), 0.0);
        double mass = 0.0;
        for (std::size_t j = 0; j < rho.size(); ++j) {
            const double w = rho[j] * pb_.mu.weight(j);
            if (w <= 0.0) continue;
            const auto y = detail::lifted(x, pb_.mu.point(j), periodic());
            for (std::size_t a = 0; a < x.size(); ++a) acc[a] += w * y[a];
            mass += w;
        }
        if (!(mass > 0.0)) throw DegenerateSection("barycentric map: plan row has no mass");
        for (double& v : acc) v /= mass;
        return reduced(acc);
    }

    Section section(std::size_t i) const {
        return build_section(i, pb_.lambda.point(i), xi_row(i), pb_.mu, gradient_phi(i).point);
    }

    Section section_dual(std::size_t j) const {
        return build_section(j, pb_.mu.point(j), xi_col(j), pb_.lambda, gradient_psi(j).point);
    }

    Eigen::MatrixXd hessian_phi(std::size_t i, HessianMethod method) const {
        const auto sec = section(i);
        const double h = pb_.lambda.spacing();
        if (h > 0.0 && sec.diameter < 4.0 * h)
            throw DegenerateSection("hessian: section resolved by fewer than 5 grid points per axis");
        return method == HessianMethod::formula ? hessian_formula(i) : hessian_finite_difference(pb_.lambda.point(i));
    }

    double strong_convexity_lambda_min(std::size_t i, HessianMethod method) const {
        return min_eigenvalue(hessian_phi(i, method));
    }

    static double min_eigenvalue(const Eigen::MatrixXd& m) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
        return es.eigenvalues()(0);
    }

    /// (q-2) sum (grad - y)(grad - y)^T xi^{q-3} mu / sum xi_+^{q-2} mu, p != 2 only.
    /// Members with xi <= 1e-9 * max_xi are left out of the numerator when q < 3.
    Eigen::MatrixXd hessian_formula(std::size_t i) const {
        const double q = pb_.params.q();
        if (pb_.params.p() == 2.0)
            throw UnsupportedMethod("hessian formula is the boundary-integral branch at p = 2; use finite differences");
        const auto x = pb_.lambda.point(i);
        const auto row = xi_row(i);
        const auto bc = barycenter(x, row, pb_.mu);
        const double top = *std::max_element(row.begin(), row.end());
        const double floor = q < 3.0 ? 1e-9 * top : 0.0;
        const auto d = x.size();
        Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
        Eigen::VectorXd v(static_cast<Eigen::Index>(d));
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (!(row[j] > floor)) continue;
            const auto y = detail::lifted(x, pb_.mu.point(j), periodic());
            for (std::size_t a = 0; a < d; ++a) v(static_cast<Eigen::Index>(a)) = bc.point[a] - y[a];
            const double w = (q == 3.0 ? 1.0 : std::pow(row[j], q - 3.0)) * pb_.mu.weight(j);
            acc.noalias() += w * v * v.transpose();
        }
        return (q - 2.0) * acc / bc.normalizer;
    }

    /// Symmetrized central difference of grad phi with one lambda grid step.
    Eigen::MatrixXd hessian_finite_difference(std::span<const double> x) const {
        const double h = pb_.lambda.spacing();
        if (!(h > 0.0)) throw UnsupportedMethod("finite-difference hessian needs a grid spacing on lambda");
        const auto d = x.size();
        Eigen::MatrixXd H(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
        std::vector<double> xp(x.begin(), x.end()), xm(x.begin(), x.end());
        for (std::size_t a = 0; a < d; ++a) {
            xp.assign(x.begin(), x.end());
            xm.assign(x.begin(), x.end());
            xp[a] += h;
            xm[a] -= h;
            reduce_to_domain(xp, pb_.lambda.domain());
            reduce_to_domain(xm, pb_.lambda.domain());
            if (!pb_.lambda.domain().contains(xp) || !pb_.lambda.domain().contains(xm))
                throw InvalidArgument("finite-difference stencil leaves the domain");
            const auto gp = grad_phi_at(xp);
            const auto gm = grad_phi_at(xm);
            for (std::size_t b = 0; b < d; ++b)
                H(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) =
                    axis_offset(gm[b], gp[b], periodic()) / (2.0 * h);
        }
        return 0.5 * (H + H.transpose());
    }

private:
    std::vector<double> reduced(std::vector<double> p) const {
        if (periodic()) reduce_to_domain(p, pb_.lambda.domain());
        return p;
    }

    Barycenter barycenter(std::span<const double> centre, std::span<const double> xi_values,
                          const DiscreteMeasure& other) const {
        const double e = pb_.params.q() - 2.0;
        const auto d = centre.size();
        Barycenter out;
        out.point.assign(d, 0.0);
        out.weights.assign(xi_values.size(), 0.0);
        double total = 0.0;
        for (std::size_t j = 0; j < xi_values.size(); ++j) {
            const double w = positive_power(xi_values[j], e) * other.weight(j);
            if (w <= 0.0) continue;
            out.weights[j] = w;
            total += w;
        }
        if (!(total > 0.0)) throw DegenerateSection("gradient: empty section (zero normalizer)");
        for (std::size_t j = 0; j < xi_values.size(); ++j) {
            if (out.weights[j] == 0.0) continue;
            out.weights[j] /= total;
            const auto y = other.point(j);
            for (std::size_t a = 0; a < d; ++a)
                out.point[a] += out.weights[j] * (centre[a] + axis_offset(centre[a], y[a], periodic()));
        }
        out.normalizer = total;
        return out;
    }

    /// Chart diameter while the section stays inside the open radius-1/2 ball around its centre
    /// (there the lifted chart is isometric); pairwise geodesic distance otherwise.
    double section_diameter(std::span<const double> centre, const std::vector<double>& lifted_members,
                            const std::vector<std::size_t>& members, const DiscreteMeasure& other) const {
        const auto d = centre.size();
        if (!periodic()) return detail::point_set_diameter(lifted_members, d);
        double reach = 0.0;
        for (std::size_t k = 0; k < members.size(); ++k) {
            double s = 0.0;
            for (std::size_t a = 0; a < d; ++a) {
                const double t = lifted_members[k * d + a] - centre[a];
                s += t * t;
            }
            reach = std::max(reach, s);
        }
        if (std::sqrt(reach) < 0.5) return detail::point_set_diameter(lifted_members, d);
        double best = 0.0;
        for (std::size_t a = 0; a < members.size(); ++a)
            for (std::size_t b = a + 1; b < members.size(); ++b)
                best = std::max(best, squared_distance(other.point(members[a]), other.point(members[b]), true));
        return std::sqrt(best);
    }

    Section build_section(std::size_t index, std::span<const double> centre, const std::vector<double>& xi_values,
                          const DiscreteMeasure& other, const std::vector<double>& gradient) const {
        Section s;
        s.center_index = index;
        const auto d = centre.size();
        std::vector<double> lifted_members;
        double outer = 0.0;
        double inner = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < xi_values.size(); ++j) {
            const auto y = other.point(j);
            const double dist = distance(gradient, y, periodic());
            if (xi_values[j] > 0.0) {
                s.member_indices.push_back(j);
                const auto ly = detail::lifted(centre, y, periodic());
                lifted_members.insert(lifted_members.end(), ly.begin(), ly.end());
                outer = std::max(outer, dist);
            } else {
                inner = std::min(inner, dist);
            }
        }
        if (s.member_indices.empty()) throw DegenerateSection("section: no member has positive density");
        s.diameter = section_diameter(centre, lifted_members, s.member_indices, other);
        s.barycenter_weighted = reduced(gradient);
        const auto cell = other.cell_volume();
        s.volume_estimate = cell ? static_cast<double>(s.member_indices.size()) * *cell
                                 : std::numeric_limits<double>::quiet_NaN();
        const double scale = std::pow(pb_.params.epsilon(), pb_.params.radius_exponent(static_cast<int>(d)));
        s.outer_radius = outer;
        s.inner_radius = std::isfinite(inner) ? std::max(0.0, inner - other.spacing()) : inner;
        s.outer_ratio = outer / scale;
        s.inner_ratio = s.inner_radius / scale;
        return s;
    }

    const RotProblem& pb_;
    const DualPotentials& duals_;
    CostMatrix costs_;
};

}  // namespace rot

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rot/errors.hpp"

namespace rot {

enum class DomainKind { box, torus };

inline const char* to_string(DomainKind k) { return k == DomainKind::box ? "box" : "torus"; }

/// Euclidean box or the flat unit torus [0,1)^d.
class Domain {
public:
    static Domain torus(int dim) {
        if (dim < 1) throw InvalidArgument("domain dimension must be >= 1");
        Domain d;
        d.kind_ = DomainKind::torus;
        d.lower_.assign(dim, 0.0);
        d.upper_.assign(dim, 1.0);
        return d;
    }

    static Domain box(std::vector<double> lower, std::vector<double> upper) {
        if (lower.empty() || lower.size() != upper.size())
            throw InvalidArgument("box bounds must be non-empty and of equal length");
        for (std::size_t a = 0; a < lower.size(); ++a)
            if (!(lower[a] < upper[a])) throw InvalidArgument("box bounds need lower < upper on every axis");
        Domain d;
        d.kind_ = DomainKind::box;
        d.lower_ = std::move(lower);
        d.upper_ = std::move(upper);
        return d;
    }

    static Domain unit_box(int dim) {
        if (dim < 1) throw InvalidArgument("domain dimension must be >= 1");
        return box(std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0));
    }

    DomainKind kind() const noexcept { return kind_; }
    bool is_torus() const noexcept { return kind_ == DomainKind::torus; }
    int dim() const noexcept { return static_cast<int>(lower_.size()); }
    const std::vector<double>& lower() const noexcept { return lower_; }
    const std::vector<double>& upper() const noexcept { return upper_; }
    double side(int axis) const { return upper_[axis] - lower_[axis]; }

    double volume() const {
        double v = 1.0;
        for (int a = 0; a < dim(); ++a) v *= side(a);
        return v;
    }

    bool contains(std::span<const double> x) const {
        if (static_cast<int>(x.size()) != dim()) return false;
        for (int a = 0; a < dim(); ++a) {
            if (is_torus()) {
                if (!(x[a] >= 0.0 && x[a] < 1.0)) return false;
            } else if (!(x[a] >= lower_[a] && x[a] <= upper_[a])) {
                return false;
            }
        }
        return true;
    }

    /// Distance to the boundary; infinite on the torus.
    double boundary_distance(std::span<const double> x) const {
        if (is_torus()) return std::numeric_limits<double>::infinity();
        double best = std::numeric_limits<double>::infinity();
        for (int a = 0; a < dim(); ++a)
            best = std::min({best, x[a] - lower_[a], upper_[a] - x[a]});
        return best;
    }

    friend bool operator==(const Domain&, const Domain&) = default;

private:
    Domain() = default;
    DomainKind kind_ = DomainKind::torus;
    std::vector<double> lower_;
    std::vector<double> upper_;
};

/// Tensor-grid layout: node (k_0,...,k_{d-1}) has index sum k_a * stride_a, last axis fastest.
struct GridInfo {
    std::vector<int> resolution;
    std::vector<double> origin;
    std::vector<double> step;

    std::size_t size() const {
        std::size_t n = 1;
        for (int m : resolution) n *= static_cast<std::size_t>(m);
        return n;
    }
    std::size_t stride(int axis) const {
        std::size_t s = 1;
        for (int a = static_cast<int>(resolution.size()) - 1; a > axis; --a) s *= resolution[a];
        return s;
    }
    int coordinate_index(std::size_t node, int axis) const {
        return static_cast<int>((node / stride(axis)) % static_cast<std::size_t>(resolution[axis]));
    }
    friend bool operator==(const GridInfo&, const GridInfo&) = default;
};

/// Weighted point cloud on a domain. Immutable after construction.
class DiscreteMeasure {
public:
    DiscreteMeasure(Domain domain, std::vector<double> coords, std::vector<double> weights,
                    std::optional<double> cell_volume = std::nullopt,
                    std::optional<GridInfo> grid = std::nullopt)
        : domain_(std::move(domain)),
          coords_(std::move(coords)),
          weights_(std::move(weights)),
          cell_volume_(cell_volume),
          grid_(std::move(grid)) {
        const auto d = static_cast<std::size_t>(domain_.dim());
        if (weights_.empty()) throw InvalidArgument("measure needs at least one atom");
        if (coords_.size() != weights_.size() * d)
            throw InvalidArgument("coordinate array size does not match weights x dimension");
        double total = 0.0;
        for (double w : weights_) {
            if (!(w > 0.0) || !std::isfinite(w)) throw InvalidArgument("measure weights must be positive and finite");
            total += w;
        }
        if (std::abs(total - 1.0) > 1e-12) throw InvalidArgument("measure weights must sum to 1");
        for (std::size_t i = 0; i < size(); ++i)
            if (!domain_.contains(point(i))) throw InvalidArgument("measure point outside its domain");
        if (cell_volume_ && !(*cell_volume_ > 0.0)) throw InvalidArgument("cell volume must be positive");
        if (grid_ && grid_->size() != size()) throw InvalidArgument("grid layout does not match point count");
    }

    const Domain& domain() const noexcept { return domain_; }
    int dim() const noexcept { return domain_.dim(); }
    std::size_t size() const noexcept { return weights_.size(); }
    std::span<const double> point(std::size_t i) const {
        const auto d = static_cast<std::size_t>(dim());
        return {coords_.data() + i * d, d};
    }
    double weight(std::size_t i) const { return weights_[i]; }
    std::span<const double> weights() const noexcept { return weights_; }
    std::span<const double> coords() const noexcept { return coords_; }
    std::optional<double> cell_volume() const noexcept { return cell_volume_; }
    const std::optional<GridInfo>& grid() const noexcept { return grid_; }

    /// Largest grid step, or cell_volume^(1/d) for non-grid clouds with a cell volume; 0 otherwise.
    double spacing() const {
        if (grid_) return *std::max_element(grid_->step.begin(), grid_->step.end());
        if (cell_volume_) return std::pow(*cell_volume_, 1.0 / dim());
        return 0.0;
    }

private:
    Domain domain_;
    std::vector<double> coords_;
    std::vector<double> weights_;
    std::optional<double> cell_volume_;
    std::optional<GridInfo> grid_;
};

enum class CostKind { squared_euclidean, torus_squared_geodesic };

inline const char* to_string(CostKind k) {
    return k == CostKind::squared_euclidean ? "squared_euclidean" : "torus_squared_geodesic";
}

struct CostKernel {
    CostKind kind;
    Domain domain;

    CostKernel(CostKind k, Domain dom) : kind(k), domain(std::move(dom)) {
        if (kind == CostKind::torus_squared_geodesic && !domain.is_torus())
            throw InvalidArgument("torus cost kernel requires a torus domain");
    }

    /// The natural kernel for a domain: geodesic on the torus, Euclidean on boxes.
    static CostKernel for_domain(const Domain& dom) {
        return {dom.is_torus() ? CostKind::torus_squared_geodesic : CostKind::squared_euclidean, dom};
    }

    bool periodic() const noexcept { return kind == CostKind::torus_squared_geodesic; }
};

/// Signed periodic offset in [-1/2, 1/2].
inline double wrap_offset(double delta) { return delta - std::nearbyint(delta); }

/// Displacement y - x, using the shortest periodic representative when `periodic`.
inline double axis_offset(double x, double y, bool periodic) {
    return periodic ? wrap_offset(y - x) : y - x;
}

inline double squared_distance(std::span<const double> x, std::span<const double> y, bool periodic) {
    double s = 0.0;
    for (std::size_t a = 0; a < x.size(); ++a) {
        const double t = axis_offset(x[a], y[a], periodic);
        s += t * t;
    }
    return s;
}

inline double distance(std::span<const double> x, std::span<const double> y, bool periodic) {
    return std::sqrt(squared_distance(x, y, periodic));
}

/// Half squared (geodesic) distance.
inline double cost(std::span<const double> x, std::span<const double> y, const CostKernel& kernel) {
    if (x.size() != y.size() || static_cast<int>(x.size()) != kernel.domain.dim())
        throw InvalidArgument("cost: point dimension mismatch");
    return 0.5 * squared_distance(x, y, kernel.periodic());
}

/// Reduce to [0,1) on the torus; identity on boxes.
inline void reduce_to_domain(std::span<double> x, const Domain& domain) {
    if (!domain.is_torus()) return;
    for (double& v : x) {
        v -= std::floor(v);
        if (v >= 1.0) v = 0.0;
    }
}

namespace detail {

inline GridInfo make_grid(const Domain& domain, std::span<const int> resolution) {
    if (static_cast<int>(resolution.size()) != domain.dim())
        throw InvalidArgument("grid resolution must list one count per axis");
    GridInfo g;
    for (int a = 0; a < domain.dim(); ++a) {
        const int m = resolution[a];
        if (m < 2) throw InvalidArgument("grid resolution must be >= 2 on every axis");
        const double h = domain.side(a) / m;
        g.resolution.push_back(m);
        g.step.push_back(h);
        // torus: nodes k/m; box: cell centres
        g.origin.push_back(domain.is_torus() ? 0.0 : domain.lower()[a] + 0.5 * h);
    }
    return g;
}

inline std::vector<double> grid_coords(const GridInfo& g) {
    const std::size_t n = g.size();
    const auto d = g.resolution.size();
    std::vector<double> coords(n * d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t a = 0; a < d; ++a)
            coords[i * d + a] = g.origin[a] + g.step[a] * g.coordinate_index(i, static_cast<int>(a));
    return coords;
}

inline double cell_volume(const GridInfo& g) {
    double v = 1.0;
    for (double h : g.step) v *= h;
    return v;
}

}  // namespace detail

/// Tensor grid with equal weights 1/n.
inline DiscreteMeasure uniform_grid_measure(const Domain& domain, std::span<const int> resolution) {
    GridInfo g = detail::make_grid(domain, resolution);
    const std::size_t n = g.size();
    auto coords = detail::grid_coords(g);
    const double vol = detail::cell_volume(g);
    return DiscreteMeasure(domain, std::move(coords), std::vector<double>(n, 1.0 / static_cast<double>(n)), vol,
                           std::move(g));
}

inline DiscreteMeasure uniform_grid_measure(const Domain& domain, int resolution_per_axis) {
    const std::vector<int> res(domain.dim(), resolution_per_axis);
    return uniform_grid_measure(domain, res);
}

/// Tensor grid with weights proportional to a positive density sampled at the nodes.
inline DiscreteMeasure density_grid_measure(const Domain& domain, std::span<const int> resolution,
                                            const std::function<double(std::span<const double>)>& density) {
    GridInfo g = detail::make_grid(domain, resolution);
    const std::size_t n = g.size();
    auto coords = detail::grid_coords(g);
    const auto d = static_cast<std::size_t>(domain.dim());
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = density(std::span<const double>(coords.data() + i * d, d));
        if (!(w[i] > 0.0)) throw InvalidArgument("grid density must be positive at every node");
    }
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& v : w) v /= total;
    const double vol = detail::cell_volume(g);
    return DiscreteMeasure(domain, std::move(coords), std::move(w), vol, std::move(g));
}

/// L^p entropy h_p(z) = (|z|^p - 1)/(p - 1), p in (1,2].
inline double h_p(double z, double p) {
    if (!(p > 1.0 && p <= 2.0)) throw InvalidArgument("h_p: p must lie in (1,2]");
    const double a = std::abs(z);
    const double ap = p == 2.0 ? a * a : std::pow(a, p);
    return (ap - 1.0) / (p - 1.0);
}

}  // namespace rot

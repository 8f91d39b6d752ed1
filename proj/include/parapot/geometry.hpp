#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace parapot {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Volume of the unit ball in R^n.
inline double unit_ball_volume(int n) {
    if (n < 0) throw std::invalid_argument("unit_ball_volume: negative dimension");
    return std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n + 1.0);
}

struct SpaceTimePoint {
    std::vector<double> x;
    double t = 0.0;

    SpaceTimePoint() = default;
    SpaceTimePoint(std::vector<double> x_, double t_) : x(std::move(x_)), t(t_) {}

    int dim() const { return static_cast<int>(x.size()); }
};

inline double spatial_distance(const SpaceTimePoint& a, const SpaceTimePoint& b) {
    if (a.dim() != b.dim())
        throw std::invalid_argument("spatial_distance: dimension mismatch");
    double s = 0.0;
    for (int i = 0; i < a.dim(); ++i) {
        const double d = a.x[i] - b.x[i];
        s += d * d;
    }
    return std::sqrt(s);
}

/// max{|x_a - x_b|, sqrt(2|t_a - t_b|)}; centered cylinders are its metric balls.
inline double parabolic_distance(const SpaceTimePoint& a, const SpaceTimePoint& b) {
    return std::max(spatial_distance(a, b), std::sqrt(2.0 * std::abs(a.t - b.t)));
}

enum class CylinderKind { Backward, Centered };

// Q_rho(x,t)      = B_rho(x) x (t - rho^2, t]         (Backward)
// Qtil_rho(x,t)   = B_rho(x) x [t - rho^2/2, t + rho^2/2)   (Centered)
//
// Spatial balls are open.  The time interval of a Backward cylinder is
// closed at the top so that a source sitting exactly at the cylinder's
// final time is seen by it; Centered cylinders are closed at the bottom.
struct ParabolicCylinder {
    SpaceTimePoint center;
    double radius = 1.0;
    CylinderKind kind = CylinderKind::Centered;

    ParabolicCylinder() = default;
    ParabolicCylinder(SpaceTimePoint c, double rho, CylinderKind k)
        : center(std::move(c)), radius(rho), kind(k) {
        if (!(radius > 0.0)) throw std::invalid_argument("ParabolicCylinder: radius must be positive");
    }

    double t_lo() const {
        return kind == CylinderKind::Backward ? center.t - radius * radius
                                              : center.t - 0.5 * radius * radius;
    }
    double t_hi() const {
        return kind == CylinderKind::Backward ? center.t
                                              : center.t + 0.5 * radius * radius;
    }

    bool contains_time(double t) const {
        if (kind == CylinderKind::Backward) return t > t_lo() && t <= t_hi();
        return t >= t_lo() && t < t_hi();
    }

    bool contains(const SpaceTimePoint& p) const {
        return contains_time(p.t) && spatial_distance(p, center) < radius;
    }

    double space_time_volume() const {
        const int n = center.dim();
        return unit_ball_volume(n) * std::pow(radius, n) * radius * radius;
    }
};

inline ParabolicCylinder backward_cylinder(SpaceTimePoint c, double rho) {
    return ParabolicCylinder(std::move(c), rho, CylinderKind::Backward);
}
inline ParabolicCylinder centered_cylinder(SpaceTimePoint c, double rho) {
    return ParabolicCylinder(std::move(c), rho, CylinderKind::Centered);
}

/// Axis-aligned space-time box, used for norm sub-domains.
struct Box {
    std::vector<double> lo, hi;
    double t0 = 0.0, t1 = 0.0;

    bool contains(const SpaceTimePoint& p) const {
        if (static_cast<int>(lo.size()) != p.dim()) return false;
        for (int i = 0; i < p.dim(); ++i)
            if (p.x[i] < lo[i] || p.x[i] >= hi[i]) return false;
        return p.t >= t0 && p.t < t1;
    }
};

// Uniform space-time lattice over box x time interval.  Values attached to
// it live at cell centers; time index is slowest, then spatial axes in
// row-major order (last axis fastest).
struct GridSpec {
    std::vector<double> corner;  // lower spatial corner
    std::vector<double> side;    // side lengths
    std::vector<int> cells;      // cells per spatial axis
    double t_begin = 0.0;
    double t_end = 1.0;
    int steps = 1;

    int dim() const { return static_cast<int>(cells.size()); }

    void validate() const {
        const size_t n = cells.size();
        if (n == 0 || corner.size() != n || side.size() != n)
            throw std::invalid_argument("GridSpec: inconsistent spatial fields");
        for (size_t i = 0; i < n; ++i) {
            if (cells[i] <= 0) throw std::invalid_argument("GridSpec: cells must be positive");
            if (!(side[i] > 0.0)) throw std::invalid_argument("GridSpec: side lengths must be positive");
        }
        if (!(t_end > t_begin)) throw std::invalid_argument("GridSpec: empty time interval");
        if (steps <= 0) throw std::invalid_argument("GridSpec: steps must be positive");
    }

    double spacing(int axis) const { return side[axis] / cells[axis]; }
    double dt() const { return (t_end - t_begin) / steps; }

    std::int64_t spatial_cell_count() const {
        std::int64_t n = 1;
        for (int c : cells) n *= c;
        return n;
    }
    std::int64_t total_cell_count() const { return spatial_cell_count() * steps; }

    double spatial_cell_volume() const {
        double v = 1.0;
        for (int i = 0; i < dim(); ++i) v *= spacing(i);
        return v;
    }
    double cell_volume() const { return spatial_cell_volume() * dt(); }

    void spatial_index(std::int64_t flat, std::vector<int>& multi) const {
        multi.resize(cells.size());
        for (int i = dim() - 1; i >= 0; --i) {
            multi[i] = static_cast<int>(flat % cells[i]);
            flat /= cells[i];
        }
    }

    std::int64_t flat_spatial_index(const std::vector<int>& multi) const {
        std::int64_t f = 0;
        for (int i = 0; i < dim(); ++i) f = f * cells[i] + multi[i];
        return f;
    }

    int time_index(std::int64_t cell) const {
        return static_cast<int>(cell / spatial_cell_count());
    }

    SpaceTimePoint cell_center(std::int64_t cell) const {
        const std::int64_t ns = spatial_cell_count();
        const int k = static_cast<int>(cell / ns);
        std::int64_t fs = cell % ns;
        std::vector<int> multi;
        spatial_index(fs, multi);
        std::vector<double> x(dim());
        for (int i = 0; i < dim(); ++i) x[i] = corner[i] + (multi[i] + 0.5) * spacing(i);
        return SpaceTimePoint(std::move(x), t_begin + (k + 0.5) * dt());
    }

    // Cell bounds, spatial part only.
    void cell_bounds(std::int64_t cell, std::vector<double>& lo, std::vector<double>& hi) const {
        std::vector<int> multi;
        spatial_index(cell % spatial_cell_count(), multi);
        lo.resize(dim());
        hi.resize(dim());
        for (int i = 0; i < dim(); ++i) {
            lo[i] = corner[i] + multi[i] * spacing(i);
            hi[i] = lo[i] + spacing(i);
        }
    }

    double cell_t_lo(std::int64_t cell) const { return t_begin + time_index(cell) * dt(); }
    double cell_t_hi(std::int64_t cell) const { return t_begin + (time_index(cell) + 1) * dt(); }

    /// Flat cell index of the cell containing p, or -1 if outside.
    std::int64_t locate(const SpaceTimePoint& p) const {
        if (p.dim() != dim()) return -1;
        std::vector<int> multi(dim());
        for (int i = 0; i < dim(); ++i) {
            const double u = (p.x[i] - corner[i]) / spacing(i);
            const int m = static_cast<int>(std::floor(u));
            if (m < 0 || m >= cells[i]) return -1;
            multi[i] = m;
        }
        const double v = (p.t - t_begin) / dt();
        int k = static_cast<int>(std::floor(v));
        if (p.t == t_end) k = steps - 1;  // top face belongs to the last step
        if (k < 0 || k >= steps) return -1;
        return static_cast<std::int64_t>(k) * spatial_cell_count() + flat_spatial_index(multi);
    }

    bool same_layout(const GridSpec& o) const {
        return cells == o.cells && steps == o.steps && corner == o.corner && side == o.side &&
               t_begin == o.t_begin && t_end == o.t_end;
    }

    /// Largest parabolic distance from the box center to a corner.
    double parabolic_diameter() const {
        double s = 0.0;
        for (int i = 0; i < dim(); ++i) s += 0.25 * side[i] * side[i];
        const double half_span = 0.5 * (t_end - t_begin);
        return std::max(std::sqrt(s), std::sqrt(2.0 * half_span)) * 2.0;
    }
};

struct GridFunction {
    GridSpec grid;
    std::vector<double> values;

    GridFunction() = default;
    explicit GridFunction(GridSpec g, double fill = 0.0) : grid(std::move(g)) {
        grid.validate();
        values.assign(static_cast<size_t>(grid.total_cell_count()), fill);
    }
    GridFunction(GridSpec g, std::vector<double> v) : grid(std::move(g)), values(std::move(v)) {
        grid.validate();
        if (static_cast<std::int64_t>(values.size()) != grid.total_cell_count())
            throw std::invalid_argument("GridFunction: value count does not match grid");
    }

    std::int64_t size() const { return static_cast<std::int64_t>(values.size()); }
    double operator[](std::int64_t i) const { return values[static_cast<size_t>(i)]; }
    double& operator[](std::int64_t i) { return values[static_cast<size_t>(i)]; }

    double sup_norm() const {
        double m = 0.0;
        for (double v : values) m = std::max(m, std::abs(v));
        return m;
    }

    /// Integral against Lebesgue measure (piecewise-constant interpretation).
    double integral() const {
        double s = 0.0;
        for (double v : values) s += v;
        return s * grid.cell_volume();
    }
};

}  // namespace parapot

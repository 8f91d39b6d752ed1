#pragma once

#include <algorithm>
#include <functional>
#include <optional>
#include <utility>

#include "parapot/geometry.hpp"

namespace parapot {

namespace detail {

// 24-point Gauss-Legendre nodes/weights on [-1,1] (upper half; symmetric).
inline const double kGL24x[12] = {
    0.0640568928626056, 0.1911188674736163, 0.3150426796961634, 0.4337935076260451,
    0.5454214713888396, 0.6480936519369755, 0.7401241915785544, 0.8200019859739029,
    0.8864155270044011, 0.9382745520027328, 0.9747285559713095, 0.9951872199970213};
inline const double kGL24w[12] = {
    0.1279381953467522, 0.1258374563468283, 0.1216704729278034, 0.1155056680537256,
    0.1074442701159656, 0.0976186521041139, 0.0861901615319533, 0.0733464814110803,
    0.0592985849154368, 0.0442774388174198, 0.0285313886289337, 0.0123412297999872};

inline double gauss24(const std::function<double(double)>& f, double a, double b) {
    if (!(b > a)) return 0.0;
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double s = 0.0;
    for (int i = 0; i < 12; ++i)
        s += kGL24w[i] * (f(mid - half * kGL24x[i]) + f(mid + half * kGL24x[i]));
    return s * half;
}

inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double b,
                                   double fa, double fm, double fb, double whole, double tol,
                                   int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol, int depth = 24) {
    if (!(b > a)) return 0.0;
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth);
}

}  // namespace detail

/// Volume of B_rho(center) intersected with the axis box [lo,hi] in R^n.
/// n = 1, 2 evaluate through clamped-chord quadrature split at the kink
/// abscissae; higher n recurses with adaptive Simpson on the last axis.
inline double ball_box_overlap(const std::vector<double>& center, double rho,
                               const std::vector<double>& lo, const std::vector<double>& hi) {
    const int n = static_cast<int>(center.size());
    if (!(rho > 0.0)) return 0.0;

    // quick classification against nearest / farthest box point
    double near2 = 0.0, far2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double lod = lo[i] - center[i], hid = hi[i] - center[i];
        const double nr = std::max({lod, -hid, 0.0});
        near2 += nr * nr;
        const double fr = std::max(std::abs(lod), std::abs(hid));
        far2 += fr * fr;
    }
    if (near2 >= rho * rho) return 0.0;
    if (far2 <= rho * rho) {
        double v = 1.0;
        for (int i = 0; i < n; ++i) v *= hi[i] - lo[i];
        return v;
    }

    if (n == 1) {
        return std::max(0.0, std::min(hi[0], center[0] + rho) - std::max(lo[0], center[0] - rho));
    }

    // Integrate the (n-1)-dimensional section over the last axis with the
    // substitution x = c + rho sin(theta), which removes the square-root
    // endpoint singularity of the section size.
    const double c = center[n - 1];
    const double a = std::max(lo[n - 1], c - rho), b = std::min(hi[n - 1], c + rho);
    if (!(b > a)) return 0.0;
    const double ta = std::asin(std::clamp((a - c) / rho, -1.0, 1.0));
    const double tb = std::asin(std::clamp((b - c) / rho, -1.0, 1.0));

    if (n == 2) {
        const double cy = center[0];
        const double ylo = lo[0], yhi = hi[0];
        auto chord = [&](double th) {
            const double w = rho * std::cos(th);
            const double len = std::max(0.0, std::min(yhi, cy + w) - std::max(ylo, cy - w));
            return len * w;  // includes dx = rho cos(theta) dtheta, w = rho cos(theta)
        };
        // kinks where the chord hits a y-face
        std::vector<double> cuts{ta, tb};
        for (double y : {ylo, yhi}) {
            const double cosv = std::abs(y - cy) / rho;
            if (cosv < 1.0) {
                const double th0 = std::acos(cosv);
                for (double th : {-th0, th0})
                    if (th > ta && th < tb) cuts.push_back(th);
            }
        }
        std::sort(cuts.begin(), cuts.end());
        double area = 0.0;
        for (size_t i = 0; i + 1 < cuts.size(); ++i)
            area += detail::gauss24(chord, cuts[i], cuts[i + 1]);
        return area;
    }

    std::vector<double> sc(center.begin(), center.end() - 1);
    std::vector<double> slo(lo.begin(), lo.end() - 1), shi(hi.begin(), hi.end() - 1);
    auto section = [&](double th) {
        const double r = rho * std::cos(th);
        if (!(r > 0.0)) return 0.0;
        return ball_box_overlap(sc, r, slo, shi) * r;
    };
    double scale = 1.0;
    for (int i = 0; i < n; ++i) scale *= hi[i] - lo[i];
    return detail::adaptive_simpson(section, ta, tb, 1e-12 * std::max(scale, 1e-30));
}

struct Atom {
    SpaceTimePoint z;
    double mass = 0.0;
};

// Signed space-time Radon measure: weighted Dirac atoms plus an optional
// piecewise-constant density.  When density_on_t0_slab is set the density
// grid's time axis is ignored and the values are spatial densities carried
// by the slice {t = grid.t_begin} (sigma (x) delta_{t=0} data).
struct DiscreteMeasure {
    int dim = 0;
    std::vector<Atom> atoms;
    std::optional<GridFunction> density;
    bool density_on_t0_slab = false;

    DiscreteMeasure() = default;
    explicit DiscreteMeasure(int n) : dim(n) {}

    void add_atom(SpaceTimePoint z, double mass) {
        if (z.dim() != dim) throw std::invalid_argument("DiscreteMeasure: atom dimension mismatch");
        atoms.push_back({std::move(z), mass});
    }

    double slab_time() const { return density ? density->grid.t_begin : 0.0; }

    bool has_density() const { return density.has_value(); }

    /// Mass carried by one density cell.
    double density_cell_mass(std::int64_t cell) const {
        const GridFunction& f = *density;
        const double v = density_on_t0_slab ? f.grid.spatial_cell_volume() : f.grid.cell_volume();
        return f[cell] * v;
    }

    double total_variation() const {
        double s = 0.0;
        for (const Atom& a : atoms) s += std::abs(a.mass);
        if (density)
            for (std::int64_t i = 0; i < density->size(); ++i)
                s += std::abs(density_cell_mass(i));
        return s;
    }

    double total_mass() const {
        double s = 0.0;
        for (const Atom& a : atoms) s += a.mass;
        if (density)
            for (std::int64_t i = 0; i < density->size(); ++i) s += density_cell_mass(i);
        return s;
    }

    bool is_nonnegative() const {
        for (const Atom& a : atoms)
            if (a.mass < 0.0) return false;
        if (density)
            for (double v : density->values)
                if (v < 0.0) return false;
        return true;
    }

    bool empty() const { return atoms.empty() && !density; }

    DiscreteMeasure scaled(double lambda) const {
        DiscreteMeasure out = *this;
        for (Atom& a : out.atoms) a.mass *= lambda;
        if (out.density)
            for (double& v : out.density->values) v *= lambda;
        return out;
    }

    /// Support points: atoms plus centers of nonzero density cells.
    std::vector<SpaceTimePoint> support_points() const {
        std::vector<SpaceTimePoint> pts;
        for (const Atom& a : atoms) pts.push_back(a.z);
        if (density) {
            for (std::int64_t i = 0; i < density->size(); ++i) {
                if ((*density)[i] != 0.0) {
                    SpaceTimePoint c = density->grid.cell_center(i);
                    if (density_on_t0_slab) c.t = slab_time();
                    pts.push_back(std::move(c));
                }
            }
        }
        return pts;
    }
};

/// mu(c): exact atom sum plus density integrated by overlap quadrature.
inline double cylinder_measure(const DiscreteMeasure& mu, const ParabolicCylinder& c) {
    double total = 0.0;
    for (const Atom& a : mu.atoms)
        if (c.contains(a.z)) total += a.mass;

    if (mu.density) {
        const GridFunction& f = *mu.density;
        const GridSpec& g = f.grid;
        const std::int64_t ns = g.spatial_cell_count();
        std::vector<double> lo, hi;
        std::vector<double> cxy(c.center.x);

        if (mu.density_on_t0_slab) {
            if (!c.contains_time(mu.slab_time())) return total;
            for (std::int64_t s = 0; s < ns; ++s) {
                if (f[s] == 0.0) continue;
                g.cell_bounds(s, lo, hi);
                const double ov = ball_box_overlap(cxy, c.radius, lo, hi);
                if (ov > 0.0) total += f[s] * ov;
            }
            return total;
        }

        // time overlap is shared by all cells of a step
        std::vector<double> tw(g.steps, 0.0);
        bool any = false;
        for (int k = 0; k < g.steps; ++k) {
            const double a = g.t_begin + k * g.dt(), b = a + g.dt();
            const double w = std::max(0.0, std::min(b, c.t_hi()) - std::max(a, c.t_lo()));
            tw[k] = w;
            any = any || w > 0.0;
        }
        if (!any) return total;

        for (std::int64_t s = 0; s < ns; ++s) {
            double col = 0.0;
            for (int k = 0; k < g.steps; ++k)
                if (tw[k] > 0.0) col += f[k * ns + s] * tw[k];
            if (col == 0.0) continue;
            g.cell_bounds(s, lo, hi);
            const double ov = ball_box_overlap(cxy, c.radius, lo, hi);
            if (ov > 0.0) total += col * ov;
        }
    }
    return total;
}

/// Positive/negative parts: mu = mu+ - mu-, |mu| = mu+ + mu-.
inline std::pair<DiscreteMeasure, DiscreteMeasure> decompose_signed(const DiscreteMeasure& mu) {
    DiscreteMeasure pos(mu.dim), neg(mu.dim);
    for (const Atom& a : mu.atoms) {
        if (a.mass > 0.0) pos.atoms.push_back(a);
        else if (a.mass < 0.0) neg.atoms.push_back({a.z, -a.mass});
    }
    if (mu.density) {
        GridFunction fp(mu.density->grid), fn(mu.density->grid);
        for (std::int64_t i = 0; i < mu.density->size(); ++i) {
            const double v = (*mu.density)[i];
            fp[i] = std::max(v, 0.0);
            fn[i] = std::max(-v, 0.0);
        }
        pos.density = std::move(fp);
        pos.density_on_t0_slab = mu.density_on_t0_slab;
        neg.density = std::move(fn);
        neg.density_on_t0_slab = mu.density_on_t0_slab;
    }
    return {std::move(pos), std::move(neg)};
}

inline DiscreteMeasure abs_measure(const DiscreteMeasure& mu) {
    auto [p, n] = decompose_signed(mu);
    for (const Atom& a : n.atoms) p.atoms.push_back(a);
    if (n.density) {
        if (p.density)
            for (std::int64_t i = 0; i < p.density->size(); ++i) (*p.density)[i] += (*n.density)[i];
        else
            p.density = n.density;
    }
    return p;
}

/// mu restricted to a cylinder; density cells are scaled by their overlap fraction.
inline DiscreteMeasure restrict_to(const DiscreteMeasure& mu, const ParabolicCylinder& c) {
    DiscreteMeasure out(mu.dim);
    for (const Atom& a : mu.atoms)
        if (c.contains(a.z)) out.atoms.push_back(a);
    if (mu.density) {
        const GridSpec& g = mu.density->grid;
        GridFunction f(g);
        const std::int64_t ns = g.spatial_cell_count();
        std::vector<double> lo, hi;
        for (std::int64_t s = 0; s < ns; ++s) {
            g.cell_bounds(s, lo, hi);
            const double ov = ball_box_overlap(c.center.x, c.radius, lo, hi);
            if (ov <= 0.0) continue;
            const double spatial_frac = ov / g.spatial_cell_volume();
            if (mu.density_on_t0_slab) {
                if (c.contains_time(mu.slab_time()))
                    for (int k = 0; k < g.steps; ++k)
                        f[k * ns + s] = (*mu.density)[k * ns + s] * spatial_frac;
            } else {
                for (int k = 0; k < g.steps; ++k) {
                    const double a = g.t_begin + k * g.dt(), b = a + g.dt();
                    const double w =
                        std::max(0.0, std::min(b, c.t_hi()) - std::max(a, c.t_lo())) / g.dt();
                    if (w > 0.0) f[k * ns + s] = (*mu.density)[k * ns + s] * spatial_frac * w;
                }
            }
        }
        out.density = std::move(f);
        out.density_on_t0_slab = mu.density_on_t0_slab;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Spatial (elliptic) measures on R^N

struct SpatialAtom {
    std::vector<double> x;
    double mass = 0.0;
};

struct SpatialMeasure {
    int dim = 0;
    std::vector<SpatialAtom> atoms;
    std::optional<GridSpec> density_grid;  // time fields ignored
    std::vector<double> density_values;

    SpatialMeasure() = default;
    explicit SpatialMeasure(int n) : dim(n) {}

    void add_atom(std::vector<double> x, double mass) {
        if (static_cast<int>(x.size()) != dim)
            throw std::invalid_argument("SpatialMeasure: atom dimension mismatch");
        atoms.push_back({std::move(x), mass});
    }

    bool has_density() const { return density_grid.has_value(); }

    bool is_nonnegative() const {
        for (const SpatialAtom& a : atoms)
            if (a.mass < 0.0) return false;
        for (double v : density_values)
            if (v < 0.0) return false;
        return true;
    }

    double total_mass() const {
        double s = 0.0;
        for (const SpatialAtom& a : atoms) s += a.mass;
        if (density_grid) {
            const double v = density_grid->spatial_cell_volume();
            for (double d : density_values) s += d * v;
        }
        return s;
    }
};

/// omega(B_rho(x)).
inline double ball_measure(const SpatialMeasure& omega, const std::vector<double>& x, double rho) {
    double total = 0.0;
    for (const SpatialAtom& a : omega.atoms) {
        double s = 0.0;
        for (int i = 0; i < omega.dim; ++i) s += (a.x[i] - x[i]) * (a.x[i] - x[i]);
        if (std::sqrt(s) < rho) total += a.mass;
    }
    if (omega.density_grid) {
        const GridSpec& g = *omega.density_grid;
        std::vector<double> lo, hi;
        for (std::int64_t s = 0; s < g.spatial_cell_count(); ++s) {
            if (omega.density_values[static_cast<size_t>(s)] == 0.0) continue;
            g.cell_bounds(s, lo, hi);
            const double ov = ball_box_overlap(x, rho, lo, hi);
            if (ov > 0.0) total += omega.density_values[static_cast<size_t>(s)] * ov;
        }
    }
    return total;
}

/// mu_1(A) = mu(A x R): project out time.
inline SpatialMeasure project_time(const DiscreteMeasure& mu) {
    SpatialMeasure out(mu.dim);
    for (const Atom& a : mu.atoms) out.atoms.push_back({a.z.x, a.mass});
    if (mu.density) {
        const GridSpec& g = mu.density->grid;
        const std::int64_t ns = g.spatial_cell_count();
        out.density_grid = g;
        out.density_values.assign(static_cast<size_t>(ns), 0.0);
        const double w = mu.density_on_t0_slab ? 1.0 : g.dt();
        for (int k = 0; k < g.steps; ++k)
            for (std::int64_t s = 0; s < ns; ++s)
                out.density_values[static_cast<size_t>(s)] += (*mu.density)[k * ns + s] * w;
        if (mu.density_on_t0_slab) out.density_grid->steps = 1;
    }
    return out;
}

/// d mu_2(x) = || mu(x,.) ||_{L^{q1}(R)} dx; defined for pure densities.
inline SpatialMeasure time_lq_trace(const DiscreteMeasure& mu, double q1) {
    if (!mu.atoms.empty())
        throw std::invalid_argument("time_lq_trace: measure must be a pure density");
    if (!mu.density) return SpatialMeasure(mu.dim);
    if (mu.density_on_t0_slab)
        throw std::invalid_argument("time_lq_trace: slab density has no L^q time trace");
    const GridSpec& g = mu.density->grid;
    const std::int64_t ns = g.spatial_cell_count();
    SpatialMeasure out(mu.dim);
    out.density_grid = g;
    out.density_values.assign(static_cast<size_t>(ns), 0.0);
    for (std::int64_t s = 0; s < ns; ++s) {
        double acc = 0.0;
        for (int k = 0; k < g.steps; ++k)
            acc += std::pow(std::abs((*mu.density)[k * ns + s]), q1) * g.dt();
        out.density_values[static_cast<size_t>(s)] = std::pow(acc, 1.0 / q1);
    }
    return out;
}

/// sigma (x) delta_{t=0} as a space-time measure (atoms on the t=0 slice).
inline DiscreteMeasure tensor_with_time_dirac(const SpatialMeasure& sigma, double t0 = 0.0) {
    DiscreteMeasure out(sigma.dim);
    for (const SpatialAtom& a : sigma.atoms) out.add_atom(SpaceTimePoint(a.x, t0), a.mass);
    if (sigma.density_grid) {
        GridSpec g = *sigma.density_grid;
        g.t_begin = t0;
        g.t_end = t0 + 1.0;
        g.steps = 1;
        out.density = GridFunction(g, sigma.density_values);
        out.density_on_t0_slab = true;
    }
    return out;
}

}  // namespace parapot

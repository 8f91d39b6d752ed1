#pragma once

#include <algorithm>
#include <map>
#include <span>

#include "parapot/kernels.hpp"
#include "parapot/measure.hpp"
#include "parapot/report.hpp"

namespace parapot {

namespace detail {

inline void require_nonnegative(const DiscreteMeasure& mu, const char* who) {
    if (!mu.is_nonnegative())
        throw std::invalid_argument(std::string(who) +
                                    ": signed measure; decompose with decompose_signed first");
}

// Atom entry radii from z, sorted, with cumulative masses.  For rho in
// (radius[k], radius[k+1]] the atom part of mu(Qtil_rho(z)) equals cum[k].
struct AtomProfile {
    std::vector<double> radius;
    std::vector<double> cum;
    bool atom_at_center = false;

    /// Atom mass strictly inside radius rho (open interval value).
    double mass_below(double rho) const {
        auto it = std::lower_bound(radius.begin(), radius.end(), rho);
        const auto k = static_cast<size_t>(it - radius.begin());
        return k == 0 ? 0.0 : cum[k - 1];
    }
    /// Right limit: atoms with entry radius <= rho.
    double mass_at(double rho) const {
        auto it = std::upper_bound(radius.begin(), radius.end(), rho);
        const auto k = static_cast<size_t>(it - radius.begin());
        return k == 0 ? 0.0 : cum[k - 1];
    }
    double total() const { return cum.empty() ? 0.0 : cum.back(); }
};

inline AtomProfile atom_profile(const DiscreteMeasure& mu, const SpaceTimePoint& z) {
    std::vector<std::pair<double, double>> dm;
    dm.reserve(mu.atoms.size());
    AtomProfile out;
    for (const Atom& a : mu.atoms) {
        if (a.mass == 0.0) continue;
        const double d = parabolic_distance(a.z, z);
        if (d == 0.0) out.atom_at_center = true;
        dm.emplace_back(d, a.mass);
    }
    std::sort(dm.begin(), dm.end());
    double acc = 0.0;
    for (const auto& [d, m] : dm) {
        acc += m;
        if (!out.radius.empty() && out.radius.back() == d)
            out.cum.back() = acc;
        else {
            out.radius.push_back(d);
            out.cum.push_back(acc);
        }
    }
    return out;
}

// Density mass in Qtil_rho(z) for an ascending sequence of rho, by a sweep
// over cells ordered by their entry radii.  Cells fully inside contribute
// through a prefix mass; straddling cells get an overlap quadrature.
class CylinderMassSweep {
  public:
    CylinderMassSweep(const DiscreteMeasure& mu, SpaceTimePoint z) : mu_(&mu), z_(std::move(z)) {
        if (!mu.density) return;
        const GridSpec& g = mu.density->grid;
        const std::int64_t ns = g.spatial_cell_count();
        for (std::int64_t cell = 0; cell < mu.density->size(); ++cell) {
            const double v = (*mu.density)[cell];
            if (v == 0.0) continue;
            Entry e;
            e.cell = cell;
            std::vector<double> lo, hi;
            g.cell_bounds(cell % ns, lo, hi);
            double dnear = 0.0, dfar = 0.0;
            for (int i = 0; i < g.dim(); ++i) {
                const double a = lo[i] - z_.x[i], b = hi[i] - z_.x[i];
                const double nr = std::max({a, -b, 0.0});
                dnear += nr * nr;
                const double fr = std::max(std::abs(a), std::abs(b));
                dfar += fr * fr;
            }
            double t0, t1;
            if (mu.density_on_t0_slab) {
                t0 = t1 = mu.slab_time();
            } else {
                t0 = g.cell_t_lo(cell);
                t1 = g.cell_t_hi(cell);
            }
            const double dtn =
                (z_.t >= t0 && z_.t <= t1) ? 0.0 : std::min(std::abs(z_.t - t0), std::abs(z_.t - t1));
            const double dtf = std::max(std::abs(z_.t - t0), std::abs(z_.t - t1));
            e.near = std::max(std::sqrt(dnear), std::sqrt(2.0 * dtn));
            e.far = std::max(std::sqrt(dfar), std::sqrt(2.0 * dtf));
            e.mass = mu.density_cell_mass(cell);
            mass_ += e.mass;
            near_ = std::min(near_, e.near);
            far_ = std::max(far_, e.far);
            entries_.push_back(e);
        }
        by_near_ = entries_;
        std::sort(by_near_.begin(), by_near_.end(),
                  [](const Entry& a, const Entry& b) { return a.near < b.near; });
        std::sort(entries_.begin(), entries_.end(),
                  [](const Entry& a, const Entry& b) { return a.far < b.far; });
    }

    bool empty() const { return entries_.empty(); }
    double total_mass() const { return mass_; }
    double near() const { return near_; }
    double far() const { return far_; }

    /// Density mass of Qtil_rho(z_); rho must not decrease between calls.
    double mass(double rho) {
        while (ifar_ < entries_.size() && entries_[ifar_].far < rho) {
            full_mass_ += entries_[ifar_].mass;
            active_.erase(entries_[ifar_].cell);
            ++ifar_;
        }
        while (inear_ < by_near_.size() && by_near_[inear_].near < rho) {
            if (by_near_[inear_].far >= rho) active_.emplace(by_near_[inear_].cell, by_near_[inear_]);
            ++inear_;
        }
        double m = full_mass_;
        if (!active_.empty()) {
            const GridSpec& g = mu_->density->grid;
            const std::int64_t ns = g.spatial_cell_count();
            std::vector<double> lo, hi;
            const ParabolicCylinder cyl = centered_cylinder(z_, rho);
            for (const auto& [cell, e] : active_) {
                if (e.near >= rho) continue;
                g.cell_bounds(cell % ns, lo, hi);
                const double sp = ball_box_overlap(z_.x, rho, lo, hi);
                if (sp <= 0.0) continue;
                if (mu_->density_on_t0_slab) {
                    if (cyl.contains_time(mu_->slab_time())) m += (*mu_->density)[cell] * sp;
                } else {
                    const double t0 = g.cell_t_lo(cell), t1 = g.cell_t_hi(cell);
                    const double tw =
                        std::max(0.0, std::min(t1, cyl.t_hi()) - std::max(t0, cyl.t_lo()));
                    if (tw > 0.0) m += (*mu_->density)[cell] * sp * tw;
                }
            }
        }
        return m;
    }

  private:
    struct Entry {
        std::int64_t cell = 0;
        double near = 0.0, far = 0.0, mass = 0.0;
    };
    const DiscreteMeasure* mu_;
    SpaceTimePoint z_;
    std::vector<Entry> entries_;   // sorted by far
    std::vector<Entry> by_near_;   // sorted by near
    std::map<std::int64_t, Entry> active_;
    size_t ifar_ = 0, inear_ = 0;
    double full_mass_ = 0.0, mass_ = 0.0;
    double near_ = kInf, far_ = 0.0;
};

inline std::vector<double> log_spaced(double a, double b, int points_per_decade) {
    std::vector<double> v;
    if (!(b > a) || !(a > 0.0)) return v;
    const int n = std::max(2, static_cast<int>(std::ceil(std::log10(b / a) * points_per_decade)) + 1);
    const double la = std::log(a), lb = std::log(b);
    v.reserve(n);
    for (int i = 0; i < n; ++i) v.push_back(std::exp(la + (lb - la) * i / (n - 1)));
    v.front() = a;
    v.back() = b;
    return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Scattered-point potential evaluation

/// I_alpha^R[mu](z) (delta = 0) or the decay-weighted I_alpha^{R,delta}[mu](z).
/// Atom contributions are closed form; density contributions use log-spaced
/// composite quadrature with a power-law extrapolation below rho_min.
inline double riesz_potential(const DiscreteMeasure& mu, const PotentialSpec& spec,
                              const SpaceTimePoint& z) {
    detail::require_nonnegative(mu, "riesz_potential");
    spec.validate(z.dim());
    const double beta = z.dim() + 2.0 - spec.alpha;

    const detail::AtomProfile ap = detail::atom_profile(mu, z);
    if (ap.atom_at_center) return kInf;
    double total = 0.0;
    for (size_t k = 0; k < ap.radius.size(); ++k) {
        const double m = ap.cum[k] - (k == 0 ? 0.0 : ap.cum[k - 1]);
        total += m * riesz_tail(ap.radius[k], beta, spec.R, spec.delta);
    }

    detail::CylinderMassSweep sweep(mu, z);
    if (!sweep.empty()) {
        const double lo = sweep.near() > 0.0 ? sweep.near() : spec.quad.rho_min;
        const double upper = spec.delta == 0.0 ? std::min(spec.R, sweep.far()) : sweep.far();
        if (upper > lo) {
            double prev_f = 0.0, prev_u = 0.0;
            bool first = true;
            double first_mass = -1.0;
            for (double rho : detail::log_spaced(lo, upper, spec.quad.points_per_decade)) {
                const double m = sweep.mass(rho);
                if (first_mass < 0.0) first_mass = m;
                const double f = m * std::pow(rho, -beta) * truncation_weight(rho, spec.R, spec.delta);
                const double u = std::log(rho);
                if (!first) total += 0.5 * (f + prev_f) * (u - prev_u);
                prev_f = f;
                prev_u = u;
                first = false;
            }
            // below the cutoff the mass scales like c rho^{N+2}
            if (sweep.near() == 0.0 && first_mass > 0.0)
                total += first_mass * std::pow(lo, -beta) *
                         truncation_weight(lo, spec.R, spec.delta) / spec.alpha;
        }
        total += sweep.total_mass() * riesz_tail(std::max(upper, lo), beta, spec.R, spec.delta);
    }
    return total;
}

/// M_alpha^R[mu](z) = sup_{0<rho<R} mu(Qtil_rho(z))/rho^{N+2-alpha}; exact for
/// pure atom measures (the sup is a right limit at an entry radius).
inline double maximal_potential(const DiscreteMeasure& mu, const PotentialSpec& spec,
                                const SpaceTimePoint& z) {
    detail::require_nonnegative(mu, "maximal_potential");
    spec.validate(z.dim());
    const double beta = z.dim() + 2.0 - spec.alpha;

    const detail::AtomProfile ap = detail::atom_profile(mu, z);
    if (ap.atom_at_center) return kInf;

    double best = 0.0;
    if (!mu.has_density()) {
        for (size_t k = 0; k < ap.radius.size(); ++k)
            if (ap.radius[k] < spec.R && ap.radius[k] > 0.0)
                best = std::max(best, ap.cum[k] * std::pow(ap.radius[k], -beta));
        return best;
    }

    detail::CylinderMassSweep sweep(mu, z);
    std::vector<double> candidates;
    const double hi_support = std::max(sweep.far(), ap.radius.empty() ? 0.0 : ap.radius.back());
    const double hi = std::min(spec.R, hi_support);
    if (hi > 0.0) {
        const double lo = std::max(std::min(sweep.near() > 0.0 ? sweep.near() : spec.quad.rho_min,
                                            ap.radius.empty() ? kInf : ap.radius.front()),
                                   1e-12 * hi);
        candidates = detail::log_spaced(lo, hi, spec.quad.points_per_decade);
        for (double r : ap.radius)
            if (r > 0.0 && r < spec.R) candidates.push_back(r);
        if (spec.R < kInf && spec.R <= hi_support) candidates.push_back(spec.R * (1.0 - 1e-12));
        std::sort(candidates.begin(), candidates.end());
    }
    for (double rho : candidates) {
        if (!(rho > 0.0) || rho >= spec.R) continue;
        const double m = ap.mass_at(rho) + sweep.mass(rho);
        best = std::max(best, m * std::pow(rho, -beta));
    }
    return best;
}

/// Hardy-Littlewood maximal function of a measure: sup of cylinder averages
/// mu(Qtil_rho)/|Qtil_rho| (the alpha = 0 ratio divided by |Qtil_1|).
inline double hl_maximal(const DiscreteMeasure& mu, double R, const SpaceTimePoint& z) {
    detail::require_nonnegative(mu, "hl_maximal");
    const int N = z.dim();
    const double beta = N + 2.0;
    const detail::AtomProfile ap = detail::atom_profile(mu, z);
    if (ap.atom_at_center) return kInf;
    double best = 0.0;
    for (size_t k = 0; k < ap.radius.size(); ++k)
        if (ap.radius[k] < R && ap.radius[k] > 0.0)
            best = std::max(best, ap.cum[k] * std::pow(ap.radius[k], -beta));
    detail::CylinderMassSweep sweep(mu, z);
    if (!sweep.empty()) {
        const double hi = std::min(R, std::max(sweep.far(), ap.radius.empty() ? 0.0 : ap.radius.back()));
        const double lo = sweep.near() > 0.0 ? sweep.near() : 1e-4 * hi;
        for (double rho : detail::log_spaced(lo, hi, 64)) {
            if (rho >= R) break;
            best = std::max(best, (ap.mass_at(rho) + sweep.mass(rho)) * std::pow(rho, -beta));
        }
    }
    return best / unit_ball_volume(N);
}

/// W_{alpha,p}^{R,delta}[mu](z).  p = 2 shares the Riesz code path exactly
/// (W_{alpha,2} == I_{2 alpha}); atom-only measures use the piecewise closed
/// form between entry radii.
inline double wolff_potential(const DiscreteMeasure& mu, const PotentialSpec& spec,
                              const SpaceTimePoint& z) {
    detail::require_nonnegative(mu, "wolff_potential");
    spec.validate(z.dim());
    const int N = z.dim();
    const double apow = spec.alpha * spec.p;
    if (apow > N + 2.0 + 1e-12)
        throw std::invalid_argument("wolff_potential: alpha p must not exceed N+2");
    if (std::abs(apow - (N + 2.0)) <= 1e-12 && spec.R == kInf)
        throw std::invalid_argument("wolff_potential: alpha p = N+2 requires finite R");

    if (spec.p == 2.0 && 2.0 * spec.alpha < N + 2.0 - 1e-12)
        return riesz_potential(mu, spec.with_alpha(2.0 * spec.alpha), z);

    const double inv = 1.0 / (spec.p - 1.0);
    const double eta = (N + 2.0 - apow) * inv;

    const detail::AtomProfile ap = detail::atom_profile(mu, z);
    if (ap.atom_at_center) return kInf;
    detail::CylinderMassSweep sweep(mu, z);

    const double support_far = std::max(sweep.empty() ? 0.0 : sweep.far(),
                                        ap.radius.empty() ? 0.0 : ap.radius.back());
    if (support_far == 0.0) return 0.0;
    const double upper = spec.delta == 0.0 ? std::min(spec.R, support_far) : support_far;

    double total = 0.0;
    if (sweep.empty()) {
        for (size_t k = 0; k < ap.radius.size(); ++k) {
            const double a = ap.radius[k];
            if (spec.delta == 0.0 && a >= spec.R) break;
            const double b = k + 1 < ap.radius.size() ? ap.radius[k + 1] : upper;
            const double piece_hi = spec.delta == 0.0 ? std::min(b, spec.R) : b;
            if (piece_hi > a)
                total += std::pow(ap.cum[k], inv) *
                         riesz_tail_between(a, eta, spec.R, spec.delta, a, piece_hi);
        }
    } else {
        const double lo = [&] {
            const double dn = std::min(sweep.near() > 0.0 ? sweep.near() : kInf,
                                       ap.radius.empty() ? kInf : ap.radius.front());
            return dn < kInf && dn > 0.0 ? dn : spec.quad.rho_min;
        }();
        if (upper > lo) {
            std::vector<double> rhos = detail::log_spaced(lo, upper, spec.quad.points_per_decade);
            for (double r : ap.radius)
                if (r > lo && r < upper) rhos.push_back(r);
            std::sort(rhos.begin(), rhos.end());
            double prev_f = 0.0, prev_u = 0.0, first_mass = -1.0;
            bool first = true;
            for (double rho : rhos) {
                const double m = ap.mass_below(rho) + sweep.mass(rho);
                if (first_mass < 0.0) first_mass = m;
                const double f = std::pow(std::max(m, 0.0), inv) * std::pow(rho, -eta) *
                                 truncation_weight(rho, spec.R, spec.delta);
                const double u = std::log(rho);
                if (!first) total += 0.5 * (f + prev_f) * (u - prev_u);
                prev_f = f;
                prev_u = u;
                first = false;
            }
            // below the cutoff the mass scales like c rho^{N+2}
            if (sweep.near() == 0.0 && (ap.radius.empty() || ap.radius.front() > 0.0) &&
                first_mass > 0.0) {
                const double expo = apow * inv;  // rho exponent of the integrand near 0
                total += std::pow(first_mass, inv) * std::pow(lo, -eta) *
                         truncation_weight(lo, spec.R, spec.delta) / expo;
            }
        }
    }
    const double mass = ap.total() + (sweep.empty() ? 0.0 : sweep.total_mass());
    if (mass > 0.0)
        total += std::pow(mass, inv) * riesz_tail(std::max(upper, 1e-300), eta, spec.R, spec.delta);
    return total;
}

/// Bound reported by the alpha p = N+2 branch (Remark with user-chosen eps):
/// max{ |mu|^{1/(p-1)}, ((M mu)^eps |mu|^{alpha p/(p-1)} R^{eps alpha p})^{1/(alpha p+eps(p-1))} }.
inline double wolff_critical_bound(const DiscreteMeasure& mu, const PotentialSpec& spec,
                                   const SpaceTimePoint& z, double eps = 0.1) {
    detail::require_nonnegative(mu, "wolff_critical_bound");
    if (spec.R == kInf) throw std::invalid_argument("wolff_critical_bound: requires finite R");
    const double apow = spec.alpha * spec.p;
    const double total = mu.total_mass();
    const double m = hl_maximal(mu, kInf, z);
    const double first = std::pow(total, 1.0 / (spec.p - 1.0));
    const double second =
        std::pow(std::pow(m, eps) * std::pow(total, apow / (spec.p - 1.0)) *
                     std::pow(spec.R, eps * apow),
                 1.0 / (apow + eps * (spec.p - 1.0)));
    return std::max(first, second);
}

// ---------------------------------------------------------------------------
// Kernel convolution

namespace detail {

/// int over y in [lo,hi] of exp(-|x-y|^2/(4 tau)) dy, per axis erf product.
inline double gaussian_box_integral(const std::vector<double>& x, const std::vector<double>& lo,
                                    const std::vector<double>& hi, double tau) {
    double prod = 1.0;
    const double den = 2.0 * std::sqrt(tau);
    for (size_t i = 0; i < x.size(); ++i)
        prod *= std::sqrt(std::numbers::pi * tau) *
                (std::erf((hi[i] - x[i]) / den) - std::erf((lo[i] - x[i]) / den));
    return prod;
}

}  // namespace detail

/// (kernel * mu)(z) with exact atom sums; density cells integrate the heat or
/// Bessel kernel with closed-form spatial erf products and a desingularized
/// time quadrature.  RieszE densities reuse E_alpha * mu = (N+2-alpha) I_alpha[mu].
inline double kernel_convolve(const DiscreteMeasure& mu, const KernelKind& kind,
                              const PotentialSpec& spec, const SpaceTimePoint& z) {
    detail::require_nonnegative(mu, "kernel_convolve");
    spec.validate(z.dim());
    const int N = z.dim();
    double total = 0.0;
    for (const Atom& a : mu.atoms) {
        std::vector<double> dx(N);
        for (int i = 0; i < N; ++i) dx[i] = z.x[i] - a.z.x[i];
        SpaceTimePoint off(std::move(dx), z.t - a.z.t);
        if (kind.family == KernelFamily::RieszE &&
            spatial_distance(off, SpaceTimePoint(std::vector<double>(N, 0.0), 0.0)) == 0.0 &&
            off.t == 0.0)
            throw std::domain_error("kernel_convolve: atom at the evaluation point");
        total += a.mass * kernel_eval(kind, spec, off);
    }
    if (!mu.has_density()) return total;

    if (kind.family == KernelFamily::RieszE) {
        DiscreteMeasure dens(mu.dim);
        dens.density = mu.density;
        dens.density_on_t0_slab = mu.density_on_t0_slab;
        return total + (N + 2.0 - spec.alpha) * riesz_potential(dens, spec, z);
    }

    const bool bessel = kind.family == KernelFamily::BesselG;
    const GridSpec& g = mu.density->grid;
    const std::int64_t ns = g.spatial_cell_count();
    const double calpha = heat_kernel_constant(spec.alpha, N);
    std::vector<double> lo, hi;
    for (std::int64_t s = 0; s < ns; ++s) {
        bool col_nonzero = false;
        if (mu.density_on_t0_slab) {
            col_nonzero = (*mu.density)[s] != 0.0;
        } else {
            for (int k = 0; k < g.steps && !col_nonzero; ++k)
                col_nonzero = (*mu.density)[k * ns + s] != 0.0;
        }
        if (!col_nonzero) continue;
        g.cell_bounds(s, lo, hi);

        if (mu.density_on_t0_slab) {
            const double tau = kind.backward ? mu.slab_time() - z.t : z.t - mu.slab_time();
            if (tau > 0.0) {
                double v = std::pow(tau, -0.5 * (N + 2.0 - spec.alpha)) *
                           detail::gaussian_box_integral(z.x, lo, hi, tau);
                if (bessel) v *= std::exp(-tau);
                total += (*mu.density)[s] * calpha * v;
            }
            continue;
        }

        for (int k = 0; k < g.steps; ++k) {
            const double val = (*mu.density)[k * ns + s];
            if (val == 0.0) continue;
            const double s_lo = g.t_begin + k * g.dt(), s_hi = s_lo + g.dt();
            double ta = kind.backward ? s_lo - z.t : z.t - s_hi;
            double tb = kind.backward ? s_hi - z.t : z.t - s_lo;
            ta = std::max(ta, 0.0);
            if (!(tb > ta)) continue;
            // substitute tau = w^{2/alpha} so the integrand is bounded at 0
            const double ex = 2.0 / spec.alpha;
            auto f = [&](double w) {
                const double tau = std::pow(w, ex);
                if (!(tau > 1e-120)) return 0.0;
                double v = std::pow(tau, -0.5 * (N + 2.0 - spec.alpha)) *
                           detail::gaussian_box_integral(z.x, lo, hi, tau);
                if (bessel) v *= std::exp(-tau);
                return v * ex * std::pow(w, ex - 1.0);
            };
            const double wa = std::pow(ta, 0.5 * spec.alpha), wb = std::pow(tb, 0.5 * spec.alpha);
            double acc = 0.0;
            const int panels = 16;
            for (int q = 0; q < panels; ++q)
                acc += detail::gauss24(f, wa + (wb - wa) * q / panels,
                                       wa + (wb - wa) * (q + 1) / panels);
            total += val * calpha * acc;
        }
    }
    return total;
}

// ---------------------------------------------------------------------------
// Dyadic Wolff sum

/// V_{P_alpha,p}^mu(z) = sum_n min{1, 2^{(n-n_R) delta}} 2^{n p'(N+2-alpha)}
///     (chi_{Qtil_{2^-n}} * (chi_{Qtil_{2^-n}} * mu)^{p'-1})(z);
/// two-sided comparable to W_{alpha,p}^{R,delta}[mu].  The outer convolution
/// is sampled on a midpoint lattice inside the cylinder.
inline double dyadic_wolff(const DiscreteMeasure& mu, const PotentialSpec& spec,
                           const SpaceTimePoint& z, int n_lo = INT32_MIN, int n_hi = INT32_MAX,
                           int samples_per_axis = 4) {
    detail::require_nonnegative(mu, "dyadic_wolff");
    spec.validate(z.dim());
    const int N = z.dim();
    const double pprime = spec.p_conjugate();
    const double kappa = (N + 2.0 - spec.alpha * spec.p) / (spec.p - 1.0);

    const detail::AtomProfile ap = detail::atom_profile(mu, z);
    if (ap.atom_at_center) return kInf;
    detail::CylinderMassSweep sweep(mu, z);
    const double d_near = std::min(sweep.empty() ? kInf : sweep.near(),
                                   ap.radius.empty() ? kInf : ap.radius.front());
    const double d_far = std::max(sweep.empty() ? 0.0 : sweep.far(),
                                  ap.radius.empty() ? 0.0 : ap.radius.back());
    if (d_far == 0.0) return 0.0;

    const int n_R = spec.R == kInf ? INT32_MIN : static_cast<int>(std::ceil(-std::log2(spec.R)));
    if (n_hi == INT32_MAX)
        n_hi = static_cast<int>(std::ceil(-std::log2(std::max(d_near, 1e-14) / 8.0))) + 2;
    if (n_lo == INT32_MIN) {
        // large cylinders contribute ~ 2^{n kappa}; go deep enough for 1e-15
        const int n_star = static_cast<int>(std::floor(-std::log2(std::max(d_far, 1e-14))));
        int extra = kappa > 0.0 ? static_cast<int>(std::ceil(50.0 / kappa)) : 256;
        n_lo = n_star - std::min(extra, 256) - 2;
        if (spec.delta == 0.0 && spec.R < kInf) n_lo = std::max(n_lo, n_R);
    }

    double total = 0.0;
    for (int n = n_lo; n <= n_hi; ++n) {
        if (spec.delta == 0.0 && spec.R < kInf && n < n_R) continue;
        double weight = 1.0;
        if (spec.delta > 0.0 && n_R != INT32_MIN)
            weight = std::min(1.0, std::pow(2.0, (n - n_R) * spec.delta));
        const double rho = std::pow(2.0, -n);
        if (d_near > 4.0 * rho) continue;  // no cylinder around a sample can reach the support

        const int m = samples_per_axis;
        std::vector<int> idx(N + 1, 0);
        double acc = 0.0;
        std::int64_t inside = 0;
        SpaceTimePoint y(std::vector<double>(N, 0.0), 0.0);
        while (true) {
            double r2 = 0.0;
            for (int i = 0; i < N; ++i) {
                y.x[i] = z.x[i] + rho * (2.0 * (idx[i] + 0.5) / m - 1.0);
                const double dxi = y.x[i] - z.x[i];
                r2 += dxi * dxi;
            }
            y.t = z.t + 0.5 * rho * rho * (2.0 * (idx[N] + 0.5) / m - 1.0);
            if (r2 < rho * rho) {
                ++inside;
                const double mv = cylinder_measure(mu, centered_cylinder(y, rho));
                if (mv > 0.0) acc += std::pow(mv, pprime - 1.0);
            }
            int ax = 0;
            while (ax <= N && ++idx[ax] == m) idx[ax++] = 0;
            if (ax > N) break;
        }
        if (acc == 0.0 || inside == 0) continue;
        const double integral = acc / inside * unit_ball_volume(N) * std::pow(rho, N + 2.0);
        total += weight * std::pow(2.0, n * pprime * (N + 2.0 - spec.alpha)) * integral;
    }
    return total;
}

// ---------------------------------------------------------------------------
// Discrete lower-bound sums

/// Support geometry summary used by truncation rules.
struct SupportInfo {
    std::vector<SpaceTimePoint> points;
    double margin = 0.0;  // parabolic half-diameter of density cells
    double t_min = kInf, t_max = -kInf;
};

inline SupportInfo support_info(const DiscreteMeasure& mu) {
    SupportInfo s;
    s.points = mu.support_points();
    for (const SpaceTimePoint& p : s.points) {
        s.t_min = std::min(s.t_min, p.t);
        s.t_max = std::max(s.t_max, p.t);
    }
    if (mu.has_density()) {
        const GridSpec& g = mu.density->grid;
        double d2 = 0.0;
        for (int i = 0; i < g.dim(); ++i) d2 += 0.25 * g.spacing(i) * g.spacing(i);
        const double tm = mu.density_on_t0_slab ? 0.0 : 0.5 * g.dt();
        s.margin = std::max(std::sqrt(d2), std::sqrt(2.0 * tm));
        s.t_min -= tm;
        s.t_max += tm;
    }
    return s;
}

inline double support_distance(const SupportInfo& s, const SpaceTimePoint& z) {
    double d = kInf;
    for (const SpaceTimePoint& p : s.points) d = std::min(d, parabolic_distance(p, z));
    return std::max(0.0, d - s.margin);
}

/// Discrete lower-bound sum over backward cylinders.
///   finite r:  sum_{k>=0} mu(Q_{r_k/8}(y, s - (35/128) r_k^2)) / r_k^N, r_k = 4^{-k} r
///   r = inf :  sum_{k in Z} mu(Q_{2^{-2k-3}}(x, t - 35 2^{-4k-7})) / 2^{-2Nk}
inline double discrete_lower_sum(const DiscreteMeasure& mu, const SpaceTimePoint& z, double r) {
    detail::require_nonnegative(mu, "discrete_lower_sum");
    const int N = z.dim();
    const SupportInfo sup = support_info(mu);
    if (sup.points.empty()) return 0.0;
    const double d0 = support_distance(sup, z);

    double total = 0.0;
    if (r < kInf) {
        double rk = r;
        for (int k = 0; k <= 2000; ++k, rk *= 0.25) {
            if (d0 > 0.0 && 0.8 * rk < d0) break;  // cylinder k stays in B_par(z, 0.8 r_k)
            SpaceTimePoint c = z;
            c.t = z.t - 35.0 / 128.0 * rk * rk;
            const double m = cylinder_measure(mu, backward_cylinder(c, rk / 8.0));
            if (m > 0.0) total += m / std::pow(rk, N);
        }
        return total;
    }

    if (z.t < sup.t_min) return 0.0;
    int k_lo = -60;
    if (z.t > sup.t_min) {
        const double gap = (z.t - sup.t_min) / 35.0;
        k_lo = static_cast<int>(std::floor(-(std::log2(gap) + 7.0) / 4.0)) - 1;
    }
    int k_hi = 60;
    if (d0 > 0.0)
        k_hi = std::min(k_hi, static_cast<int>(std::ceil(-0.5 * std::log2(d0 / 1.8))) + 1);
    for (int k = k_lo; k <= k_hi; ++k) {
        const double rho = std::pow(2.0, -2.0 * k - 3.0);
        SpaceTimePoint c = z;
        c.t = z.t - 35.0 * std::pow(2.0, -4.0 * k - 7.0);
        const double m = cylinder_measure(mu, backward_cylinder(c, rho));
        if (m > 0.0) total += m / std::pow(2.0, -2.0 * N * k);
    }
    return total;
}

// ---------------------------------------------------------------------------
// Elliptic potential

/// I_alpha[omega](x) = int_0^inf omega(B_rho(x)) rho^{alpha-N} drho/rho, 0<alpha<N.
inline double elliptic_riesz_potential(const SpatialMeasure& omega, double alpha,
                                       const std::vector<double>& x,
                                       const Quadrature& quad = Quadrature{}) {
    if (!omega.is_nonnegative())
        throw std::invalid_argument("elliptic_riesz_potential: signed measure");
    const int N = static_cast<int>(x.size());
    if (!(alpha > 0.0) || !(alpha < N))
        throw std::invalid_argument("elliptic_riesz_potential: alpha must lie in (0, N)");
    const double beta = N - alpha;

    double total = 0.0;
    std::vector<std::pair<double, double>> atom_d;  // (distance, mass)
    for (const SpatialAtom& a : omega.atoms) {
        double s = 0.0;
        for (int i = 0; i < N; ++i) s += (a.x[i] - x[i]) * (a.x[i] - x[i]);
        const double d = std::sqrt(s);
        if (d == 0.0 && a.mass != 0.0) return kInf;
        atom_d.emplace_back(d, a.mass);
        total += a.mass * std::pow(d, -beta) / beta;
    }
    if (!omega.has_density()) return total;
    std::sort(atom_d.begin(), atom_d.end());

    const GridSpec& g = *omega.density_grid;
    double near = kInf, far = 0.0, mass = 0.0;
    std::vector<double> lo, hi;
    for (std::int64_t s = 0; s < g.spatial_cell_count(); ++s) {
        const double v = omega.density_values[static_cast<size_t>(s)];
        if (v == 0.0) continue;
        mass += v * g.spatial_cell_volume();
        g.cell_bounds(s, lo, hi);
        double dnear = 0.0, dfar = 0.0;
        for (int i = 0; i < N; ++i) {
            const double a = lo[i] - x[i], b = hi[i] - x[i];
            const double nr = std::max({a, -b, 0.0});
            dnear += nr * nr;
            const double fr = std::max(std::abs(a), std::abs(b));
            dfar += fr * fr;
        }
        near = std::min(near, std::sqrt(dnear));
        far = std::max(far, std::sqrt(dfar));
    }
    if (mass == 0.0) return total;

    auto density_ball = [&](double rho) {
        double m = ball_measure(omega, x, rho);
        auto it = std::lower_bound(atom_d.begin(), atom_d.end(), std::make_pair(rho, -kInf));
        for (auto j = atom_d.begin(); j != it; ++j) m -= j->second;
        return m;
    };

    const double lo_r = near > 0.0 ? near : quad.rho_min;
    if (far > lo_r) {
        double prev_f = 0.0, prev_u = 0.0, first_mass = -1.0;
        bool first = true;
        for (double rho : detail::log_spaced(lo_r, far, quad.points_per_decade)) {
            const double m = density_ball(rho);
            if (first_mass < 0.0) first_mass = m;
            const double f = m * std::pow(rho, -beta);
            const double u = std::log(rho);
            if (!first) total += 0.5 * (f + prev_f) * (u - prev_u);
            prev_f = f;
            prev_u = u;
            first = false;
        }
        if (near == 0.0 && first_mass > 0.0)
            total += first_mass * std::pow(lo_r, -beta) / alpha;  // mass ~ c rho^N below cutoff
    }
    total += mass * std::pow(far, -beta) / beta;
    return total;
}

// ---------------------------------------------------------------------------
// Grid evaluation

enum class PotentialOp { Riesz, Maximal, Wolff, Dyadic };

/// Evaluate one potential at every cell center of `grid`.
inline GridFunction potential_field(const DiscreteMeasure& mu, const PotentialSpec& spec,
                                    PotentialOp op, const GridSpec& grid) {
    GridFunction out(grid);
    for (std::int64_t i = 0; i < out.size(); ++i) {
        const SpaceTimePoint z = grid.cell_center(i);
        switch (op) {
            case PotentialOp::Riesz: out[i] = riesz_potential(mu, spec, z); break;
            case PotentialOp::Maximal: out[i] = maximal_potential(mu, spec, z); break;
            case PotentialOp::Wolff: out[i] = wolff_potential(mu, spec, z); break;
            case PotentialOp::Dyadic: out[i] = dyadic_wolff(mu, spec, z); break;
        }
    }
    return out;
}

/// Average of the Riesz tail kernel K(d(z,.)) over one space-time cell, via
/// the layer-cake identity int_cell K = int rho^{-beta} w(rho) |cell ∩ Qtil_rho(z)| drho/rho.
inline double riesz_tail_cell_average(const SpaceTimePoint& z, const GridSpec& g,
                                      std::int64_t cell, double beta, double R, double delta) {
    std::vector<double> lo, hi;
    g.cell_bounds(cell, lo, hi);
    const double t0 = g.cell_t_lo(cell), t1 = g.cell_t_hi(cell);
    double far2 = 0.0;
    for (int i = 0; i < g.dim(); ++i) {
        const double fr = std::max(std::abs(lo[i] - z.x[i]), std::abs(hi[i] - z.x[i]));
        far2 += fr * fr;
    }
    const double dt_far = std::max(std::abs(z.t - t0), std::abs(z.t - t1));
    const double far = std::max(std::sqrt(far2), std::sqrt(2.0 * dt_far));
    const auto rhos = detail::log_spaced(std::max(far * 1e-5, 1e-300), far, 48);
    double acc = 0.0, prev_f = 0.0, prev_u = 0.0;
    bool first = true;
    for (double rho : rhos) {
        const double sp = ball_box_overlap(z.x, rho, lo, hi);
        const double tw = std::max(0.0, std::min(t1, z.t + 0.5 * rho * rho) -
                                            std::max(t0, z.t - 0.5 * rho * rho));
        const double f = sp * tw * std::pow(rho, -beta) * truncation_weight(rho, R, delta);
        const double u = std::log(rho);
        if (!first) acc += 0.5 * (f + prev_f) * (u - prev_u);
        prev_f = f;
        prev_u = u;
        first = false;
    }
    const double cellvol = g.spatial_cell_volume() * (t1 - t0);
    acc += cellvol * riesz_tail(far, beta, R, delta);
    return acc / cellvol;
}

/// Midpoint 3^{N+1}-subcell average of the tail kernel over a cell.
inline double riesz_tail_cell_midpoints(const SpaceTimePoint& z, const GridSpec& g,
                                        std::int64_t cell, double beta, double R, double delta) {
    std::vector<double> lo, hi;
    g.cell_bounds(cell, lo, hi);
    const double t0 = g.cell_t_lo(cell), t1 = g.cell_t_hi(cell);
    const int N = g.dim();
    std::vector<int> idx(N + 1, 0);
    SpaceTimePoint y(std::vector<double>(N, 0.0), 0.0);
    double acc = 0.0;
    int count = 0;
    while (true) {
        for (int i = 0; i < N; ++i)
            y.x[i] = lo[i] + (hi[i] - lo[i]) * (idx[i] + 0.5) / 3.0;
        y.t = t0 + (t1 - t0) * (idx[N] + 0.5) / 3.0;
        acc += riesz_tail(parabolic_distance(z, y), beta, R, delta);
        ++count;
        int ax = 0;
        while (ax <= N && ++idx[ax] == 3) idx[ax++] = 0;
        if (ax > N) break;
    }
    return acc / count;
}

// Dense operator applying f -> I_alpha^{R,delta}[f dxdt] at the cell centers
// of eval_grid from a density on src_grid.
struct RieszMatrix {
    std::int64_t rows = 0, cols = 0;
    std::vector<double> a;

    void apply(std::span<const double> f, std::span<double> out) const {
        for (std::int64_t i = 0; i < rows; ++i) {
            double s = 0.0;
            const double* row = a.data() + i * cols;
            for (std::int64_t j = 0; j < cols; ++j) s += row[j] * f[static_cast<size_t>(j)];
            out[static_cast<size_t>(i)] = s;
        }
    }
};

inline RieszMatrix riesz_density_matrix(const GridSpec& eval_grid, const GridSpec& src_grid,
                                        const PotentialSpec& spec) {
    spec.validate(eval_grid.dim());
    const double beta = eval_grid.dim() + 2.0 - spec.alpha;
    RieszMatrix M;
    M.rows = eval_grid.total_cell_count();
    M.cols = src_grid.total_cell_count();
    M.a.assign(static_cast<size_t>(M.rows * M.cols), 0.0);
    const double cellvol = src_grid.cell_volume();
    double diag2 = 0.0;
    for (int i = 0; i < src_grid.dim(); ++i) diag2 += src_grid.spacing(i) * src_grid.spacing(i);
    const double cell_reach = std::max(std::sqrt(diag2), std::sqrt(2.0 * src_grid.dt()));

    for (std::int64_t i = 0; i < M.rows; ++i) {
        const SpaceTimePoint z = eval_grid.cell_center(i);
        double* row = M.a.data() + i * M.cols;
        for (std::int64_t j = 0; j < M.cols; ++j) {
            const SpaceTimePoint c = src_grid.cell_center(j);
            const double d = parabolic_distance(z, c);
            if (d > 3.0 * cell_reach)
                row[j] = riesz_tail(d, beta, spec.R, spec.delta) * cellvol;
            else if (d > 1.4 * cell_reach)
                row[j] =
                    riesz_tail_cell_midpoints(z, src_grid, j, beta, spec.R, spec.delta) * cellvol;
            else
                row[j] = riesz_tail_cell_average(z, src_grid, j, beta, spec.R, spec.delta) * cellvol;
        }
    }
    return M;
}

// ---------------------------------------------------------------------------
// Time-slice bounds (branches b and c of the L^q-in-time proposition)

/// || I_1[mu](x,.) ||_{L^q(R)} by composite quadrature on a log-refined grid.
inline double time_slice_lq(const DiscreteMeasure& mu, double q, const std::vector<double>& x,
                            double window = 1e4) {
    const SupportInfo sup = support_info(mu);
    if (sup.points.empty()) return 0.0;
    std::vector<double> ts;
    for (double anchor : {sup.t_min, sup.t_max}) {
        for (double off : detail::log_spaced(1e-9, window, 24)) {
            ts.push_back(anchor - off);
            ts.push_back(anchor + off);
        }
    }
    if (sup.t_max > sup.t_min)
        for (int i = 0; i <= 64; ++i)
            ts.push_back(sup.t_min + (sup.t_max - sup.t_min) * i / 64.0);
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());

    PotentialSpec s;
    s.alpha = 1.0;
    double acc = 0.0, prev_v = 0.0, prev_t = 0.0;
    bool first = true;
    for (double t : ts) {
        const double v = std::pow(riesz_potential(mu, s, SpaceTimePoint(x, t)), q);
        if (!first) acc += 0.5 * (v + prev_v) * (t - prev_t);
        prev_v = v;
        prev_t = t;
        first = false;
    }
    return std::pow(acc, 1.0 / q);
}

/// Branch (b): ||I_1[mu](x,.)||_{L^q(R)} <= I_{2/q-1}[mu_1](x) for 1 < q < 2.
/// Branch (c): ... <= I_{2/q+1-2/q1}[mu_2](x) for 2q/(q+2) < q1 <= q.
inline VerificationReport time_slice_bound_check(const DiscreteMeasure& mu, double q,
                                                 const std::vector<double>& x,
                                                 std::optional<double> q1 = std::nullopt,
                                                 double tol = 1e-6) {
    detail::require_nonnegative(mu, "time_slice_bound_check");
    VerificationReport rep;
    rep.check = q1 ? "time_slice_bound_c" : "time_slice_bound_b";
    rep.params = {{"q", q}, {"x", x}};
    if (!q1) {
        if (!(q > 1.0 && q < 2.0))
            throw std::invalid_argument("time_slice_bound_check: branch (b) needs 1 < q < 2");
    } else {
        rep.params["q1"] = *q1;
        if (!(*q1 > 2.0 * q / (q + 2.0) && *q1 <= q))
            throw std::invalid_argument("time_slice_bound_check: branch (c) needs 2q/(q+2) < q1 <= q");
    }
    const double lhs = time_slice_lq(mu, q, x);
    const double rhs = !q1 ? elliptic_riesz_potential(project_time(mu), 2.0 / q - 1.0, x)
                           : elliptic_riesz_potential(time_lq_trace(mu, *q1),
                                                      2.0 / q + 1.0 - 2.0 / *q1, x);
    rep.fitted_constants["lhs"] = lhs;
    rep.fitted_constants["rhs"] = rhs;
    if (!std::isfinite(rhs)) {
        rep.worst_ratio = 0.0;
        rep.pass = true;
        rep.status = "rhs infinite";
        return rep;
    }
    rep.worst_ratio = rhs > 0.0 ? lhs / rhs : (lhs > 0.0 ? kInf : 0.0);
    rep.pass = lhs <= rhs * (1.0 + tol) + tol * tol;
    return rep;
}

}  // namespace parapot

#pragma once

#include "parapot/geometry.hpp"
#include "parapot/measure.hpp"

namespace parapot {

// Quadrature controls for the d(rho)/rho integrals.  rho_max = 0 means
// "derive from the measure support"; the tail past it is closed form.
struct Quadrature {
    double rho_min = 1e-6;
    double rho_max = 0.0;
    int points_per_decade = 64;
};

// Parameter bundle selecting one potential operator.
//   alpha in (0, N+2); p > 1 for Wolff; R in (0, inf]; delta in [0, alpha).
// delta = 0 selects the sharp truncation at R; delta > 0 selects the
// min{1, (rho/R)^{-delta}} decay weight with the integral running to infinity.
struct PotentialSpec {
    double alpha = 1.0;
    double p = 2.0;
    double R = kInf;
    double delta = 0.0;
    Quadrature quad;

    void validate(int N) const {
        if (!(alpha > 0.0) || !(alpha < N + 2.0))
            throw std::invalid_argument("PotentialSpec: alpha must lie in (0, N+2)");
        if (!(p > 1.0)) throw std::invalid_argument("PotentialSpec: p must exceed 1");
        if (!(R > 0.0)) throw std::invalid_argument("PotentialSpec: R must be positive");
        if (delta < 0.0 || (delta > 0.0 && delta >= alpha))
            throw std::invalid_argument("PotentialSpec: delta must lie in [0, alpha)");
        if (delta > 0.0 && !(R < kInf))
            throw std::invalid_argument("PotentialSpec: delta > 0 requires finite R");
    }

    double p_conjugate() const { return p / (p - 1.0); }

    PotentialSpec with_alpha(double a) const {
        PotentialSpec s = *this;
        s.alpha = a;
        return s;
    }
};

enum class KernelFamily { HeatH, BesselG, RieszE };

struct KernelKind {
    KernelFamily family = KernelFamily::HeatH;
    bool backward = false;
};

/// C_alpha = ((4 pi)^{N/2} Gamma(alpha/2))^{-1}.
inline double heat_kernel_constant(double alpha, int N) {
    return 1.0 / (std::pow(4.0 * std::numbers::pi, 0.5 * N) * std::tgamma(0.5 * alpha));
}

/// H_alpha(x,t) = C_alpha t^{-(N+2-alpha)/2} exp(-|x|^2/4t) for t > 0, else 0.
inline double heat_kernel(const std::vector<double>& x, double t, double alpha) {
    if (!(t > 0.0)) return 0.0;
    const int N = static_cast<int>(x.size());
    double xx = 0.0;
    for (double v : x) xx += v * v;
    return heat_kernel_constant(alpha, N) * std::pow(t, -0.5 * (N + 2.0 - alpha)) *
           std::exp(-xx / (4.0 * t));
}

/// G_alpha = exp(-t) H_alpha.
inline double bessel_kernel(const std::vector<double>& x, double t, double alpha) {
    if (!(t > 0.0)) return 0.0;
    return std::exp(-t) * heat_kernel(x, t, alpha);
}

/// Spatial gradient of H_2 (closed form, used as a test oracle).
inline std::vector<double> heat_kernel_gradient(const std::vector<double>& x, double t) {
    std::vector<double> g(x.size(), 0.0);
    if (!(t > 0.0)) return g;
    const double h = heat_kernel(x, t, 2.0);
    for (size_t i = 0; i < x.size(); ++i) g[i] = -x[i] / (2.0 * t) * h;
    return g;
}

/// Decay factor of E_alpha^{R,delta} at parabolic radius d.
inline double truncation_weight(double d, double R, double delta) {
    if (R == kInf) return 1.0;
    if (delta == 0.0) return d < R ? 1.0 : 0.0;
    return d <= R ? 1.0 : std::pow(d / R, -delta);
}

/// E_alpha^{R,delta}(x,t) = max{|x|, sqrt(2|t|)}^{-(N+2-alpha)} min{1, (d/R)^{-delta}}.
inline double riesz_kernel_parabolic(const SpaceTimePoint& offset, const PotentialSpec& spec) {
    const int N = offset.dim();
    const double d = parabolic_distance(offset, SpaceTimePoint(std::vector<double>(N, 0.0), 0.0));
    if (d == 0.0) throw std::domain_error("riesz_kernel_parabolic: singular point");
    return std::pow(d, -(N + 2.0 - spec.alpha)) * truncation_weight(d, spec.R, spec.delta);
}

inline double kernel_eval(const KernelKind& kind, const PotentialSpec& spec,
                          const SpaceTimePoint& offset) {
    const double t = kind.backward ? -offset.t : offset.t;
    switch (kind.family) {
        case KernelFamily::HeatH: return heat_kernel(offset.x, t, spec.alpha);
        case KernelFamily::BesselG: return bessel_kernel(offset.x, t, spec.alpha);
        case KernelFamily::RieszE: return riesz_kernel_parabolic(offset, spec);
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// Closed-form radial tails: K(d) = int_d^infty rho^{-beta} w(rho) drho/rho,
// so that the corresponding potential of mu equals int K(dist(z,y)) dmu(y).

/// Tail for the parabolic Riesz family; beta = N+2-alpha.  beta = 0 is the
/// logarithmic branch reached by Wolff exponents with alpha p = N+2.
inline double riesz_tail(double d, double beta, double R, double delta) {
    if (d <= 0.0) return kInf;
    if (std::abs(beta) < 1e-12) {
        if (R == kInf) return kInf;
        if (delta == 0.0) return d >= R ? 0.0 : std::log(R / d);
        if (d >= R) return std::pow(d / R, -delta) / delta;
        return std::log(R / d) + 1.0 / delta;
    }
    if (R == kInf) return std::pow(d, -beta) / beta;
    if (delta == 0.0) {
        if (d >= R) return 0.0;
        return (std::pow(d, -beta) - std::pow(R, -beta)) / beta;
    }
    if (d >= R) return std::pow(R, delta) * std::pow(d, -beta - delta) / (beta + delta);
    return (std::pow(d, -beta) - std::pow(R, -beta)) / beta + std::pow(R, -beta) / (beta + delta);
}

/// Same tail with the lower limit clamped to [a,b]: int_max(d,a)^b.
inline double riesz_tail_between(double d, double beta, double R, double delta, double a, double b) {
    const double lo = std::max(d, a);
    if (!(b > lo)) return 0.0;
    return riesz_tail(lo, beta, R, delta) - (b == kInf ? 0.0 : riesz_tail(b, beta, R, delta));
}

// ---------------------------------------------------------------------------
// Elliptic kernels on R^N

/// Riesz kernel |x|^{alpha - N} (unnormalized).
inline double elliptic_riesz_kernel(const std::vector<double>& x, double alpha) {
    const int N = static_cast<int>(x.size());
    double s = 0.0;
    for (double v : x) s += v * v;
    const double r = std::sqrt(s);
    if (r == 0.0) throw std::domain_error("elliptic_riesz_kernel: singular point");
    return std::pow(r, alpha - N);
}

/// Bessel kernel G_alpha(x) = int_R G_alpha^{parabolic}(x,t) dt, normalized so
/// that int_{R^N} G_alpha = 1.  Evaluated by log-substituted quadrature of the
/// subordination integral.
inline double elliptic_bessel_kernel(const std::vector<double>& x, double alpha) {
    const int N = static_cast<int>(x.size());
    double s = 0.0;
    for (double v : x) s += v * v;
    const double a = 0.25 * s;  // |x|^2/4
    const double c = heat_kernel_constant(alpha, N);
    const double expo = 0.5 * (alpha - N);
    // integrand in u = log t:  exp(u*expo - e^u - a e^{-u})
    auto f = [&](double u) { return std::exp(u * expo - std::exp(u) - a * std::exp(-u)); };
    const double u_peak = a > 0.0 ? 0.5 * std::log(a) : 0.0;
    double lo = std::min(u_peak, 0.0) - 60.0, hi = std::max(u_peak, 0.0) + 8.0;
    if (a == 0.0 && expo <= 0.0)
        throw std::domain_error("elliptic_bessel_kernel: singular point");
    double total = 0.0;
    const int panels = 96;
    const double h = (hi - lo) / panels;
    for (int i = 0; i < panels; ++i) total += detail::gauss24(f, lo + i * h, lo + (i + 1) * h);
    return c * total;
}

}  // namespace parapot

#pragma once

#include <random>

#include "parapot/measure.hpp"

namespace parapot {

/// Seeded generator; all randomness in campaigns and tests flows from one of
/// these so that a fixed seed reproduces reports byte for byte.
struct Rng {
    std::mt19937_64 gen;

    explicit Rng(std::uint64_t seed) : gen(seed) {}

    double uniform(double a, double b) {
        return std::uniform_real_distribution<double>(a, b)(gen);
    }
    int uniform_int(int a, int b) { return std::uniform_int_distribution<int>(a, b)(gen); }
};

inline SpaceTimePoint random_point_in(Rng& rng, int dim, double xlo, double xhi, double tlo,
                                      double thi) {
    std::vector<double> x(dim);
    for (int i = 0; i < dim; ++i) x[i] = rng.uniform(xlo, xhi);
    return SpaceTimePoint(std::move(x), rng.uniform(tlo, thi));
}

inline DiscreteMeasure random_atom_measure(Rng& rng, int dim, int n_atoms, double xlo, double xhi,
                                           double tlo, double thi, double mass_lo = 0.1,
                                           double mass_hi = 1.0, bool allow_signed = false) {
    DiscreteMeasure mu(dim);
    for (int k = 0; k < n_atoms; ++k) {
        double m = rng.uniform(mass_lo, mass_hi);
        if (allow_signed && rng.uniform(0.0, 1.0) < 0.5) m = -m;
        mu.add_atom(random_point_in(rng, dim, xlo, xhi, tlo, thi), m);
    }
    return mu;
}

inline ParabolicCylinder random_cylinder(Rng& rng, int dim, double xlo, double xhi, double tlo,
                                         double thi, double rho_lo, double rho_hi,
                                         CylinderKind kind = CylinderKind::Centered) {
    return ParabolicCylinder(random_point_in(rng, dim, xlo, xhi, tlo, thi),
                             rng.uniform(rho_lo, rho_hi), kind);
}

}  // namespace parapot

#include <catch2/catch_amalgamated.hpp>

#include "parapot/norms.hpp"

using namespace parapot;

namespace {

GridSpec small_grid(int cells = 8, int steps = 8) {
    GridSpec g;
    g.corner = {-1.0, -1.0};
    g.side = {2.0, 2.0};
    g.cells = {cells, cells};
    g.t_begin = -1.0;
    g.t_end = 1.0;
    g.steps = steps;
    return g;
}

GridFunction random_field(Rng& rng, const GridSpec& g, double lo = 0.0, double hi = 1.0) {
    GridFunction f(g);
    for (auto& v : f.values) v = rng.uniform(lo, hi);
    return f;
}

}  // namespace

TEST_CASE("Lorentz norm of indicators") {
    GridSpec g = small_grid();
    GridFunction f(g);
    // E = 10 cells
    for (int i = 0; i < 10; ++i) f[i] = 1.0;
    const double volE = 10.0 * g.cell_volume();

    NormSpec sp;
    sp.q = 2.0;
    sp.s = kInf;
    CHECK(lorentz_norm(f, sp) == Catch::Approx(std::pow(volE, 0.5)).epsilon(1e-12));

    sp.s = 1.0;
    CHECK(lorentz_norm(f, sp) ==
          Catch::Approx(std::pow(2.0 / 1.0, 1.0) * std::pow(volE, 0.5)).epsilon(1e-12));

    Rng rng(5);
    for (int k = 0; k < 50; ++k) {
        const double q = rng.uniform(0.5, 4.0), s = rng.uniform(0.5, 4.0);
        NormSpec qs;
        qs.q = q;
        qs.s = s;
        CHECK(lorentz_norm(f, qs) ==
              Catch::Approx(std::pow(q / s, 1.0 / s) * std::pow(volE, 1.0 / q)).epsilon(1e-12));
    }
}

TEST_CASE("L^{q,q} equals L^q") {
    Rng rng(7);
    GridSpec g = small_grid();
    GridFunction f = random_field(rng, g, -2.0, 2.0);
    Weight w = Weight::uniform(g);
    for (auto& v : w.values.values) v = rng.uniform(0.5, 2.0);

    for (double q : {1.0, 2.0, 3.5}) {
        NormSpec sp;
        sp.q = sp.s = q;
        sp.weight = w;
        double direct = 0.0;
        for (std::int64_t i = 0; i < f.size(); ++i)
            direct += std::pow(std::abs(f[i]), q) * w.cell_mass(i);
        CHECK(lorentz_norm(f, sp) == Catch::Approx(std::pow(direct, 1.0 / q)).epsilon(1e-12));
    }
}

TEST_CASE("Lorentz norm monotone in |f|") {
    Rng rng(11);
    GridSpec g = small_grid(6, 6);
    GridFunction f = random_field(rng, g), h = f;
    for (auto& v : h.values) v *= rng.uniform(1.0, 2.0);
    for (int k = 0; k < 20; ++k) {
        NormSpec sp;
        sp.q = rng.uniform(0.5, 4.0);
        sp.s = (k % 4 == 0) ? kInf : rng.uniform(0.5, 4.0);
        CHECK(lorentz_norm(f, sp) <= lorentz_norm(h, sp) * (1 + 1e-12));
    }
}

TEST_CASE("Morrey with kappa = N+2 reduces to plain Lorentz") {
    Rng rng(13);
    GridSpec g = small_grid(6, 6);
    for (int k = 0; k < 20; ++k) {
        GridFunction f = random_field(rng, g);
        NormSpec sp;
        sp.q = rng.uniform(1.0, 3.0);
        sp.s = sp.q;
        sp.morrey = MorreyKind::Calorie;
        sp.morrey_exponent = g.dim() + 2.0;
        const double morrey = lorentz_morrey_norm(f, sp).value;
        NormSpec plain = sp;
        plain.morrey = MorreyKind::None;
        CHECK(morrey == Catch::Approx(lorentz_norm(f, plain)).epsilon(1e-10));
    }
    // spatial variant with theta = N
    GridFunction f = random_field(rng, g);
    NormSpec sp;
    sp.q = sp.s = 2.0;
    sp.morrey = MorreyKind::Spatial;
    sp.morrey_exponent = g.dim();
    NormSpec plain = sp;
    plain.morrey = MorreyKind::None;
    CHECK(lorentz_morrey_norm(f, sp).value ==
          Catch::Approx(lorentz_norm(f, plain)).epsilon(1e-10));
}

TEST_CASE("Morrey of a cylinder indicator against a brute-force scan") {
    GridSpec g = small_grid(8, 8);
    const int N = g.dim();
    const double rho0 = 0.6;
    const ParabolicCylinder support = centered_cylinder(SpaceTimePoint({0.0, 0.0}, 0.0), rho0);
    GridFunction f(g);
    for (std::int64_t i = 0; i < f.size(); ++i)
        if (support.contains(g.cell_center(i))) f[i] = 1.0;

    NormSpec sp;
    sp.q = sp.s = 2.0;
    sp.morrey = MorreyKind::Calorie;
    sp.morrey_exponent = 2.0;  // kappa < N+2
    const MorreyResult got = lorentz_morrey_norm(f, sp);

    // oracle: dense center x radius scan with the same cell membership rule
    // and the same declared radius floor (half a spacing)
    double oracle = 0.0;
    const double expo = (sp.morrey_exponent - (N + 2.0)) / sp.q;
    for (std::int64_t ci = 0; ci < f.size(); ++ci) {
        const SpaceTimePoint c = g.cell_center(ci);
        for (int ri = 0; ri < 200; ++ri) {
            const double rho = 0.125 * std::pow(1.025, ri);
            double mass = 0.0;
            const ParabolicCylinder cyl = centered_cylinder(c, rho);
            for (std::int64_t i = 0; i < f.size(); ++i)
                if (f[i] > 0.0 && cyl.contains(g.cell_center(i))) mass += g.cell_volume();
            if (mass > 0.0)
                oracle = std::max(oracle, std::pow(rho, expo) * std::pow(mass, 1.0 / sp.q));
        }
    }
    // both scans are discrete in rho; allow one scan step of slack each way
    CHECK(got.value <= oracle * 1.05);
    CHECK(got.value >= 0.8 * oracle);

    GridFunction zero(g);
    CHECK(lorentz_morrey_norm(zero, sp).value == 0.0);
}

TEST_CASE("weighted Morrey rejected") {
    GridSpec g = small_grid(4, 4);
    GridFunction f(g, 1.0);
    NormSpec sp;
    sp.morrey = MorreyKind::Calorie;
    sp.morrey_exponent = 2.0;
    sp.weight = Weight::uniform(g);
    CHECK_THROWS_AS(lorentz_morrey_norm(f, sp), std::invalid_argument);
}

TEST_CASE("A-infinity spot check") {
    GridSpec g = small_grid(6, 6);
    Weight w = Weight::uniform(g);
    w.a_infinity = {1.0, 1.0};  // Lebesgue satisfies equality
    Rng rng(17);
    CHECK(a_infinity_spot_check(w, rng).pass);
    Weight bad = Weight::uniform(g);
    bad.a_infinity = {0.2, 2.0};  // too strong a claim
    Rng rng2(17);
    CHECK(!a_infinity_spot_check(bad, rng2).pass);
}

TEST_CASE("good lambda: zero measure is vacuous") {
    GridSpec g = small_grid(6, 6);
    DiscreteMeasure zero(2);
    PotentialSpec spec;
    spec.alpha = 1.0;
    spec.p = 2.0;
    auto rep = good_lambda_check(zero, spec, {0.1, 0.3}, {0.5, 1.0}, Weight::uniform(g));
    CHECK(rep.pass);
    CHECK(rep.status == "all exceptional sets empty");
}

TEST_CASE("good lambda: single atom has empty exceptional set for small eps") {
    GridSpec g = small_grid(8, 8);
    DiscreteMeasure mu(2);
    mu.add_atom(SpaceTimePoint({0.0, 0.0}, 0.0), 1.0);
    PotentialSpec spec;
    spec.alpha = 1.0;
    spec.p = 2.0;
    // For a Dirac, W = d^{-2}/2 and (M_{2})^{1/(p-1)} = d^{-2}: on {W > a lambda}
    // we have M^{...} = 2W > 2 a lambda > eps lambda for small eps.
    auto rep = good_lambda_check(mu, spec, {0.01, 0.02}, {0.1, 0.2, 0.4}, Weight::uniform(g));
    CHECK(rep.status == "all exceptional sets empty");
    CHECK(rep.pass);
}

TEST_CASE("good lambda campaign: fitted C2 positive") {
    GridSpec g = small_grid(8, 10);
    Rng rng(19);
    // ratios vanish for small eps (the theorem's content); the decay fit needs
    // the transition region near eps ~ 2a, since M^{1/(p-1)} ~ 2 W for
    // atom-dominated fields
    PotentialSpec spec;
    spec.alpha = 1.0;
    spec.p = 2.0;
    const double a = 2.0 + std::pow(3.0, 2.0);
    std::vector<double> eps;
    for (double e : {0.05, 0.1, 0.2, 0.35, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.5, 7.0, 10.0, 15.0}) eps.push_back(a * e);
    int fitted = 0;
    for (int k = 0; k < 5; ++k) {
        DiscreteMeasure mu = random_atom_measure(rng, 2, 10, -0.8, 0.8, -0.8, 0.8);
        // lambda must sit near max(W)/a or the superlevel set {W > a lambda}
        // is empty at this resolution
        GridFunction w = potential_field(mu, spec, PotentialOp::Wolff, g);
        double wmax = 0.0;
        for (double v : w.values) wmax = std::max(wmax, v);
        const std::vector<double> lambdas = {wmax / (1.5 * a), wmax / (3.0 * a),
                                             wmax / (6.0 * a)};
        auto rep = good_lambda_check(mu, spec, eps, lambdas, Weight::uniform(g));
        CHECK(rep.pass);
        if (rep.fitted_constants["C2"] > 0.0) ++fitted;
    }
    CHECK(fitted >= 4);
}

TEST_CASE("norm equivalence for a Dirac and scaling invariance") {
    GridSpec g = small_grid(8, 8);
    DiscreteMeasure mu(2);
    mu.add_atom(SpaceTimePoint({0.05, -0.03}, 0.02), 1.0);
    PotentialSpec spec;
    spec.alpha = 1.0;
    spec.p = 2.0;
    auto rep = norm_equivalence_report(mu, spec, 2.0, 2.0, Weight::uniform(g));
    CHECK(rep.pass);
    CHECK(rep.worst_ratio > 0.1);
    CHECK(rep.worst_ratio < 10.0);

    auto rep2 = norm_equivalence_report(mu.scaled(7.0), spec, 2.0, 2.0, Weight::uniform(g));
    CHECK(rep2.worst_ratio == Catch::Approx(rep.worst_ratio).epsilon(1e-9));
    // both norms scale by lambda^{1/(p-1)}
    CHECK(rep2.fitted_constants["wolff_norm"] ==
          Catch::Approx(7.0 * rep.fitted_constants["wolff_norm"]).epsilon(1e-9));

    CHECK_THROWS_AS(norm_equivalence_report(mu, spec, 0.5, 2.0, Weight::uniform(g)),
                    std::invalid_argument);
}

TEST_CASE("norm equivalence campaign ratio spread") {
    GridSpec g = small_grid(7, 7);
    Rng rng(23);
    PotentialSpec spec;
    spec.alpha = 1.0;
    spec.p = 2.0;
    double lo = kInf, hi = 0.0;
    for (int k = 0; k < 8; ++k) {
        DiscreteMeasure mu = random_atom_measure(rng, 2, 10, -0.8, 0.8, -0.8, 0.8);
        auto rep = norm_equivalence_report(mu, spec, 2.0, 2.0, Weight::uniform(g));
        lo = std::min(lo, rep.worst_ratio);
        hi = std::max(hi, rep.worst_ratio);
    }
    CHECK(hi / lo < 10.0);
}

TEST_CASE("exponential integrability") {
    GridSpec g = small_grid(8, 16);
    PotentialSpec spec;
    spec.alpha = 1.0;
    spec.p = 2.0;
    const ParabolicCylinder cyl = centered_cylinder(SpaceTimePoint({0.0, 0.0}, 0.0), 0.6);

    DiscreteMeasure zero(2);
    auto rz = exp_integrability_check(zero, spec, cyl, Weight::uniform(g));
    CHECK(rz.pass);
    CHECK(rz.fitted_constants["C2"] == Catch::Approx(1.0));

    // atom scaled so that sup M = 1 on the grid
    DiscreteMeasure mu(2);
    mu.add_atom(SpaceTimePoint({0.0, 0.0}, 0.0), 1.0);
    PotentialSpec mspec = spec;
    mspec.alpha = spec.alpha * spec.p;
    double supm = 0.0;
    const DiscreteMeasure mur = restrict_to(mu, cyl);
    for (std::int64_t i = 0; i < g.total_cell_count(); ++i) {
        const SpaceTimePoint c = g.cell_center(i);
        if (cyl.contains(c)) supm = std::max(supm, maximal_potential(mur, mspec, c));
    }
    REQUIRE(supm > 0.0);
    auto rep = exp_integrability_check(mu.scaled(1.0 / supm), spec, cyl, Weight::uniform(g));
    CHECK(rep.pass);
    CHECK(rep.fitted_constants["C1"] > 0.0);

    auto bad = exp_integrability_check(mu.scaled(100.0 / supm), spec, cyl, Weight::uniform(g));
    CHECK(bad.status == "hypothesis violated");
}

TEST_CASE("weak mapping check") {
    GridSpec g = small_grid(10, 10);
    DiscreteMeasure mu(2);
    mu.add_atom(SpaceTimePoint({0.02, 0.01}, -0.015), 1.0);
    PotentialSpec spec;
    spec.alpha = 1.0;
    spec.p = 2.0;
    auto rep = weak_mapping_check(mu, spec, g);
    CHECK(rep.pass);
    CHECK(std::isfinite(rep.worst_ratio));

    auto rep2 = weak_mapping_check(mu.scaled(5.0), spec, g);
    CHECK(rep2.worst_ratio == Catch::Approx(rep.worst_ratio).epsilon(1e-9));
}

TEST_CASE("weak mapping Morrey variant for densities") {
    GridSpec g = small_grid(6, 6);
    Rng rng(29);
    PotentialSpec spec;
    spec.alpha = 0.5;
    spec.p = 2.0;
    std::vector<double> ratios;
    for (int k = 0; k < 5; ++k) {
        DiscreteMeasure mu(2);
        GridFunction f(g);
        for (auto& v : f.values) v = rng.uniform(0.0, 1.0);
        mu.density = f;
        auto rep = weak_mapping_morrey_check(mu, spec, 1.5, 3.0, g);
        CHECK(rep.pass);
        ratios.push_back(rep.worst_ratio);
    }
    const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
    CHECK(*hi / *lo < 10.0);
}

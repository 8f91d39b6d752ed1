#include <catch2/catch_amalgamated.hpp>

#include "parapot/geometry.hpp"
#include "parapot/measure.hpp"
#include "parapot/random.hpp"

using namespace parapot;

TEST_CASE("parabolic distance basic values") {
    SpaceTimePoint o({0.0, 0.0}, 0.0);
    CHECK(parabolic_distance(o, SpaceTimePoint({1.0, 0.0}, 0.0)) == Catch::Approx(1.0));
    CHECK(parabolic_distance(o, SpaceTimePoint({0.0, 0.0}, -2.0)) == Catch::Approx(2.0));
    CHECK(parabolic_distance(o, SpaceTimePoint({3.0, 4.0}, -8.0)) == Catch::Approx(5.0));
}

TEST_CASE("parabolic distance symmetry and identity") {
    Rng rng(7);
    for (int k = 0; k < 50; ++k) {
        auto a = random_point_in(rng, 3, -2, 2, -1, 1);
        auto b = random_point_in(rng, 3, -2, 2, -1, 1);
        CHECK(parabolic_distance(a, b) == Catch::Approx(parabolic_distance(b, a)));
        CHECK(parabolic_distance(a, a) == 0.0);
    }
    CHECK_THROWS_AS(parabolic_distance(SpaceTimePoint({0.0}, 0.0), SpaceTimePoint({0.0, 0.0}, 0.0)),
                    std::invalid_argument);
}

TEST_CASE("centered cylinders are parabolic metric balls") {
    Rng rng(11);
    for (int k = 0; k < 200; ++k) {
        auto c = random_point_in(rng, 2, -1, 1, -1, 1);
        auto p = random_point_in(rng, 2, -2, 2, -2, 2);
        const double rho = rng.uniform(0.1, 1.5);
        ParabolicCylinder cyl = centered_cylinder(c, rho);
        const double d = parabolic_distance(c, p);
        if (d < rho * (1.0 - 1e-12)) CHECK(cyl.contains(p));
        if (d > rho * (1.0 + 1e-12)) CHECK(!cyl.contains(p));
    }
}

TEST_CASE("cylinder time conventions") {
    ParabolicCylinder back = backward_cylinder(SpaceTimePoint({0.0}, 0.0), 1.0);
    CHECK(back.contains(SpaceTimePoint({0.0}, 0.0)));      // top face included
    CHECK(back.contains(SpaceTimePoint({0.0}, -0.5)));
    CHECK(!back.contains(SpaceTimePoint({0.0}, -1.0)));    // bottom face excluded
    CHECK(!back.contains(SpaceTimePoint({0.0}, 0.25)));

    ParabolicCylinder cen = centered_cylinder(SpaceTimePoint({0.0}, 0.0), 1.0);
    CHECK(cen.contains(SpaceTimePoint({0.0}, -0.5)));      // bottom face included
    CHECK(!cen.contains(SpaceTimePoint({0.0}, 0.5)));      // top face excluded
}

TEST_CASE("centered cylinder volume |B_rho| rho^2") {
    const int N = 2;
    SpaceTimePoint c({0.3, -0.2}, 0.1);
    for (double rho : {0.5, 1.0, 1.7}) {
        ParabolicCylinder cyl = centered_cylinder(c, rho);
        CHECK(cyl.space_time_volume() ==
              Catch::Approx(unit_ball_volume(N) * std::pow(rho, N) * rho * rho));
    }
}

TEST_CASE("grid indexing round trip") {
    GridSpec g;
    g.corner = {-1.0, -2.0};
    g.side = {2.0, 4.0};
    g.cells = {4, 8};
    g.t_begin = 0.0;
    g.t_end = 1.0;
    g.steps = 5;
    g.validate();
    REQUIRE(g.total_cell_count() == 4 * 8 * 5);
    for (std::int64_t i = 0; i < g.total_cell_count(); ++i) {
        const SpaceTimePoint c = g.cell_center(i);
        CHECK(g.locate(c) == i);
    }
    CHECK(g.locate(SpaceTimePoint({5.0, 0.0}, 0.5)) == -1);
    CHECK(g.locate(SpaceTimePoint({0.0, 0.0}, 2.0)) == -1);
}

TEST_CASE("grid function integral") {
    GridSpec g;
    g.corner = {0.0};
    g.side = {2.0};
    g.cells = {10};
    g.t_begin = 0.0;
    g.t_end = 1.0;
    g.steps = 4;
    GridFunction f(g, 3.0);
    CHECK(f.integral() == Catch::Approx(3.0 * 2.0 * 1.0));
}

TEST_CASE("ball box overlap exactness") {
    // box fully inside / outside
    CHECK(ball_box_overlap({0.0, 0.0}, 2.0, {-0.5, -0.5}, {0.5, 0.5}) == Catch::Approx(1.0));
    CHECK(ball_box_overlap({5.0, 5.0}, 1.0, {-0.5, -0.5}, {0.5, 0.5}) == 0.0);
    // large box captures the whole ball
    CHECK(ball_box_overlap({0.0, 0.0}, 1.0, {-3.0, -3.0}, {3.0, 3.0}) ==
          Catch::Approx(std::numbers::pi).epsilon(1e-9));
    // half ball
    CHECK(ball_box_overlap({0.0, 0.0}, 1.0, {0.0, -3.0}, {3.0, 3.0}) ==
          Catch::Approx(std::numbers::pi / 2).epsilon(1e-9));
    // 3-d: full ball
    CHECK(ball_box_overlap({0.0, 0.0, 0.0}, 1.0, {-2, -2, -2}, {2, 2, 2}) ==
          Catch::Approx(4.0 * std::numbers::pi / 3.0).epsilon(1e-7));
    // 1-d: interval clip
    CHECK(ball_box_overlap({0.0}, 1.0, {0.5, }, {3.0}) == Catch::Approx(0.5));
}

#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <iostream>
#include <sstream>
#include <vector>

#include "escp/escp.hpp"
#include "support/oracles.hpp"
#include "support/statistics.hpp"

using namespace escp;

namespace {

struct CerrCapture {
    std::ostringstream buf;
    std::streambuf* old;
    CerrCapture() : old(std::cerr.rdbuf(buf.rdbuf())) {}
    ~CerrCapture() { std::cerr.rdbuf(old); }
    std::string text() const { return buf.str(); }
};

std::vector<Point> draw(const DensityModel& phi, std::size_t n, RngStream& rng) {
    std::vector<Point> pts;
    pts.reserve(n);
    for (std::size_t i = 0; i < n; ++i) pts.push_back(sample(phi, rng));
    return pts;
}

}  // namespace

TEST_CASE("resolution schedule", "[randmatch]") {
    CHECK(default_resolution(1, 3) == 2);
    CHECK(default_resolution(1000, 3) == 27);
    CHECK(default_resolution(200, 2) == 33);
    CHECK_THROWS_AS(default_resolution(10, 1), ParseError);
    // non-decreasing and unbounded
    int prev = 0;
    for (std::size_t n : {1UL, 10UL, 100UL, 1000UL, 10000UL, 100000UL}) {
        const int r = default_resolution(n, 3);
        CHECK(r >= prev);
        prev = r;
    }
    CHECK(default_resolution(10000000, 3) > 100);
}

TEST_CASE("shadow sites follow the pickup density within each cell", "[randmatch]") {
    // One-cell grid: shadows are plain draws from the pickup density.
    const auto phi = uniform_cube(2);
    const GridPartition g = build_grid(phi, phi, 1);
    const TransportPlan plan = solve_optimistic(g);
    RngStream rng(501, 0);
    const std::vector<Point> deliveries = draw(phi, 2000, rng);
    const std::vector<Point> shadows = sample_shadows(deliveries, g, plan, phi, rng);
    REQUIRE(shadows.size() == deliveries.size());
    for (int axis = 0; axis < 2; ++axis) {
        std::vector<double> xs;
        for (const Point& p : shadows) {
            REQUIRE(p.c[axis] >= 0.0);
            REQUIRE(p.c[axis] <= 1.0);
            xs.push_back(p.c[static_cast<std::size_t>(axis)]);
        }
        const double d = testsupport::ks_uniform_stat(xs);
        CHECK(testsupport::ks_p(d, xs.size()) > 0.001);
    }
}

TEST_CASE("shadows are routed along the plan", "[randmatch]") {
    const auto pair = case1();
    const GridPartition g = build_grid(pair.pickup, pair.delivery, 1);
    const TransportPlan plan = solve_optimistic(g);
    RngStream rng(503, 0);

    SECTION("deliveries in the far cube draw shadows across the gap") {
        // the optimistic plan sends the far delivery cube's mass to the
        // nearer pickup cube, and keeps the shared cube in place
        std::vector<Point> deliveries{Point(2.0, 0.0, 0.0), Point(-4.0, 0.25, 0.25)};
        for (int trial = 0; trial < 50; ++trial) {
            const auto shadows = sample_shadows(deliveries, g, plan, pair.pickup, rng);
            CHECK(shadows[0].c[0] >= -2.5);
            CHECK(shadows[0].c[0] <= -1.5);
            CHECK(shadows[1].c[0] >= -4.5);
            CHECK(shadows[1].c[0] <= -3.5);
        }
    }
    SECTION("a delivery with no plan mass in its cell is reported by index") {
        std::vector<Point> deliveries{Point(-4.0, 0.0, 0.0), Point(0.0, 0.0, 0.0)};
        CHECK_THROWS_AS(sample_shadows(deliveries, g, plan, pair.pickup, rng), ConfigError);
        CHECK_THROWS_WITH(sample_shadows(deliveries, g, plan, pair.pickup, rng),
                          Catch::Matchers::ContainsSubstring("delivery 2"));
    }
}

TEST_CASE("shadow cell frequencies reproduce the pickup marginal", "[randmatch]") {
    const auto pair = case1();
    const GridPartition g = build_grid(pair.pickup, pair.delivery, 2);
    const TransportPlan plan = solve_optimistic(g);
    RngStream rng(509, 0);
    const std::vector<Point> deliveries = draw(pair.delivery, 3000, rng);
    const std::vector<Point> shadows = sample_shadows(deliveries, g, plan, pair.pickup, rng);
    std::vector<double> counts(g.size(), 0.0);
    for (const Point& s : shadows) counts[static_cast<std::size_t>(g.locate(s))] += 1.0;
    const auto gof = testsupport::chi_square_gof(counts, g.measuresP);
    CHECK(gof.p > 0.001);
}

TEST_CASE("shadow legs respect the pessimistic cell distances", "[randmatch]") {
    const auto pair = case1();
    const GridPartition g = build_grid(pair.pickup, pair.delivery, 1);
    const TransportPlan pes = solve_pessimistic(g);
    RngStream rng(521, 0);
    const std::size_t n = 10000;
    const std::vector<Point> deliveries = draw(pair.delivery, n, rng);
    const std::vector<Point> shadows = sample_shadows(deliveries, g, pes, pair.pickup, rng);
    std::vector<double> legs;
    legs.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double leg = dist(shadows[k], deliveries[k]);
        // pointwise: a leg can never exceed the worst distance of its cell pair
        REQUIRE(leg <= max_cell_distance(g.cells[static_cast<std::size_t>(g.locate(deliveries[k]))],
                                         g.cells[static_cast<std::size_t>(g.locate(shadows[k]))]) +
                           1e-9);
        legs.push_back(leg);
    }
    const auto m = testsupport::mean_se(legs);
    CHECK(m.mean <= pes.objective + 3.0 * m.se);
}

TEST_CASE("randomized matching basics", "[randmatch]") {
    const auto pair = case1();
    RngStream rng(523, 0);

    SECTION("a single demand is matched to the only pickup") {
        const GridPartition g = build_grid(pair.pickup, pair.delivery, 1);
        const TransportPlan plan = solve_pessimistic(g);
        const std::vector<Point> ps = draw(pair.pickup, 1, rng);
        const std::vector<Point> ds = draw(pair.delivery, 1, rng);
        const Matching m = randomized_ebmp(ps, ds, g, plan, pair.pickup, rng);
        REQUIRE(m.sigma == Permutation::identity(1));
        CHECK(m.total_cost == Catch::Approx(dist(ds[0], ps[0])).margin(1e-12));
    }
    SECTION("mismatched sizes are rejected") {
        const GridPartition g = build_grid(pair.pickup, pair.delivery, 1);
        const TransportPlan plan = solve_pessimistic(g);
        const std::vector<Point> ps = draw(pair.pickup, 3, rng);
        const std::vector<Point> ds = draw(pair.delivery, 2, rng);
        CHECK_THROWS_AS(randomized_ebmp(ps, ds, g, plan, pair.pickup, rng), ParseError);
    }
    SECTION("cost dominates the optimum and obeys the triangle bound") {
        const GridPartition g = build_grid(pair.pickup, pair.delivery, 2);
        const TransportPlan plan = solve_pessimistic(g);
        const std::size_t n = 100;
        for (int trial = 0; trial < 5; ++trial) {
            const std::vector<Point> ps = draw(pair.pickup, n, rng);
            const std::vector<Point> ds = draw(pair.delivery, n, rng);
            RandMatchInfo info;
            const Matching m = randomized_ebmp(ps, ds, g, plan, pair.pickup, rng, &info);
            REQUIRE(m.sigma.size() == n);
            const Matching best = hungarian_match(ps, ds);
            CHECK(m.total_cost >= best.total_cost - 1e-9);
            CHECK(m.total_cost <= info.shadow_leg + info.shadow_match_cost + 1e-9);
            CHECK(match_cost(m.sigma, ps, ds) == Catch::Approx(m.total_cost).margin(1e-9));
        }
    }
}

TEST_CASE("automatic parameters cap the grid at the solver limit", "[randmatch]") {
    const auto pair = case1();
    CerrCapture capture;
    const AutoParams p = auto_parameters(pair.pickup, pair.delivery, 500);
    CHECK(p.capped);
    CHECK(p.r == 8);
    CHECK(p.grid.size() == 3584);
    CHECK(p.grid.size() <= kMaxTransportCells);
    CHECK(capture.text().find("4096") != std::string::npos);
    CHECK(capture.text().find("r = 8") != std::string::npos);
}

TEST_CASE("randomized matching stays near-optimal on the unit square", "[randmatch]") {
    // With identical pickup and delivery densities the randomized matching
    // pays at most two shadow legs over the optimum, in expectation bounded
    // by twice the discretized transport objective.
    const auto phi = uniform_cube(2);
    const std::size_t n = 200;
    const AutoParams p = auto_parameters(phi, phi, n);
    REQUIRE_FALSE(p.capped);
    CHECK(p.r == default_resolution(n, 2));
    RngStream rng(541, 0);
    std::vector<double> gaps;
    for (int trial = 0; trial < 10; ++trial) {
        const std::vector<Point> ps = draw(phi, n, rng);
        const std::vector<Point> ds = draw(phi, n, rng);
        const Matching m = randomized_ebmp(ps, ds, p.grid, p.plan, phi, rng);
        const Matching best = hungarian_match(ps, ds);
        gaps.push_back(m.avg_cost - best.avg_cost);
        REQUIRE(gaps.back() >= -1e-12);
    }
    const auto g = testsupport::mean_se(gaps);
    CHECK(g.mean <= 2.0 * p.plan.objective + 3.0 * g.se);
}

TEST_CASE("end-to-end randomized matching on benchmark densities", "[randmatch][heavy]") {
    SECTION("three-cube pair, 500 demands") {
        const auto pair = case1();
        CerrCapture capture;
        const AutoParams p = auto_parameters(pair.pickup, pair.delivery, 500);
        RngStream rng(547, 0);
        std::vector<double> avgs;
        for (int trial = 0; trial < 10; ++trial) {
            const std::vector<Point> ps = draw(pair.pickup, 500, rng);
            const std::vector<Point> ds = draw(pair.delivery, 500, rng);
            const Matching m = randomized_ebmp(ps, ds, p.grid, p.plan, pair.pickup, rng);
            avgs.push_back(m.avg_cost);
        }
        const auto m = testsupport::mean_se(avgs);
        // true transport distance is 2; the discretized detour adds a little
        CHECK(m.mean >= 2.0);
        CHECK(m.mean <= 2.5);
    }
    SECTION("unit cube, 1000 demands") {
        const auto phi = uniform_cube(3);
        CerrCapture capture;
        RngStream rng(557, 0);
        const std::vector<Point> ps = draw(phi, 1000, rng);
        const std::vector<Point> ds = draw(phi, 1000, rng);
        AutoParams p;
        const Matching m = randomized_ebmp_auto(ps, ds, phi, phi, rng, nullptr, &p);
        CHECK(p.capped);
        CHECK(p.grid.size() <= kMaxTransportCells);
        CHECK(capture.text().find("4096") != std::string::npos);
        // identical densities: the per-demand cost vanishes with n; at
        // n = 1000 it sits well below 0.15
        CHECK(m.avg_cost <= 0.15);
    }
}

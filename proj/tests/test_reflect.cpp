#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rbsde/analysis.hpp"
#include "rbsde/oracles.hpp"
#include "rbsde/reflect.hpp"

#include <cmath>
#include <random>

using namespace rbsde;

TEST_CASE("solve_projected: never-binding obstacle leaves the plain martingale") {
    Problem pb = scenario("never-binding", 40, {{"c", 0.5}});
    const SolutionTriple tri = solve_projected(pb);

    CHECK(tri.dk.raw().cwiseAbs().maxCoeff() == 0.0);
    // Y is the conditional-expectation martingale of xi
    Eigen::VectorXd cur = pb.terminal();
    for (int i = 39; i >= 0; --i) {
        cur = cond_expect(cur);
        CHECK((tri.y.slice(i) - cur).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("solve_projected equals the exhaustive stopping oracle on binding-obstacle") {
    Problem pb = scenario("binding-obstacle", 10);
    const SolutionTriple tri = solve_projected(pb);
    const int n = 10;
    auto reward = [&](int i, int j) { return i == n ? pb.terminal()[j] : pb.obstacle_at(i, j); };
    const double oracle = oracles::exhaustive_stopping_value(n, reward);
    CHECK(std::abs(tri.y(0, 0) - oracle) <= 1e-12);
}

TEST_CASE("solve_projected matches the American-put DP oracle") {
    const double r = 0.05, sigma = 0.3, x0 = 100.0, strike = 100.0, T = 1.0;
    Problem pb = scenario("american-put",
                          50, {{"r", r}, {"sigma", sigma}, {"x0", x0}, {"strike", strike}});
    const SolutionTriple tri = solve_projected(pb);
    const double oracle = oracles::american_put_binomial_dp(r, sigma, x0, strike, T, 50);
    CHECK(std::abs(tri.y(0, 0) - oracle) <= 1e-12);
}

TEST_CASE("projected invariants: domination, complementarity, flatness") {
    for (const char* name : {"binding-obstacle", "american-put", "monotone-nonlipschitz"}) {
        CAPTURE(name);
        Problem pb = scenario(name, 30);
        const SolutionTriple tri = solve_projected(pb);

        double min_gap = 0.0;
        bool flat_ok = true;
        for (int i = 0; i < 30; ++i)
            for (int j = 0; j <= i; ++j) {
                const double gap = tri.y(i, j) - pb.obstacle_at(i, j);
                min_gap = std::min(min_gap, gap);
                if (tri.dk(i, j) > 0.0 && gap != 0.0) flat_ok = false;
            }
        CHECK(min_gap >= 0.0);
        CHECK(flat_ok);
        CHECK(tri.dk.raw().minCoeff() >= 0.0);
        CHECK((tri.y.slice(30) - pb.terminal()).cwiseAbs().maxCoeff() == 0.0);

        const SkorokhodReport rep = skorokhod_report(tri, pb);
        CHECK(rep.residual == 0.0);
        CHECK(rep.max_obstacle_violation == 0.0);
    }
}

TEST_CASE("solve_penalized: zero level and sentinel recover the plain solver") {
    // n = 0 ignores the obstacle entirely
    Problem reflected = scenario("binding-obstacle", 20);
    auto lat = reflected.lattice_ptr();
    Problem plain(lat, reflected.terminal(), reflected.generator(), Obstacle::none(),
                  reflected.p());
    const SolutionTriple pen0 = solve_penalized(reflected, 0.0);
    const SolutionPair ref = solve_bsde(plain);
    CHECK((pen0.y.raw() - ref.y.raw()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(pen0.dk.raw().cwiseAbs().maxCoeff() == 0.0);

    // -inf sentinel: identical to solve_bsde for every level
    Problem sentinel = scenario("ode-cubic", 20);
    const SolutionPair base = solve_bsde(sentinel);
    for (double level : {1.0, 100.0, 1e6}) {
        const SolutionTriple pen = solve_penalized(sentinel, level);
        CHECK((pen.y.raw() - base.y.raw()).cwiseAbs().maxCoeff() == 0.0);
        CHECK(pen.dk.raw().cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("solve_penalized approaches the projected solution for large levels") {
    Problem pb = scenario("binding-obstacle", 10);
    const SolutionTriple proj = solve_projected(pb);
    const SolutionTriple pen = solve_penalized(pb, 1e6);
    CHECK(std::abs(pen.y(0, 0) - proj.y(0, 0)) <= 1e-4);
    // penalized increment identity dK = n h (Y - L)^- holds exactly
    const double h = pb.lattice().dt();
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j <= i; ++j) {
            const double want = 1e6 * h * std::max(pb.obstacle_at(i, j) - pen.y(i, j), 0.0);
            CHECK(pen.dk(i, j) == want);
        }
}

TEST_CASE("penalized scalar step converges to the projection on random instances") {
    std::mt19937_64 rng(2024);
    auto lat = std::make_shared<const BinomialLattice>(0.5, 1);
    for (int trial = 0; trial < 25; ++trial) {
        const double yhat0 = -2.0 + 4.0 * double(rng() >> 11) * 0x1.0p-53;
        const double lvl = -1.0 + 2.0 * double(rng() >> 11) * 0x1.0p-53;
        Eigen::VectorXd xi =
            Eigen::VectorXd::Constant(2, std::max(yhat0, lvl) + 0.5);  // keeps xi >= L_T
        Generator gen([](double, double y, double) { return -0.4 * y * y * y; }, 0.0, 0.0, false);
        Problem pb(lat, xi, gen, Obstacle::constant(lvl), 2.0);

        const SolutionTriple proj = solve_projected(pb);
        const SolutionTriple pen = solve_penalized(pb, 1e9);
        CHECK(std::abs(pen.y(0, 0) - proj.y(0, 0)) <= 1e-6);
    }
}

TEST_CASE("penalization_sweep: distances decrease and Y^n is monotone in n") {
    Problem pb = scenario("binding-obstacle", 50);
    const std::vector<double> levels = {1, 4, 16, 64, 256};
    const SweepReport rep = penalization_sweep(pb, levels);

    REQUIRE(rep.levels.size() == 5);
    for (std::size_t k = 1; k < rep.levels.size(); ++k) {
        CHECK(rep.levels[k].sp_dist_y < rep.levels[k - 1].sp_dist_y);
        // the penalized pairing (Y-L) dK is supported where Y < L, so the
        // residual is nonpositive and its magnitude shrinks to 0 with n
        CHECK(std::abs(rep.levels[k].skorokhod_residual) <
              std::abs(rep.levels[k - 1].skorokhod_residual));
        CHECK(rep.levels[k].skorokhod_residual <= 0.0);
        CHECK(rep.levels[k].monotonicity_violation <= 1e-12);
    }
    CHECK(rep.levels.front().skorokhod_residual < 0.0);

    CHECK_THROWS_AS(penalization_sweep(pb, {4.0, 2.0}), std::invalid_argument);
}

TEST_CASE("penalization_sweep on never-binding is exact at every level") {
    Problem pb = scenario("never-binding", 12, {{"c", -0.5}});
    const SweepReport rep = penalization_sweep(pb, {1.0, 32.0, 1024.0});
    for (const SweepLevel& lv : rep.levels) {
        CHECK(lv.sp_dist_y <= 1e-12);
        CHECK(lv.hp_dist_z <= 1e-12);
        CHECK(lv.sp_dist_k <= 1e-12);
        CHECK(lv.skorokhod_residual == 0.0);
    }
}

TEST_CASE("penalized solutions are ordered in the level (discrete Cor 3.3)") {
    for (const char* name : {"binding-obstacle", "american-put"}) {
        Problem pb = scenario(name, 25);
        const SolutionTriple y1 = solve_penalized(pb, 1.0);
        const SolutionTriple y2 = solve_penalized(pb, 2.0);
        CAPTURE(name);
        CHECK((y1.y.raw() - y2.y.raw()).maxCoeff() <= 1e-12);
    }
}

TEST_CASE("skorokhod_report: penalized residual magnitude decreases in n") {
    Problem pb = scenario("binding-obstacle", 30);
    double prev = std::numeric_limits<double>::infinity();
    for (double n : {1.0, 8.0, 64.0}) {
        const double res = skorokhod_report(solve_penalized(pb, n), pb).residual;
        CHECK(res < 0.0);
        CHECK(std::abs(res) < prev);
        prev = std::abs(res);
    }
    // K == 0 triple reports zero residual
    Problem nb = scenario("never-binding", 8);
    const SolutionTriple zero = solve_penalized(nb, 4.0);
    CHECK(skorokhod_report(zero, nb).residual == 0.0);
}

TEST_CASE("dK ordering under ordered terminal data with a shared obstacle") {
    Problem lo = scenario("binding-obstacle", 25);
    Problem hi(lo.lattice_ptr(), lo.terminal().array() + 0.25, lo.generator(), lo.obstacle(),
               lo.p());
    const SolutionTriple ta = solve_projected(lo);
    const SolutionTriple tb = solve_projected(hi);
    const ComparisonReport rep = compare_solutions(ta, tb, ComparisonRelation::DkGreaterEqual);
    CHECK(rep.max_violation <= 1e-12);
}

TEST_CASE("uniqueness proxies: reruns bit-identical, shift-unshift consistent") {
    Problem pb = scenario("american-put", 40);
    const SolutionTriple a = solve_projected(pb);
    const SolutionTriple b = solve_projected(pb);
    CHECK((a.y.raw() - b.y.raw()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.z.raw() - b.z.raw()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.dk.raw() - b.dk.raw()).cwiseAbs().maxCoeff() == 0.0);

    const double shift = 0.8;
    const SolutionTriple sh = solve_projected(exp_shift(pb, shift));
    const LatticeProcess back = scale_by_exp(sh.y, pb.lattice().grid(), -shift);
    CHECK((a.y.raw() - back.raw()).cwiseAbs().maxCoeff() <= 5.0 * pb.lattice().dt());
}

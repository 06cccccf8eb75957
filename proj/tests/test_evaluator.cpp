#include <cmath>
#include <vector>

#include <doctest.h>

#include "covopt/errors.hpp"
#include "covopt/evaluator.hpp"
#include "covopt/scenario.hpp"
#include "support/brute_force.hpp"
#include "support/toys.hpp"

using namespace covopt;

TEST_CASE("mu_distance: closed-form anchors") {
    SensorParams p;
    CHECK(mu_distance(25.0, p) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(mu_distance(30.0, p) == doctest::Approx(0.006692850924).epsilon(1e-9));
    CHECK(mu_distance(0.0, p) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(1.0 - mu_distance(0.0, p) > 1.3e-11);
    CHECK(1.0 - mu_distance(0.0, p) < 1.5e-11);
}

TEST_CASE("mu_distance: strictly decreasing, rejects negative distance") {
    SensorParams p;
    double prev = mu_distance(0.0, p);
    for (double d = 0.5; d <= 60.0; d += 0.5) {
        const double v = mu_distance(d, p);
        CHECK(v < prev);
        prev = v;
    }
    CHECK_THROWS_AS(mu_distance(-0.1, p), std::invalid_argument);
}

TEST_CASE("mu_pan and mu_tilt: closed-form anchors and symmetry") {
    SensorParams p;
    CHECK(mu_pan(0.0, p) == doctest::Approx(0.995054753686731).epsilon(1e-12));
    CHECK(mu_pan(40.0, p) == doctest::Approx(0.499993855825398).epsilon(1e-12));
    CHECK(mu_tilt(0.0, p) == doctest::Approx(0.995054753686731).epsilon(1e-12));
    CHECK(mu_tilt(40.0, p) == doctest::Approx(0.499993855825398).epsilon(1e-12));
    for (double a = 0.0; a <= 180.0; a += 7.5) {
        CHECK(mu_pan(a, p) == doctest::Approx(mu_pan(-a, p)).epsilon(1e-15));
        CHECK(mu_tilt(a, p) == doctest::Approx(mu_tilt(-a, p)).epsilon(1e-15));
    }
}

TEST_CASE("sense_probability: occlusion zeroes the product exactly") {
    std::vector<double> e(16 * 16, 0.0);
    for (int r = 0; r < 16; ++r) e[std::size_t(r) * 16 + 5] = 5.0;
    DemGrid ridge(0, 0, 1.0, 16, 16, e);
    SensorParams p;
    Target q;
    q.position = {10.0, 1.0, 1.0};
    CHECK(sense_probability({1.0, 1.0, 1.0}, 0.0, 0.0, q, ridge, p) == 0.0);
}

TEST_CASE("sense_probability: dead-ahead target composes the three memberships") {
    auto g = toys::flat_grid();
    SensorParams p;
    Target q;
    q.position = {30.0, 5.0, 1.0};
    const double v = sense_probability({5.0, 5.0, 1.0}, 0.0, 0.0, q, g, p);
    CHECK(v == doctest::Approx(0.5 * 0.995054753686731 * 0.995054753686731).epsilon(1e-9));
}

TEST_CASE("sense_probability: bounded by each membership and by [0,1]") {
    auto g = toys::flat_grid();
    SensorParams p;
    Rng rng(3);
    for (int i = 0; i < 500; ++i) {
        Point3 s{rng.uniform(1.0, 60.0), rng.uniform(1.0, 60.0), rng.uniform(0.1, 2.0)};
        Target q;
        q.position = {rng.uniform(1.0, 60.0), rng.uniform(1.0, 60.0), rng.uniform(0.1, 20.0)};
        const double pan = rng.uniform(kPanMin, kPanMax);
        const double tilt = rng.uniform(kTiltMin, kTiltMax);
        const double v = sense_probability(s, pan, tilt, q, g, p);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        const double dx = q.position.x - s.x, dy = q.position.y - s.y,
                     dz = q.position.z - s.z;
        const double dist = std::sqrt(dx * dx + dy * dy + dz * dz);
        CHECK(v <= mu_distance(dist, p) + 1e-12);
    }
}

TEST_CASE("sense_probability: vertical target uses the degenerate angle rules") {
    auto g = toys::flat_grid();
    SensorParams p;
    Target q;
    q.position = {10.0, 10.0, 7.0};
    const Point3 s{10.0, 10.0, 1.0};
    // alpha_p = 0, alpha_t = 90 - tilt
    const double expect = mu_distance(6.0, p) * mu_pan(0.0, p) * mu_tilt(90.0 - 30.0, p);
    CHECK(sense_probability(s, 123.0, 30.0, q, g, p) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("sense_probability: angle range checks") {
    auto g = toys::flat_grid();
    SensorParams p;
    Target q;
    q.position = {10.0, 10.0, 2.0};
    CHECK_THROWS_AS(sense_probability({5, 5, 1}, 181.0, 0.0, q, g, p), std::invalid_argument);
    CHECK_THROWS_AS(sense_probability({5, 5, 1}, 0.0, -91.0, q, g, p), std::invalid_argument);
}

TEST_CASE("evaluate: two half-probability sensors leave a quarter blind spot") {
    ScenarioInstance inst{toys::flat_grid(), {}, {}, 2, {}, "half"};
    inst.params.beta_p = 1000.0;
    inst.params.t_p = 180.0;
    inst.params.beta_t = 1000.0;
    inst.params.t_t = 90.0;
    inst.sites = {{5.0, 5.0, 1.0}, {55.0, 5.0, 1.0}};
    Target q;
    q.position = {30.0, 5.0, 1.0};
    q.weight = 1.0;
    inst.targets = {q};
    inst.validate();

    Solution s;
    s.select = {1, 1};
    s.pan = {0.0, 180.0};
    s.tilt = {0.0, 0.0};

    EvalCounter counter{0, 10};
    const auto v = evaluate(s, inst, counter);
    CHECK(v.fitness == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(v.coverage_fraction == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(counter.used == 1);
}

TEST_CASE("evaluate: fully occluded scene scores total weight, coverage zero") {
    std::vector<double> e(16 * 16, 0.0);
    for (int r = 0; r < 16; ++r) e[std::size_t(r) * 16 + 8] = 9.0;
    ScenarioInstance inst{DemGrid(0, 0, 1.0, 16, 16, e), {}, {}, 1, {}, "walled"};
    inst.sites = {{2.0, 7.0, 0.5}};
    for (int i = 0; i < 3; ++i) {
        Target t;
        t.position = {14.0, 3.0 + 4.0 * i, 0.5};
        t.weight = 1.0 + i;
        inst.targets.push_back(t);
    }
    inst.validate();

    Solution s;
    s.select = {1};
    s.pan = {0.0};
    s.tilt = {0.0};
    EvalCounter counter{0, 5};
    const auto v = evaluate(s, inst, counter);
    CHECK(v.fitness == doctest::Approx(total_weight(inst)).epsilon(1e-15));
    CHECK(v.coverage_fraction == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("evaluate: budget accounting and errors") {
    auto inst = toys::tiny_instance();
    Rng rng(5);
    auto s = toys::random_valid_solution(inst, rng);

    EvalCounter counter{0, 2};
    evaluate(s, inst, counter);
    evaluate(s, inst, counter);
    CHECK(counter.used == 2);
    CHECK(counter.exhausted());
    CHECK_THROWS_AS(evaluate(s, inst, counter), BudgetExhausted);

    EvalCounter fresh{0, 10};
    auto bad = s;
    bad.select[0] ^= 1;
    CHECK_THROWS_AS(evaluate(bad, inst, fresh), std::invalid_argument);
    CHECK(fresh.used == 0);
}

TEST_CASE("evaluate: unselected angle genes are inert") {
    auto inst = toys::tiny_instance();
    Rng rng(6);
    auto s = toys::random_valid_solution(inst, rng);
    EvalCounter c1{0, 10}, c2{0, 10};
    const double f1 = evaluate(s, inst, c1).fitness;
    auto t = s;
    for (std::size_t j = 0; j < t.select.size(); ++j)
        if (!t.select[j]) {
            t.pan[j] = rng.uniform(kPanMin, kPanMax);
            t.tilt[j] = rng.uniform(kTiltMin, kTiltMax);
        }
    const double f2 = evaluate(t, inst, c2).fitness;
    CHECK(f1 == f2);
}

TEST_CASE("evaluate: adding a sensor never hurts") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        auto inst = toys::tiny_instance(6, 8, 2);
        auto s = toys::random_valid_solution(inst, rng);

        auto inst_plus = inst;
        inst_plus.k = 3;
        auto s_plus = s;
        std::vector<std::size_t> unselected;
        for (std::size_t j = 0; j < s.select.size(); ++j)
            if (!s.select[j]) unselected.push_back(j);
        s_plus.select[unselected[rng.index(unselected.size())]] = 1;

        EvalCounter c1{0, 10}, c2{0, 10};
        CHECK(evaluate(s_plus, inst_plus, c2).fitness <= evaluate(s, inst, c1).fitness + 1e-15);
    }
}

TEST_CASE("evaluate: agrees with the independent brute-force oracle") {
    Rng rng(8);
    for (int trial = 0; trial < 8; ++trial) {
        auto inst = toys::random_toy_instance(rng);
        for (int i = 0; i < 4; ++i) {
            auto s = toys::random_valid_solution(inst, rng);
            EvalCounter c{0, 1000};
            CHECK(std::abs(evaluate(s, inst, c).fitness - oracle::fitness(s, inst)) <= 1e-9);
        }
    }
}

TEST_CASE("cached evaluator: bitwise identical to the plain path, any thread count") {
    Rng rng(9);
    auto inst = toys::random_toy_instance(rng, 4, 5, 2);
    CachedEvaluator cached1(inst, 1);
    CachedEvaluator cached2(inst, 2);
    CHECK(cached1.total_weight() == total_weight(inst));
    for (int i = 0; i < 30; ++i) {
        auto s = toys::random_valid_solution(inst, rng);
        EvalCounter a{0, 1000}, b{0, 1000}, c{0, 1000};
        const double plain = evaluate(s, inst, a).fitness;
        CHECK(cached1.evaluate(s, b).fitness == plain);
        CHECK(cached2.evaluate(s, c).fitness == plain);
    }
}

TEST_CASE("evaluate: multithreaded reduction is bit-stable") {
    Rng rng(10);
    auto inst = toys::tiny_instance(6, 11, 2);
    for (int i = 0; i < 10; ++i) {
        auto s = toys::random_valid_solution(inst, rng);
        EvalCounter a{0, 100}, b{0, 100}, c{0, 100};
        const double f1 = evaluate(s, inst, a, 1).fitness;
        const double f2 = evaluate(s, inst, b, 2).fitness;
        const double f3 = evaluate(s, inst, c, 3).fitness;
        CHECK(f1 == f2);
        CHECK(f1 == f3);
    }
}

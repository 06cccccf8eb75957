#include <benchmark/benchmark.h>

#include "covopt/controller.hpp"
#include "covopt/evaluator.hpp"
#include "covopt/ga.hpp"
#include "covopt/local_eda.hpp"
#include "covopt/ranker.hpp"
#include "covopt/scenario.hpp"
#include "covopt/terrain.hpp"

using namespace covopt;

namespace {

const ScenarioInstance& small_instance() {
    static const ScenarioInstance inst = [] {
        DemGrid grid = generate_terrain(11, 129, 129, 50.0 / 128.0, 0.55, 2.5);
        return generate_instance(3, Scale::Small, grid);
    }();
    return inst;
}

Solution random_solution(const ScenarioInstance& inst, Rng& rng) {
    const std::size_t z = std::size_t(inst.num_sites());
    Solution s;
    s.select = repair(std::vector<std::uint8_t>(z, 0), inst.k, rng);
    s.pan.resize(z);
    s.tilt.resize(z);
    for (auto& v : s.pan) v = rng.uniform(kPanMin, kPanMax);
    for (auto& v : s.tilt) v = rng.uniform(kTiltMin, kTiltMax);
    return s;
}

std::vector<EvaluatedSolution> random_archive(const ScenarioInstance& inst, int n,
                                              std::uint64_t seed) {
    Rng rng(seed);
    CachedEvaluator eval(inst, 1);
    EvalCounter counter{0, n};
    std::vector<EvaluatedSolution> out;
    out.reserve(std::size_t(n));
    for (int i = 0; i < n; ++i) {
        Solution s = random_solution(inst, rng);
        const double f = eval.evaluate(s, counter).fitness;
        out.push_back({std::move(s), f, i});
    }
    return out;
}

void BM_Evaluate(benchmark::State& state) {
    const auto& inst = small_instance();
    Rng rng(7);
    const Solution sol = random_solution(inst, rng);
    EvalCounter counter{0, 1 << 30};
    for (auto _ : state) benchmark::DoNotOptimize(evaluate(sol, inst, counter).fitness);
}
BENCHMARK(BM_Evaluate);

void BM_EvaluateCached(benchmark::State& state) {
    const auto& inst = small_instance();
    CachedEvaluator eval(inst, 1);
    Rng rng(7);
    const Solution sol = random_solution(inst, rng);
    EvalCounter counter{0, 1 << 30};
    for (auto _ : state) benchmark::DoNotOptimize(eval.evaluate(sol, counter).fitness);
}
BENCHMARK(BM_EvaluateCached);

void BM_LineOfSight(benchmark::State& state) {
    const auto& inst = small_instance();
    const auto& grid = inst.grid;
    Rng rng(13);
    const double span = grid.cell_size() * double(grid.cols() - 1);
    std::vector<std::pair<Point3, Point3>> pairs;
    for (int i = 0; i < 64; ++i) {
        Point3 a{rng.uniform(0, span), rng.uniform(0, span), 0};
        Point3 b{rng.uniform(0, span), rng.uniform(0, span), 0};
        a.z = grid.elevation_at(a.x, a.y) + 0.01;
        b.z = grid.elevation_at(b.x, b.y) + 0.01;
        pairs.emplace_back(a, b);
    }
    std::size_t i = 0;
    for (auto _ : state) {
        const auto& [a, b] = pairs[i++ & 63];
        benchmark::DoNotOptimize(line_of_sight(grid, a, b));
    }
}
BENCHMARK(BM_LineOfSight);

void BM_GaOffspring(benchmark::State& state) {
    const auto& inst = small_instance();
    auto parents = random_archive(inst, 100, 17);
    GaConfig cfg;
    cfg.pop_size = int(parents.size());
    Rng rng(23);
    for (auto _ : state) benchmark::DoNotOptimize(ga_offspring(parents, cfg, rng).size());
}
BENCHMARK(BM_GaOffspring);

void BM_RbfnFit(benchmark::State& state) {
    const auto& inst = small_instance();
    auto archive = random_archive(inst, 100, 29);
    for (auto _ : state) benchmark::DoNotOptimize(fit_rbfn(archive, 75).weights.size());
}
BENCHMARK(BM_RbfnFit);

void BM_RbfnPredict(benchmark::State& state) {
    const auto& inst = small_instance();
    auto archive = random_archive(inst, 100, 29);
    const RbfnModel rbfn = fit_rbfn(archive, 75);
    Rng rng(31);
    const Solution probe = random_solution(inst, rng);
    for (auto _ : state) benchmark::DoNotOptimize(rbfn.predict(probe));
}
BENCHMARK(BM_RbfnPredict);

void BM_EdaSample(benchmark::State& state) {
    const auto& inst = small_instance();
    auto archive = random_archive(inst, 100, 37);
    const EdaModel eda = fit_eda(archive, 45);
    Rng rng(41);
    for (auto _ : state) benchmark::DoNotOptimize(sample_eda(eda, 200, inst.k, rng).size());
}
BENCHMARK(BM_EdaSample);

void BM_RankerScore(benchmark::State& state) {
    const auto& inst = small_instance();
    auto archive = random_archive(inst, 24, 43);
    RankerConfig cfg;
    Rng pair_rng(47);
    RankModel model(inst.num_sites(), cfg, 51);
    model.fit(build_initial_pairs(archive, cfg, pair_rng));
    Rng rng(53);
    std::vector<Solution> batch;
    for (int i = 0; i < 100; ++i) batch.push_back(random_solution(inst, rng));
    for (auto _ : state) benchmark::DoNotOptimize(model.scores(batch).size());
    state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(BM_RankerScore);

}

BENCHMARK_MAIN();

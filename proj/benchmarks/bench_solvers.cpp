#include <benchmark/benchmark.h>

#include "ccvl/adaptive.hpp"
#include "ccvl/dataset.hpp"
#include "ccvl/solver.hpp"

using namespace ccvl;

namespace {

TabularMdp bench_gridworld() {
    std::vector<std::string> rows = {"........", "........", "..WW....", "..WW....",
                                     "........", "........", "........", "SLLLLLLG"};
    return build_gridworld(GridworldSpec::from_rows(rows, 0.30, 1.0));
}

struct BenchData {
    TabularMdp mdp = bench_gridworld();
    OfflineDataset data;
    EmpiricalModel model;
    MdpMeta meta;
    BenchData() {
        data = collect_dataset(mdp, Policy::uniform(64, 4), 2500, 100, 0);
        model = build_empirical_model(data);
        meta = MdpMeta{mdp.discount, mdp.r_max};
    }
};

const BenchData& shared() {
    static BenchData instance;
    return instance;
}

}  // namespace

static void BM_ValueIteration(benchmark::State& state) {
    const auto& d = shared();
    for (auto _ : state) {
        auto q = solve_optimal_q(d.mdp, 1e-8, 100000);
        benchmark::DoNotOptimize(q);
    }
}
BENCHMARK(BM_ValueIteration);

static void BM_BonusSweep(benchmark::State& state) {
    const auto& d = shared();
    ConfidenceGrid grid;
    const int k = static_cast<int>(state.range(0));
    for (int i = 0; i < k; ++i) grid.deltas.push_back(0.02 + 0.9 * i / k);
    auto table = ConfidenceQ::lower_init(64, 4, grid, 0.2, 1.0, d.meta);
    for (auto _ : state) {
        auto out = ccvl_bonus_backup(table, d.data, d.model);
        benchmark::DoNotOptimize(out.table.values);
    }
    state.SetComplexityN(k);
}
BENCHMARK(BM_BonusSweep)->RangeMultiplier(2)->Range(2, 32)->Complexity();

static void BM_RegSweep(benchmark::State& state) {
    const auto& d = shared();
    auto table = ConfidenceQ::lower_init(64, 4, ConfidenceGrid::default_grid(), 0.2, 1.0, d.meta);
    RegOptions opts{PolicyMode::Equilibrium, 1.0, false};
    for (auto _ : state) {
        auto out = ccvl_reg_backup(table, d.data, d.model, opts);
        benchmark::DoNotOptimize(out.table.values);
    }
}
BENCHMARK(BM_RegSweep);

static void BM_BeliefUpdate(benchmark::State& state) {
    const auto& d = shared();
    auto table = ConfidenceQ::lower_init(64, 4, ConfidenceGrid::default_grid(), 0.2, 1.0, d.meta);
    auto belief = belief_init(table.grid, 1.0);
    Transition t{0, 1, 0.0, 1, false};
    for (auto _ : state) {
        belief = belief_update(belief, t, table);
        benchmark::DoNotOptimize(belief.probs);
    }
}
BENCHMARK(BM_BeliefUpdate);

static void BM_CollectDataset(benchmark::State& state) {
    const auto& d = shared();
    for (auto _ : state) {
        auto data = collect_dataset(d.mdp, Policy::uniform(64, 4), 2500, 100, 1);
        benchmark::DoNotOptimize(data.transitions);
    }
}
BENCHMARK(BM_CollectDataset);

BENCHMARK_MAIN();

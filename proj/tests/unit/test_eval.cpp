#include <doctest.h>

#include <cmath>
#include <set>

#include "ccvl/eval.hpp"

using namespace ccvl;

namespace {

const char* kGridworldConfig = R"json({
  "env_train": {
    "type": "gridworld",
    "rows": ["....", "....", "S..G"],
    "slip_prob": 0.3,
    "goal_reward": 1.0,
    "discount": 0.95
  },
  "env_eval": {"slip_prob": 0.15},
  "dataset": {"num_samples": 800, "epsilon_opt": 0.5, "seed": 0},
  "solver": {"method": "ccvl-reg", "alpha": 0.2},
  "eval": {"episodes": 40, "horizon": 60}
})json";

}  // namespace

TEST_CASE("rollout: optimal policy on the 2x1 deterministic gridworld returns 1") {
    std::vector<std::string> rows = {"SG"};
    auto mdp = build_gridworld(GridworldSpec::from_rows(rows, 0.0, 1.0, 0.99));
    auto q = solve_optimal_q(mdp, 1e-10, 100000);
    StaticActionSource source(greedy_policy(q, 2, 4), 3);
    auto report = rollout(mdp, source, 50, 20, 4);
    for (double r : report.per_episode_returns) CHECK(r == doctest::Approx(1.0));
    CHECK(report.mean_return == doctest::Approx(1.0));
}

TEST_CASE("rollout: lava corridor returns are all zero or one") {
    std::vector<std::string> rows = {"S..G", "LLLL"};
    auto mdp = build_gridworld(GridworldSpec::from_rows(rows, 0.0, 1.0, 0.95));
    StaticActionSource source(Policy::uniform(8, 4), 11);
    auto report = rollout(mdp, source, 200, 50, 12);
    std::set<double> seen(report.per_episode_returns.begin(), report.per_episode_returns.end());
    for (double r : seen) CHECK((r == 0.0 || r == 1.0));
    CHECK(seen.count(0.0) == 1);
    CHECK(seen.count(1.0) == 1);
}

TEST_CASE("rollout: deterministic for a fixed seed") {
    std::vector<std::string> rows = {"S..G", "LLLL"};
    auto mdp = build_gridworld(GridworldSpec::from_rows(rows, 0.2, 1.0, 0.95));
    StaticActionSource a(Policy::uniform(8, 4), 5);
    StaticActionSource b(Policy::uniform(8, 4), 5);
    auto ra = rollout(mdp, a, 30, 50, 9);
    auto rb = rollout(mdp, b, 30, 50, 9);
    CHECK(ra.per_episode_returns == rb.per_episode_returns);
}

TEST_CASE("normalization sanity: the optimal policy scores 1 against its own denominator") {
    std::vector<std::string> rows = {"....", "....", "S..G"};
    auto mdp = build_gridworld(GridworldSpec::from_rows(rows, 0.15, 1.0, 0.95));
    const double denom = optimal_mean_return(mdp, 10000, 100);
    auto q = solve_optimal_q(mdp, 1e-10, 200000);
    StaticActionSource source(greedy_policy(q, mdp.num_states, 4), 77);
    auto report = rollout(mdp, source, 2000, 100, 78);
    CHECK(report.mean_return / denom == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("config: parse, canonical hash stability, env_eval override") {
    auto cfg = ExperimentConfig::from_json(kGridworldConfig);
    CHECK(cfg.env_train.grid.slip_prob == doctest::Approx(0.3));
    CHECK(cfg.env_eval.grid.slip_prob == doctest::Approx(0.15));
    CHECK(cfg.env_eval.grid.width == cfg.env_train.grid.width);
    CHECK(cfg.solver.method == "ccvl-reg");
    CHECK(cfg.config_hash() == ExperimentConfig::from_json(kGridworldConfig).config_hash());

    auto cfg2 = cfg;
    cfg2.solver.alpha = 0.5;
    CHECK(cfg.config_hash() != cfg2.config_hash());

    CHECK_THROWS_WITH_AS(ExperimentConfig::from_json("{}"), doctest::Contains("env_train"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(
        ExperimentConfig::from_json(
            R"({"env_train":{"type":"gridworld","rows":["SG"],"slip_prob":0.1,"goal_reward":1},
                "dataset":{"num_samples":0}})"),
        doctest::Contains("num_samples"), ConfigError);
}

TEST_CASE("train_method: every public method tag produces tables") {
    auto cfg = ExperimentConfig::from_json(kGridworldConfig);
    auto mdp = cfg.env_train.build();
    auto q = solve_optimal_q(mdp, 1e-10, 200000);
    auto behavior = mix_policy(greedy_policy(q, mdp.num_states, 4), 0.5);
    auto data = collect_dataset(mdp, behavior, 800, 100, 0);
    auto model = build_empirical_model(data);
    MdpMeta meta{mdp.discount, mdp.r_max};

    for (const char* method :
         {"ccvl-bonus", "ccvl-reg", "ccvl-upper", "cql", "anti-explore", "plain"}) {
        SolverSpec solver = cfg.solver;
        solver.method = method;
        solver.alpha = 0.2;
        auto trained = train_method(solver, data, model, meta);
        if (std::string(method).rfind("ccvl", 0) == 0) {
            REQUIRE(trained.confidence_tables.size() == 1);
            CHECK(trained.fixed_delta_index >= 0);
            CHECK(trained.fixed_delta_index < trained.confidence_tables[0].k());
        } else {
            REQUIRE(trained.q_tables.size() == 1);
        }
        CHECK(trained.report.final_residual <= solver.tol);
    }

    SolverSpec aevl = cfg.solver;
    aevl.method = "aevl";
    aevl.ensemble_size = 3;
    auto trained = train_method(aevl, data, model, meta, 5);
    CHECK(trained.q_tables.size() == 3);
}

TEST_CASE("coverage_experiment: extreme pessimism covers everything") {
    const char* text = R"json({
      "env_train": {"type": "random", "num_states": 4, "num_actions": 2, "seed": 3,
                     "discount": 0.9},
      "dataset": {"num_samples": 200, "epsilon_opt": 0.5, "seed": 10, "horizon": 50},
      "solver": {"method": "ccvl-bonus", "alpha": 25.0, "iota": 1.0},
      "coverage": {"num_resamples": 100, "deltas": [0.1, 0.5]}
    })json";
    auto cfg = ExperimentConfig::from_json(text);
    auto rows = coverage_experiment(cfg, 2);
    REQUIRE(rows.size() == 2);
    for (const auto& row : rows) {
        CHECK(row.coverage == doctest::Approx(1.0));
        CHECK(row.failures == 0);
        CHECK(row.resamples == 100);
    }
}

TEST_CASE("coverage_experiment: no bonus leaves all-pairs coverage far below target") {
    const char* text = R"json({
      "env_train": {"type": "random", "num_states": 6, "num_actions": 2, "seed": 3,
                     "discount": 0.9},
      "dataset": {"num_samples": 400, "epsilon_opt": 0.5, "seed": 10, "horizon": 50},
      "solver": {"method": "ccvl-bonus", "alpha": 0.0, "iota": 1.0},
      "coverage": {"num_resamples": 100, "deltas": [0.1]}
    })json";
    auto cfg = ExperimentConfig::from_json(text);
    auto no_bonus = coverage_experiment(cfg, 2);
    cfg.solver.alpha = 1.0;
    auto with_bonus = coverage_experiment(cfg, 2);
    CHECK(no_bonus[0].coverage < with_bonus[0].coverage);
    CHECK(no_bonus[0].coverage < 1.0 - 0.1 - 0.05);
}

TEST_CASE("alpha_sweep: shape, determinism, and alpha-0 parity with plain") {
    auto cfg = ExperimentConfig::from_json(kGridworldConfig);
    cfg.sweep.seeds = {0, 1};
    cfg.sweep.methods = {"cql", "ccvl-reg"};
    cfg.eval.episodes = 30;
    std::vector<double> alphas = {0.0, 0.3};
    auto cells = alpha_sweep(cfg, alphas, 2);
    CHECK(cells.size() == 2 * 2 * 2);
    auto cells_again = alpha_sweep(cfg, alphas, 1);
    for (std::size_t i = 0; i < cells.size(); ++i) {
        CHECK(cells[i].normalized_return == doctest::Approx(cells_again[i].normalized_return));
        CHECK(cells[i].method == cells_again[i].method);
    }

    // At alpha = 0 both methods collapse to plain empirical value iteration.
    for (std::size_t i = 0; i < cells.size(); ++i)
        for (std::size_t j = 0; j < cells.size(); ++j)
            if (cells[i].alpha == 0.0 && cells[j].alpha == 0.0 &&
                cells[i].seed == cells[j].seed)
                CHECK(std::abs(cells[i].mean_return - cells[j].mean_return) <= 0.35);
}

TEST_CASE("adaptive rollout records a delta trace and per-episode modes") {
    auto cfg = ExperimentConfig::from_json(kGridworldConfig);
    auto mdp = cfg.env_train.build();
    auto eval_mdp = cfg.env_eval.build();
    auto q = solve_optimal_q(mdp, 1e-10, 200000);
    auto behavior = mix_policy(greedy_policy(q, mdp.num_states, 4), 0.5);
    auto data = collect_dataset(mdp, behavior, 800, 100, 0);
    auto model = build_empirical_model(data);
    auto trained = train_method(cfg.solver, data, model, MdpMeta{mdp.discount, mdp.r_max});

    AdaptivePolicyConfig pol;
    pol.mode = PolicyKind::BeliefSample;
    pol.seed = 1;
    AdaptiveActionSource source(trained.confidence_tables[0], nullptr, pol);
    auto report = rollout(eval_mdp, source, 10, 60, 2);
    CHECK(report.episode_end_modes.size() == 10);
    CHECK(!report.delta_trace.empty());
    for (const auto& row : report.delta_trace) {
        CHECK(row.episode >= 0);
        CHECK(row.episode < 10);
        CHECK(row.delta > 0.0);
        CHECK(row.delta < 1.0);
    }
}

#include "ccvl/config.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ccvl/digest.hpp"

namespace ccvl {

using nlohmann::json;

namespace {

json env_to_json(const EnvSpec& env) {
    json j;
    j["type"] = env.type;
    if (env.type == "gridworld") {
        json g = json::parse(env.grid.to_json());
        for (auto& [k, v] : g.items()) j[k] = v;
    } else {
        j["num_states"] = env.random.num_states;
        j["num_actions"] = env.random.num_actions;
        j["seed"] = env.random.seed;
        j["discount"] = env.random.discount;
        j["reward_min"] = env.random.reward_min;
        j["reward_max"] = env.random.reward_max;
        j["concentration"] = env.random.concentration;
        j["reward_action_bias"] = env.random.reward_action_bias;
    }
    return j;
}

EnvSpec env_from_json(const json& j, const char* field) {
    EnvSpec env;
    env.type = j.value("type", "gridworld");
    if (env.type == "gridworld") {
        if (!j.contains("rows")) throw ConfigError(std::string(field) + ": missing rows");
        env.grid = GridworldSpec::from_json(j.dump());
    } else if (env.type == "random") {
        env.random.num_states = j.value("num_states", 5);
        env.random.num_actions = j.value("num_actions", 2);
        env.random.seed = j.value("seed", 0ull);
        env.random.discount = j.value("discount", 0.9);
        env.random.reward_min = j.value("reward_min", 0.0);
        env.random.reward_max = j.value("reward_max", 1.0);
        env.random.concentration = j.value("concentration", 1.0);
        env.random.reward_action_bias = j.value("reward_action_bias", 0.0);
        if (env.random.num_states <= 0 || env.random.num_actions <= 0)
            throw ConfigError(std::string(field) + ": num_states/num_actions must be positive");
    } else {
        throw ConfigError(std::string(field) + ".type: expected 'gridworld' or 'random'");
    }
    return env;
}

PolicyKind policy_kind_from_string(const std::string& s) {
    if (s == "belief-sample") return PolicyKind::BeliefSample;
    if (s == "belief-mode") return PolicyKind::BeliefMode;
    if (s == "fixed-delta") return PolicyKind::FixedDelta;
    if (s == "safe-set") return PolicyKind::SafeSet;
    throw ConfigError("policy.mode: unknown mode '" + s + "'");
}

std::string policy_kind_to_string(PolicyKind k) {
    switch (k) {
        case PolicyKind::BeliefSample: return "belief-sample";
        case PolicyKind::BeliefMode: return "belief-mode";
        case PolicyKind::FixedDelta: return "fixed-delta";
        case PolicyKind::SafeSet: return "safe-set";
    }
    return "belief-sample";
}

}  // namespace

TabularMdp EnvSpec::build() const {
    if (type == "gridworld") return build_gridworld(grid);
    return make_random_mdp(random);
}

ConfidenceGrid SolverSpec::grid() const {
    if (deltas.empty()) return ConfidenceGrid::default_grid();
    ConfidenceGrid g{deltas};
    g.validate();
    return g;
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }

    ExperimentConfig cfg;
    if (!j.contains("env_train")) throw ConfigError("config: missing env_train");
    cfg.env_train = env_from_json(j.at("env_train"), "env_train");

    // env_eval may be a partial override of env_train.
    json eval_env = j.value("env_eval", json::object());
    json merged = env_to_json(cfg.env_train);
    for (auto& [k, v] : eval_env.items()) merged[k] = v;
    cfg.env_eval = env_from_json(merged, "env_eval");

    if (j.contains("dataset")) {
        const json& d = j.at("dataset");
        cfg.dataset.num_samples = d.value("num_samples", 2500);
        cfg.dataset.epsilon_opt = d.value("epsilon_opt", 0.5);
        cfg.dataset.horizon = d.value("horizon", 100);
        cfg.dataset.seed = d.value("seed", 0ull);
        if (cfg.dataset.num_samples <= 0)
            throw ConfigError("dataset.num_samples: must be positive");
        if (cfg.dataset.epsilon_opt < 0.0 || cfg.dataset.epsilon_opt > 1.0)
            throw ConfigError("dataset.epsilon_opt: must lie in [0,1]");
        if (cfg.dataset.horizon <= 0) throw ConfigError("dataset.horizon: must be positive");
    }

    if (j.contains("solver")) {
        const json& s = j.at("solver");
        cfg.solver.method = s.value("method", "ccvl-reg");
        cfg.solver.alpha = s.value("alpha", 0.2);
        cfg.solver.iota = s.value("iota", 1.0);
        cfg.solver.deltas = s.value("deltas", std::vector<double>{});
        std::string mode = s.value("policy_mode", "equilibrium");
        if (mode == "greedy")
            cfg.solver.policy_mode = PolicyMode::Greedy;
        else if (mode == "softmax")
            cfg.solver.policy_mode = PolicyMode::Softmax;
        else if (mode == "equilibrium")
            cfg.solver.policy_mode = PolicyMode::Equilibrium;
        else
            throw ConfigError(
                "solver.policy_mode: expected 'greedy', 'softmax' or 'equilibrium'");
        cfg.solver.temperature = s.value("temperature", 0.01);
        cfg.solver.state_action_weighting = s.value("state_action_weighting", false);
        cfg.solver.tol = s.value("tol", 1e-8);
        cfg.solver.max_iters = s.value("max_iters", 10000);
        cfg.solver.ensemble_size = s.value("ensemble_size", 5);
        static const std::vector<std::string> known = {
            "ccvl-bonus", "ccvl-reg", "ccvl-upper", "cql", "anti-explore", "plain", "aevl"};
        if (std::find(known.begin(), known.end(), cfg.solver.method) == known.end())
            throw ConfigError("solver.method: unknown method '" + cfg.solver.method + "'");
        if (cfg.solver.alpha < 0.0) throw ConfigError("solver.alpha: must be nonnegative");
        if (cfg.solver.iota <= 0.0) throw ConfigError("solver.iota: must be positive");
        if (cfg.solver.tol <= 0.0) throw ConfigError("solver.tol: must be positive");
        cfg.solver.grid();  // validates deltas
    }

    if (j.contains("policy")) {
        const json& p = j.at("policy");
        cfg.policy.mode = policy_kind_from_string(p.value("mode", "belief-sample"));
        cfg.policy.fixed_delta_index = p.value("fixed_delta_index", 0);
        cfg.policy.beta = p.value("beta", 0.9);
        cfg.policy.use_upper = p.value("use_upper", cfg.policy.mode == PolicyKind::SafeSet);
        cfg.policy.resample_each_step = p.value("resample_each_step", false);
        cfg.policy.carry_belief = p.value("carry_belief", true);
        cfg.policy.temperature = p.value("temperature", 1.0);
        cfg.policy.seed = p.value("seed", 0ull);
        cfg.policy.validate();
    }

    if (j.contains("eval")) {
        const json& e = j.at("eval");
        cfg.eval.episodes = e.value("episodes", 100);
        cfg.eval.horizon = e.value("horizon", 100);
        cfg.eval.seeds = e.value("seeds", std::vector<std::uint64_t>{0});
        if (cfg.eval.episodes <= 0) throw ConfigError("eval.episodes: must be positive");
        if (cfg.eval.horizon <= 0) throw ConfigError("eval.horizon: must be positive");
        if (cfg.eval.seeds.empty()) throw ConfigError("eval.seeds: must be nonempty");
    }

    if (j.contains("coverage")) {
        const json& c = j.at("coverage");
        cfg.coverage.num_resamples = c.value("num_resamples", 200);
        cfg.coverage.deltas = c.value("deltas", std::vector<double>{0.1, 0.3, 0.5});
        if (cfg.coverage.num_resamples < 100)
            throw ConfigError("coverage.num_resamples: must be at least 100");
        if (cfg.coverage.deltas.empty()) throw ConfigError("coverage.deltas: must be nonempty");
    }

    if (j.contains("sweep")) {
        const json& s = j.at("sweep");
        cfg.sweep.alphas = s.value("alphas", std::vector<double>{0.05, 0.1, 0.2, 0.5, 1.0});
        cfg.sweep.seeds = s.value("seeds", std::vector<std::uint64_t>{0, 1, 2, 3, 4});
        cfg.sweep.methods = s.value("methods", std::vector<std::string>{"cql", "ccvl-reg"});
        if (cfg.sweep.alphas.empty()) throw ConfigError("sweep.alphas: must be nonempty");
        if (cfg.sweep.seeds.empty()) throw ConfigError("sweep.seeds: must be nonempty");
    }

    return cfg;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

std::string ExperimentConfig::canonical_json() const {
    json j;
    j["env_train"] = env_to_json(env_train);
    j["env_eval"] = env_to_json(env_eval);
    j["dataset"] = {{"num_samples", dataset.num_samples},
                    {"epsilon_opt", dataset.epsilon_opt},
                    {"horizon", dataset.horizon},
                    {"seed", dataset.seed}};
    const char* mode_name = solver.policy_mode == PolicyMode::Greedy    ? "greedy"
                            : solver.policy_mode == PolicyMode::Softmax ? "softmax"
                                                                        : "equilibrium";
    j["solver"] = {{"method", solver.method},
                   {"alpha", solver.alpha},
                   {"iota", solver.iota},
                   {"deltas", solver.grid().deltas},
                   {"policy_mode", mode_name},
                   {"temperature", solver.temperature},
                   {"state_action_weighting", solver.state_action_weighting},
                   {"tol", solver.tol},
                   {"max_iters", solver.max_iters},
                   {"ensemble_size", solver.ensemble_size}};
    j["policy"] = {{"mode", policy_kind_to_string(policy.mode)},
                   {"fixed_delta_index", policy.fixed_delta_index},
                   {"beta", policy.beta},
                   {"use_upper", policy.use_upper},
                   {"resample_each_step", policy.resample_each_step},
                   {"carry_belief", policy.carry_belief},
                   {"temperature", policy.temperature},
                   {"seed", policy.seed}};
    j["eval"] = {{"episodes", eval.episodes}, {"horizon", eval.horizon}, {"seeds", eval.seeds}};
    j["coverage"] = {{"num_resamples", coverage.num_resamples}, {"deltas", coverage.deltas}};
    j["sweep"] = {{"alphas", sweep.alphas}, {"seeds", sweep.seeds}, {"methods", sweep.methods}};
    return j.dump();  // nlohmann objects iterate key-sorted
}

std::string ExperimentConfig::config_hash() const { return digest_hex(canonical_json()); }

}  // namespace ccvl

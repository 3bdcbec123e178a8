#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ccvl/adaptive.hpp"
#include "ccvl/mdp.hpp"
#include "ccvl/solver.hpp"

namespace ccvl {

/// Environment description: a gridworld layout or a seeded random MDP.
struct EnvSpec {
    std::string type = "gridworld";  // "gridworld" | "random"
    GridworldSpec grid;
    RandomMdpSpec random;

    TabularMdp build() const;
};

struct DatasetSpec {
    int num_samples = 2500;
    double epsilon_opt = 0.5;  // behavior = mix_policy(optimal, epsilon_opt)
    int horizon = 100;
    std::uint64_t seed = 0;
};

struct SolverSpec {
    std::string method = "ccvl-reg";  // ccvl-bonus | ccvl-reg | ccvl-upper | cql | anti-explore | plain | aevl
    double alpha = 0.2;
    double iota = 1.0;
    std::vector<double> deltas;  // empty -> ConfidenceGrid::default_grid()
    PolicyMode policy_mode = PolicyMode::Equilibrium;
    double temperature = 0.01;
    bool state_action_weighting = false;
    double tol = 1e-8;
    int max_iters = 10000;
    int ensemble_size = 5;

    ConfidenceGrid grid() const;
};

struct EvalSpec {
    int episodes = 100;
    int horizon = 100;
    std::vector<std::uint64_t> seeds = {0};
};

struct CoverageSpec {
    int num_resamples = 200;
    std::vector<double> deltas = {0.1, 0.3, 0.5};
};

struct SweepSpec {
    std::vector<double> alphas = {0.05, 0.1, 0.2, 0.5, 1.0};
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
    std::vector<std::string> methods = {"cql", "ccvl-reg"};
};

/// One JSON document drives a whole collect -> train -> eval pipeline.
/// env_eval may be given as a partial override of env_train (e.g. only
/// "slip_prob"), keeping the two environments identical elsewhere.
struct ExperimentConfig {
    EnvSpec env_train;
    EnvSpec env_eval;
    DatasetSpec dataset;
    SolverSpec solver;
    AdaptivePolicyConfig policy;
    EvalSpec eval;
    CoverageSpec coverage;
    SweepSpec sweep;

    static ExperimentConfig from_json(const std::string& text);
    static ExperimentConfig from_json_file(const std::string& path);

    /// Canonical (key-sorted, compact) JSON of the full resolved config.
    std::string canonical_json() const;
    /// Stable FNV-1a 64-bit digest of canonical_json(), hex-encoded.
    std::string config_hash() const;
};

}  // namespace ccvl

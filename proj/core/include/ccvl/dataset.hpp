#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "ccvl/mdp.hpp"

namespace ccvl {

struct Transition {
    int s = 0;
    int a = 0;
    double r = 0.0;
    int s_next = 0;
    bool done = false;
};

/// Flat transition log with exact visitation counts and the empirical
/// behavior policy derived from them.
struct OfflineDataset {
    int num_states = 0;
    int num_actions = 0;
    std::vector<Transition> transitions;
    std::vector<std::int64_t> count_sa;  // [S][A]
    std::vector<std::int64_t> count_s;   // [S]
    Policy behavior_hat;

    std::int64_t n_sa(int s, int a) const {
        return count_sa[static_cast<std::size_t>(s) * num_actions + a];
    }
    std::int64_t n_s(int s) const { return count_s[s]; }

    static OfflineDataset from_transitions(int num_states, int num_actions,
                                           std::vector<Transition> transitions);
};

/// Rolls episodes from initial_dist under `behavior` until exactly num_samples
/// transitions are gathered; episodes truncate at `horizon` or on terminal entry.
OfflineDataset collect_dataset(const TabularMdp& mdp, const Policy& behavior, int num_samples,
                               int horizon, std::uint64_t seed);

/// Empirical MDP estimated from a dataset: successor frequencies, mean
/// observed rewards, and a terminal flag for states only ever seen as
/// done-next-states (their bootstrap value is pinned to zero).
struct EmpiricalModel {
    int num_states = 0;
    int num_actions = 0;
    std::vector<double> p_hat;  // [S][A][S]
    std::vector<double> r_hat;  // [S][A]
    std::vector<char> visited;  // [S][A]
    std::vector<char> terminal; // [S]

    bool is_visited(int s, int a) const {
        return visited[static_cast<std::size_t>(s) * num_actions + a] != 0;
    }
    double r(int s, int a) const { return r_hat[static_cast<std::size_t>(s) * num_actions + a]; }
    std::span<const double> row(int s, int a) const {
        return {p_hat.data() + (static_cast<std::size_t>(s) * num_actions + a) * num_states,
                static_cast<std::size_t>(num_states)};
    }
};

EmpiricalModel build_empirical_model(const OfflineDataset& data);

struct MdpMeta {
    double discount = 0.99;
    double r_max = 1.0;
    double value_bound() const { return r_max / (1.0 - discount); }
};

/// One empirical Bellman optimality backup over the dataset model. Unvisited
/// pairs fall back to -r_max/(1-gamma); output is clamped to +-r_max/(1-gamma).
std::vector<double> empirical_bellman(std::span<const double> q, const EmpiricalModel& model,
                                      const MdpMeta& meta);

/// JSON Lines persistence: {"s":..,"a":..,"r":..,"s_next":..,"done":..} per line.
void save_jsonl(const OfflineDataset& data, std::ostream& out);
void save_jsonl_file(const OfflineDataset& data, const std::string& path);
OfflineDataset load_jsonl(std::istream& in, int num_states, int num_actions);
OfflineDataset load_jsonl_file(const std::string& path, int num_states, int num_actions);

}  // namespace ccvl

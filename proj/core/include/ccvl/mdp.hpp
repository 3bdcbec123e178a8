#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ccvl/errors.hpp"

namespace ccvl {

/// Row-stochastic policy table [S][A].
struct Policy {
    int num_states = 0;
    int num_actions = 0;
    std::vector<double> probs;  // row-major [S][A]

    double at(int s, int a) const { return probs[static_cast<std::size_t>(s) * num_actions + a]; }
    double& at(int s, int a) { return probs[static_cast<std::size_t>(s) * num_actions + a]; }
    std::span<const double> row(int s) const {
        return {probs.data() + static_cast<std::size_t>(s) * num_actions,
                static_cast<std::size_t>(num_actions)};
    }
    static Policy uniform(int num_states, int num_actions);
    void validate() const;  // throws ConfigError if any row is not a distribution
};

/// Exact finite MDP. Terminal states self-loop with reward 0.
struct TabularMdp {
    int num_states = 0;
    int num_actions = 0;
    std::vector<double> transition;    // [S][A][S]
    std::vector<double> reward;        // [S][A]
    double discount = 0.99;
    double r_max = 1.0;
    std::vector<double> initial_dist;  // [S]
    std::vector<char> terminal;        // [S]

    double p(int s, int a, int s2) const {
        return transition[(static_cast<std::size_t>(s) * num_actions + a) * num_states + s2];
    }
    std::span<const double> row(int s, int a) const {
        return {transition.data() + (static_cast<std::size_t>(s) * num_actions + a) * num_states,
                static_cast<std::size_t>(num_states)};
    }
    double r(int s, int a) const { return reward[static_cast<std::size_t>(s) * num_actions + a]; }
    bool is_terminal(int s) const { return terminal[s] != 0; }

    /// r_max / (1 - gamma), the sup-norm bound on any attainable Q-value.
    double value_bound() const { return r_max / (1.0 - discount); }

    void validate() const;
    std::string to_json() const;  // dense inspection dump
};

enum class Cell : std::uint8_t { Empty, Wall, Start, Goal, Lava };

/// Declarative gridworld layout. Rows use the characters S/G/L/W/. and every
/// cell (walls included) becomes one MDP state.
struct GridworldSpec {
    int width = 0;
    int height = 0;
    std::vector<Cell> cells;  // row-major [height][width]
    double slip_prob = 0.0;
    double goal_reward = 1.0;
    double discount = 0.95;

    Cell cell(int x, int y) const { return cells[static_cast<std::size_t>(y) * width + x]; }
    int state_id(int x, int y) const { return y * width + x; }
    void validate() const;

    static GridworldSpec from_rows(std::span<const std::string> rows, double slip_prob,
                                   double goal_reward, double discount = 0.95);
    static GridworldSpec from_json(const std::string& text);
    std::string to_json() const;
};

/// Seeded dense random MDP: Dirichlet(concentration) transition rows, i.i.d.
/// uniform rewards in [reward_min, reward_max], uniform initial distribution,
/// no terminal states. reward_action_bias > 0 tilts rewards by action index,
/// which widens action gaps while flattening cross-state value spread.
struct RandomMdpSpec {
    int num_states = 5;
    int num_actions = 2;
    std::uint64_t seed = 0;
    double discount = 0.9;
    double reward_min = 0.0;
    double reward_max = 1.0;
    double concentration = 1.0;
    double reward_action_bias = 0.0;
};

TabularMdp build_gridworld(const GridworldSpec& spec);
TabularMdp make_random_mdp(const RandomMdpSpec& spec);

/// One exact Bellman optimality backup B*Q over the true model.
std::vector<double> bellman_optimality_backup(const TabularMdp& mdp, std::span<const double> q);

/// Value iteration to ||B*Q - Q||_inf <= tol. Throws ConvergenceError past max_iters.
std::vector<double> solve_optimal_q(const TabularMdp& mdp, double tol = 1e-10,
                                    int max_iters = 100000);

/// Uniform over all actions within tie_tol of the row max.
Policy greedy_policy(std::span<const double> q, int num_states, int num_actions,
                     double tie_tol = 1e-9);

/// epsilon_opt * base + (1 - epsilon_opt) * uniform.
Policy mix_policy(const Policy& base, double epsilon_opt);

}  // namespace ccvl

#include "ccvl/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ccvl/rng.hpp"

namespace ccvl {

namespace {

constexpr double kRowSumTol = 1e-12;

void check_distribution(std::span<const double> row, const std::string& what) {
    double sum = 0.0;
    for (double p : row) {
        if (p < 0.0) throw ConfigError(what + ": negative probability entry");
        sum += p;
    }
    if (std::abs(sum - 1.0) > kRowSumTol * std::max<double>(1.0, row.size()))
        throw ConfigError(what + ": row sums to " + std::to_string(sum) + ", expected 1");
}

}  // namespace

Policy Policy::uniform(int num_states, int num_actions) {
    Policy p{num_states, num_actions,
             std::vector<double>(static_cast<std::size_t>(num_states) * num_actions,
                                 1.0 / num_actions)};
    return p;
}

void Policy::validate() const {
    if (num_states <= 0 || num_actions <= 0) throw ConfigError("Policy: empty dimensions");
    for (int s = 0; s < num_states; ++s) check_distribution(row(s), "Policy row " + std::to_string(s));
}

void TabularMdp::validate() const {
    if (num_states <= 0 || num_actions <= 0) throw ConfigError("TabularMdp: empty dimensions");
    if (discount <= 0.0 || discount >= 1.0) throw ConfigError("TabularMdp: discount outside (0,1)");
    for (int s = 0; s < num_states; ++s)
        for (int a = 0; a < num_actions; ++a) {
            check_distribution(row(s, a),
                               "transition[" + std::to_string(s) + "][" + std::to_string(a) + "]");
            if (std::abs(r(s, a)) > r_max + 1e-12)
                throw ConfigError("TabularMdp: |reward| exceeds declared r_max");
        }
    check_distribution(initial_dist, "initial_dist");
    for (int s = 0; s < num_states; ++s) {
        if (!is_terminal(s)) continue;
        for (int a = 0; a < num_actions; ++a) {
            if (std::abs(p(s, a, s) - 1.0) > kRowSumTol || std::abs(r(s, a)) > 0.0)
                throw ConfigError("TabularMdp: terminal state " + std::to_string(s) +
                                  " must self-loop with reward 0");
        }
    }
}

std::string TabularMdp::to_json() const {
    nlohmann::json j;
    j["num_states"] = num_states;
    j["num_actions"] = num_actions;
    j["discount"] = discount;
    j["r_max"] = r_max;
    j["transition"] = transition;
    j["reward"] = reward;
    j["initial_dist"] = initial_dist;
    std::vector<bool> term(terminal.begin(), terminal.end());
    j["terminal"] = term;
    return j.dump();
}

void GridworldSpec::validate() const {
    if (width <= 0 || height <= 0) throw ConfigError("GridworldSpec: empty grid");
    if (cells.size() != static_cast<std::size_t>(width) * height)
        throw ConfigError("GridworldSpec: cells size does not match width*height");
    if (slip_prob < 0.0 || slip_prob >= 1.0) throw ConfigError("GridworldSpec: slip_prob outside [0,1)");
    if (discount <= 0.0 || discount >= 1.0) throw ConfigError("GridworldSpec: discount outside (0,1)");
    int starts = 0, goals = 0;
    for (Cell c : cells) {
        starts += c == Cell::Start;
        goals += c == Cell::Goal;
    }
    if (starts != 1) throw ConfigError("GridworldSpec: expected exactly one Start, found " +
                                       std::to_string(starts));
    if (goals < 1) throw ConfigError("GridworldSpec: expected at least one Goal");
}

GridworldSpec GridworldSpec::from_rows(std::span<const std::string> rows, double slip_prob,
                                       double goal_reward, double discount) {
    GridworldSpec spec;
    spec.height = static_cast<int>(rows.size());
    spec.width = spec.height > 0 ? static_cast<int>(rows[0].size()) : 0;
    spec.slip_prob = slip_prob;
    spec.goal_reward = goal_reward;
    spec.discount = discount;
    for (const auto& row : rows) {
        if (static_cast<int>(row.size()) != spec.width)
            throw ConfigError("GridworldSpec: ragged rows");
        for (char c : row) {
            switch (c) {
                case '.': spec.cells.push_back(Cell::Empty); break;
                case 'W': spec.cells.push_back(Cell::Wall); break;
                case 'S': spec.cells.push_back(Cell::Start); break;
                case 'G': spec.cells.push_back(Cell::Goal); break;
                case 'L': spec.cells.push_back(Cell::Lava); break;
                default:
                    throw ConfigError(std::string("GridworldSpec: unknown cell character '") + c +
                                      "'");
            }
        }
    }
    spec.validate();
    return spec;
}

GridworldSpec GridworldSpec::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    std::vector<std::string> rows = j.at("rows").get<std::vector<std::string>>();
    double slip = j.at("slip_prob").get<double>();
    double goal = j.at("goal_reward").get<double>();
    double disc = j.value("discount", 0.95);
    GridworldSpec spec = from_rows(rows, slip, goal, disc);
    if (j.contains("width") && j.at("width").get<int>() != spec.width)
        throw ConfigError("GridworldSpec: width field disagrees with rows");
    if (j.contains("height") && j.at("height").get<int>() != spec.height)
        throw ConfigError("GridworldSpec: height field disagrees with rows");
    return spec;
}

std::string GridworldSpec::to_json() const {
    nlohmann::json j;
    j["width"] = width;
    j["height"] = height;
    std::vector<std::string> rows;
    for (int y = 0; y < height; ++y) {
        std::string row;
        for (int x = 0; x < width; ++x) {
            switch (cell(x, y)) {
                case Cell::Empty: row += '.'; break;
                case Cell::Wall: row += 'W'; break;
                case Cell::Start: row += 'S'; break;
                case Cell::Goal: row += 'G'; break;
                case Cell::Lava: row += 'L'; break;
            }
        }
        rows.push_back(row);
    }
    j["rows"] = rows;
    j["slip_prob"] = slip_prob;
    j["goal_reward"] = goal_reward;
    j["discount"] = discount;
    return j.dump();
}

TabularMdp build_gridworld(const GridworldSpec& spec) {
    spec.validate();
    const int S = spec.width * spec.height;
    const int A = 4;  // up, down, left, right
    TabularMdp mdp;
    mdp.num_states = S;
    mdp.num_actions = A;
    mdp.discount = spec.discount;
    mdp.transition.assign(static_cast<std::size_t>(S) * A * S, 0.0);
    mdp.reward.assign(static_cast<std::size_t>(S) * A, 0.0);
    mdp.initial_dist.assign(S, 0.0);
    mdp.terminal.assign(S, 0);

    const int dx[4] = {0, 0, -1, 1};
    const int dy[4] = {-1, 1, 0, 0};

    auto passable = [&](int x, int y) {
        return x >= 0 && x < spec.width && y >= 0 && y < spec.height && spec.cell(x, y) != Cell::Wall;
    };

    for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x) {
            const int s = spec.state_id(x, y);
            const Cell c = spec.cell(x, y);
            if (c == Cell::Start) mdp.initial_dist[s] = 1.0;
            // Goal and lava absorb; wall states are unreachable and also self-loop.
            if (c == Cell::Goal || c == Cell::Lava || c == Cell::Wall) {
                mdp.terminal[s] = 1;
                for (int a = 0; a < A; ++a)
                    mdp.transition[(static_cast<std::size_t>(s) * A + a) * S + s] = 1.0;
                continue;
            }
            for (int a = 0; a < A; ++a) {
                double reward_acc = 0.0;
                for (int dir = 0; dir < 4; ++dir) {
                    const double mass = dir == a ? 1.0 - spec.slip_prob : spec.slip_prob / 3.0;
                    if (mass == 0.0) continue;
                    int nx = x + dx[dir], ny = y + dy[dir];
                    int target = passable(nx, ny) ? spec.state_id(nx, ny) : s;
                    mdp.transition[(static_cast<std::size_t>(s) * A + a) * S + target] += mass;
                    if (passable(nx, ny) && spec.cell(nx, ny) == Cell::Goal)
                        reward_acc += mass * spec.goal_reward;
                }
                mdp.reward[static_cast<std::size_t>(s) * A + a] = reward_acc;
            }
        }

    mdp.r_max = std::max(std::abs(spec.goal_reward), 1e-12);
    mdp.validate();
    return mdp;
}

TabularMdp make_random_mdp(const RandomMdpSpec& spec) {
    if (spec.num_states <= 0 || spec.num_actions <= 0)
        throw ConfigError("RandomMdpSpec: empty dimensions");
    Rng rng(spec.seed);
    TabularMdp mdp;
    const int S = spec.num_states, A = spec.num_actions;
    mdp.num_states = S;
    mdp.num_actions = A;
    mdp.discount = spec.discount;
    mdp.transition.assign(static_cast<std::size_t>(S) * A * S, 0.0);
    mdp.reward.assign(static_cast<std::size_t>(S) * A, 0.0);
    mdp.initial_dist.assign(S, 1.0 / S);
    mdp.terminal.assign(S, 0);

    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            // Dirichlet draw via normalized gamma(concentration) variates.
            double total = 0.0;
            std::vector<double> row(S);
            for (int s2 = 0; s2 < S; ++s2) {
                double g = 0.0;
                if (spec.concentration == 1.0) {
                    g = -std::log(1.0 - uniform01(rng));
                } else {
                    std::gamma_distribution<double> gamma(spec.concentration, 1.0);
                    g = gamma(rng);
                }
                row[s2] = g;
                total += g;
            }
            for (int s2 = 0; s2 < S; ++s2)
                mdp.transition[(static_cast<std::size_t>(s) * A + a) * S + s2] = row[s2] / total;

            double u = uniform01(rng);
            double bias = A > 1 ? static_cast<double>(a) / (A - 1) : 0.0;
            double unit = spec.reward_action_bias * bias + (1.0 - spec.reward_action_bias) * u;
            mdp.reward[static_cast<std::size_t>(s) * A + a] =
                spec.reward_min + (spec.reward_max - spec.reward_min) * unit;
        }

    mdp.r_max = std::max(std::abs(spec.reward_min), std::abs(spec.reward_max));
    mdp.validate();
    return mdp;
}

std::vector<double> bellman_optimality_backup(const TabularMdp& mdp, std::span<const double> q) {
    const int S = mdp.num_states, A = mdp.num_actions;
    if (q.size() != static_cast<std::size_t>(S) * A)
        throw ShapeError("bellman_optimality_backup: q size mismatch");
    std::vector<double> vmax(S, 0.0);
    for (int s = 0; s < S; ++s) {
        double best = q[static_cast<std::size_t>(s) * A];
        for (int a = 1; a < A; ++a) best = std::max(best, q[static_cast<std::size_t>(s) * A + a]);
        vmax[s] = best;
    }
    std::vector<double> out(static_cast<std::size_t>(S) * A, 0.0);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            double exp_next = 0.0;
            auto row = mdp.row(s, a);
            for (int s2 = 0; s2 < S; ++s2) exp_next += row[s2] * vmax[s2];
            out[static_cast<std::size_t>(s) * A + a] = mdp.r(s, a) + mdp.discount * exp_next;
        }
    return out;
}

std::vector<double> solve_optimal_q(const TabularMdp& mdp, double tol, int max_iters) {
    if (tol <= 0.0) throw ConfigError("solve_optimal_q: tol must be positive");
    std::vector<double> q(static_cast<std::size_t>(mdp.num_states) * mdp.num_actions, 0.0);
    double residual = 0.0;
    for (int it = 0; it < max_iters; ++it) {
        std::vector<double> next = bellman_optimality_backup(mdp, q);
        residual = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i)
            residual = std::max(residual, std::abs(next[i] - q[i]));
        q = std::move(next);
        if (residual <= tol) return q;
    }
    throw ConvergenceError("solve_optimal_q: residual " + std::to_string(residual) + " after " +
                               std::to_string(max_iters) + " iterations",
                           residual, max_iters);
}

Policy greedy_policy(std::span<const double> q, int num_states, int num_actions, double tie_tol) {
    if (tie_tol < 0.0) throw ConfigError("greedy_policy: tie_tol must be nonnegative");
    if (q.size() != static_cast<std::size_t>(num_states) * num_actions)
        throw ShapeError("greedy_policy: q size mismatch");
    Policy p{num_states, num_actions,
             std::vector<double>(static_cast<std::size_t>(num_states) * num_actions, 0.0)};
    for (int s = 0; s < num_states; ++s) {
        double best = q[static_cast<std::size_t>(s) * num_actions];
        for (int a = 1; a < num_actions; ++a)
            best = std::max(best, q[static_cast<std::size_t>(s) * num_actions + a]);
        int ties = 0;
        for (int a = 0; a < num_actions; ++a)
            ties += q[static_cast<std::size_t>(s) * num_actions + a] >= best - tie_tol;
        for (int a = 0; a < num_actions; ++a)
            if (q[static_cast<std::size_t>(s) * num_actions + a] >= best - tie_tol)
                p.at(s, a) = 1.0 / ties;
    }
    return p;
}

Policy mix_policy(const Policy& base, double epsilon_opt) {
    if (epsilon_opt < 0.0 || epsilon_opt > 1.0)
        throw ConfigError("mix_policy: epsilon_opt outside [0,1]");
    Policy p = base;
    const double u = (1.0 - epsilon_opt) / base.num_actions;
    for (double& v : p.probs) v = epsilon_opt * v + u;
    return p;
}

}  // namespace ccvl

#include "ccvl/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include <nlohmann/json.hpp>

#include "equilibrium.hpp"

namespace ccvl {

namespace {

constexpr double kAttainTol = 1e-12;

void check_shapes(const ConfidenceQ& prev, const OfflineDataset& data,
                  const EmpiricalModel& model) {
    if (prev.num_states != data.num_states || prev.num_actions != data.num_actions ||
        prev.num_states != model.num_states || prev.num_actions != model.num_actions)
        throw ShapeError("ccvl backup: table/dataset/model shape mismatch");
}

/// Empirical backups of every delta slice, clamped to +-r_max/(1-gamma).
std::vector<std::vector<double>> slice_backups(const ConfidenceQ& prev,
                                               const EmpiricalModel& model) {
    std::vector<std::vector<double>> b(prev.k());
    for (int k = 0; k < prev.k(); ++k) b[k] = empirical_bellman(prev.slice(k), model, prev.meta);
    return b;
}

void enforce_monotone(ConfidenceQ& table) {
    const int K = table.k();
    for (int s = 0; s < table.num_states; ++s)
        for (int a = 0; a < table.num_actions; ++a)
            for (int k = 1; k < K; ++k) {
                double& cur = table.at(s, a, k);
                double prev = table.at(s, a, k - 1);
                cur = table.bound_kind == BoundKind::Lower ? std::max(cur, prev)
                                                           : std::min(cur, prev);
            }
}

}  // namespace

void ConfidenceGrid::validate() const {
    if (deltas.empty()) throw ConfigError("ConfidenceGrid: empty grid");
    if (deltas.front() <= 0.0 || deltas.back() >= 1.0)
        throw ConfigError("ConfidenceGrid: deltas must lie in (0,1)");
    for (std::size_t i = 1; i < deltas.size(); ++i)
        if (deltas[i] <= deltas[i - 1])
            throw ConfigError("ConfidenceGrid: deltas must be strictly increasing");
}

int ConfidenceGrid::index_of(double delta, double tol) const {
    for (int k = 0; k < size(); ++k)
        if (std::abs(deltas[k] - delta) <= tol) return k;
    throw ShapeError("ConfidenceGrid: delta " + std::to_string(delta) + " is not a grid point");
}

ConfidenceGrid ConfidenceGrid::default_grid() {
    return ConfidenceGrid{{0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9}};
}

std::vector<double> ConfidenceQ::slice(int ki) const {
    std::vector<double> out(static_cast<std::size_t>(num_states) * num_actions);
    for (int s = 0; s < num_states; ++s)
        for (int a = 0; a < num_actions; ++a)
            out[static_cast<std::size_t>(s) * num_actions + a] = at(s, a, ki);
    return out;
}

double ConfidenceQ::bonus_cap() const {
    return alpha * std::sqrt(iota * std::log(1.0 / grid.min_delta()));
}

ConfidenceQ ConfidenceQ::lower_init(int num_states, int num_actions, ConfidenceGrid grid,
                                    double alpha, double iota, MdpMeta meta) {
    grid.validate();
    if (alpha < 0.0 || iota <= 0.0)
        throw ConfigError("ConfidenceQ: alpha must be >= 0 and iota > 0");
    ConfidenceQ q;
    q.num_states = num_states;
    q.num_actions = num_actions;
    q.grid = std::move(grid);
    q.bound_kind = BoundKind::Lower;
    q.alpha = alpha;
    q.iota = iota;
    q.meta = meta;
    q.values.assign(static_cast<std::size_t>(num_states) * num_actions * q.grid.size(),
                    -meta.value_bound());
    return q;
}

ConfidenceQ ConfidenceQ::upper_init(int num_states, int num_actions, ConfidenceGrid grid,
                                    double alpha, double iota, MdpMeta meta) {
    ConfidenceQ q = lower_init(num_states, num_actions, std::move(grid), alpha, iota, meta);
    q.bound_kind = BoundKind::Upper;
    std::fill(q.values.begin(), q.values.end(), meta.value_bound());
    return q;
}

std::string ConfidenceQ::to_json() const {
    nlohmann::json j;
    j["bound_kind"] = bound_kind == BoundKind::Lower ? "lower" : "upper";
    j["alpha"] = alpha;
    j["iota"] = iota;
    j["deltas"] = grid.deltas;
    j["discount"] = meta.discount;
    j["r_max"] = meta.r_max;
    j["num_states"] = num_states;
    j["num_actions"] = num_actions;
    j["values"] = values;
    return j.dump();
}

ConfidenceQ ConfidenceQ::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    ConfidenceQ q;
    q.bound_kind = j.at("bound_kind").get<std::string>() == "upper" ? BoundKind::Upper
                                                                    : BoundKind::Lower;
    q.alpha = j.at("alpha").get<double>();
    q.iota = j.at("iota").get<double>();
    q.grid.deltas = j.at("deltas").get<std::vector<double>>();
    q.grid.validate();
    q.meta.discount = j.at("discount").get<double>();
    q.meta.r_max = j.at("r_max").get<double>();
    q.num_states = j.at("num_states").get<int>();
    q.num_actions = j.at("num_actions").get<int>();
    q.values = j.at("values").get<std::vector<double>>();
    if (q.values.size() !=
        static_cast<std::size_t>(q.num_states) * q.num_actions * q.grid.size())
        throw ShapeError("ConfidenceQ::from_json: values length mismatch");
    return q;
}

void ConfidenceQ::write_csv(std::ostream& out) const {
    out << "s,a,delta,q\n";
    for (int s = 0; s < num_states; ++s)
        for (int a = 0; a < num_actions; ++a)
            for (int k = 0; k < grid.size(); ++k) {
                char buf[64];
                std::snprintf(buf, sizeof(buf), "%.17g", at(s, a, k));
                out << s << ',' << a << ',' << grid.at(k) << ',' << buf << '\n';
            }
}

double bonus(std::int64_t n, double delta, double alpha, double iota) {
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("bonus: delta outside (0,1)");
    if (alpha < 0.0 || iota <= 0.0) throw ConfigError("bonus: alpha must be >= 0 and iota > 0");
    const double n_eff = static_cast<double>(std::max<std::int64_t>(n, 1));
    return alpha * std::sqrt(iota * std::log(1.0 / delta) / n_eff);
}

SweepOutcome ccvl_bonus_backup(const ConfidenceQ& prev, const OfflineDataset& data,
                               const EmpiricalModel& model) {
    if (prev.bound_kind != BoundKind::Lower)
        throw ConfigError("ccvl_bonus_backup: expects a Lower table");
    check_shapes(prev, data, model);

    const int S = prev.num_states, A = prev.num_actions, K = prev.k();
    const auto b = slice_backups(prev, model);
    ConfidenceQ next = prev;
    const double lo = prev.clamp_lo(), hi = prev.clamp_hi();

    std::size_t degenerate = 0;
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            const std::size_t sa = static_cast<std::size_t>(s) * A + a;
            const std::int64_t n = data.n_sa(s, a);
            // max over (delta1, delta2) <= delta separates: the target max and
            // the bonus min accumulate independently over the prefix.
            double best_target = -std::numeric_limits<double>::infinity();
            double best_bonus = std::numeric_limits<double>::infinity();
            for (int k = 0; k < K; ++k) {
                const double target_k = b[k][sa];
                const double bonus_k = bonus(n, prev.grid.at(k), prev.alpha, prev.iota);
                best_target = std::max(best_target, target_k);
                best_bonus = std::min(best_bonus, bonus_k);
                if (target_k >= best_target - kAttainTol && bonus_k <= best_bonus + kAttainTol)
                    ++degenerate;
                next.at(s, a, k) = std::clamp(best_target - best_bonus, lo, hi);
            }
        }

    enforce_monotone(next);
    return {std::move(next),
            static_cast<double>(degenerate) / (static_cast<double>(S) * A * K)};
}

SweepOutcome ccvl_upper_backup(const ConfidenceQ& prev, const OfflineDataset& data,
                               const EmpiricalModel& model) {
    if (prev.bound_kind != BoundKind::Upper)
        throw ConfigError("ccvl_upper_backup: expects an Upper table");
    check_shapes(prev, data, model);

    const int S = prev.num_states, A = prev.num_actions, K = prev.k();
    const auto b = slice_backups(prev, model);
    ConfidenceQ next = prev;
    const double lo = prev.clamp_lo(), hi = prev.clamp_hi();

    std::size_t degenerate = 0;
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            const std::size_t sa = static_cast<std::size_t>(s) * A + a;
            const std::int64_t n = data.n_sa(s, a);
            double best_target = std::numeric_limits<double>::infinity();
            double best_bonus = std::numeric_limits<double>::infinity();
            for (int k = 0; k < K; ++k) {
                const double target_k = b[k][sa];
                const double bonus_k = bonus(n, prev.grid.at(k), prev.alpha, prev.iota);
                best_target = std::min(best_target, target_k);
                best_bonus = std::min(best_bonus, bonus_k);
                if (target_k <= best_target + kAttainTol && bonus_k <= best_bonus + kAttainTol)
                    ++degenerate;
                next.at(s, a, k) = std::clamp(best_target + best_bonus, lo, hi);
            }
        }

    enforce_monotone(next);
    return {std::move(next),
            static_cast<double>(degenerate) / (static_cast<double>(S) * A * K)};
}

SweepOutcome ccvl_reg_backup(const ConfidenceQ& prev, const OfflineDataset& data,
                             const EmpiricalModel& model, const RegOptions& opts) {
    if (prev.bound_kind != BoundKind::Lower)
        throw ConfigError("ccvl_reg_backup: expects a Lower table");
    check_shapes(prev, data, model);
    if (opts.mode == PolicyMode::Softmax && opts.temperature <= 0.0)
        throw ConfigError("ccvl_reg_backup: softmax temperature must be positive");
    // Equilibrium mode: temperature > 0 is the entropy-regularized maximizer,
    // temperature == 0 the hard limit (support values tie exactly).

    const int S = prev.num_states, A = prev.num_actions, K = prev.k();
    const auto b = slice_backups(prev, model);
    ConfidenceQ next = prev;
    const double lo = prev.clamp_lo(), hi = prev.clamp_hi();
    const double delta_min = prev.grid.min_delta();

    std::size_t degenerate = 0;
    std::vector<double> targets(A), beta(A), c_p(A), c_b(A), slice_q(A);
    for (int s = 0; s < S; ++s) {
        const double n_s = static_cast<double>(std::max<std::int64_t>(data.n_s(s), 1));
        const double floor = 1.0 / (static_cast<double>(data.n_s(s)) + A);
        for (int a = 0; a < A; ++a) beta[a] = std::max(data.behavior_hat.at(s, a), floor);

        for (int k = 0; k < K; ++k) {
            const double delta = prev.grid.at(k);
            std::vector<char> target_at_k(A, 0);
            for (int a = 0; a < A; ++a) {
                const std::size_t sa = static_cast<std::size_t>(s) * A + a;
                double best = -std::numeric_limits<double>::infinity();
                for (int k2 = 0; k2 <= k; ++k2) best = std::max(best, b[k2][sa]);
                targets[a] = best;
                target_at_k[a] = b[k][sa] >= best - kAttainTol;

                if (opts.state_action_weighting) {
                    const double n_sa =
                        static_cast<double>(std::max<std::int64_t>(data.n_sa(s, a), 1));
                    const double root_beta = std::sqrt(beta[a]);
                    c_p[a] = prev.alpha * std::sqrt(prev.iota * std::log(1.0 / delta) / n_sa) /
                             root_beta;
                    c_b[a] = prev.alpha *
                             std::sqrt(prev.iota * std::log(1.0 / delta_min) / n_sa) / root_beta;
                } else {
                    c_p[a] = prev.alpha * std::sqrt(prev.iota * std::log(1.0 / delta) / n_s) /
                             beta[a];
                    c_b[a] = prev.alpha *
                             std::sqrt(prev.iota * std::log(1.0 / delta_min) / n_s) / beta[a];
                }
            }

            detail::PenalizedSolution sol;
            if (prev.alpha == 0.0) {
                sol.values.assign(targets.begin(), targets.end());
                sol.penalized.assign(A, 1);
            } else if (opts.mode == PolicyMode::Equilibrium) {
                if (opts.temperature > 0.0) {
                    auto pi = detail::entropy_equilibrium_policy(targets, beta, c_p, c_b,
                                                                 opts.temperature);
                    sol = detail::penalized_with_policy(targets, beta, pi, c_p, c_b);
                } else {
                    sol = detail::penalized_equilibrium(targets, beta, c_p, c_b);
                }
            } else {
                for (int a = 0; a < A; ++a) slice_q[a] = prev.at(s, a, k);
                std::vector<double> pi;
                if (opts.mode == PolicyMode::Softmax) {
                    pi = detail::softmax_policy(slice_q, opts.temperature);
                } else {
                    Policy g = greedy_policy(slice_q, 1, A);
                    pi.assign(g.probs.begin(), g.probs.end());
                }
                sol = detail::penalized_with_policy(targets, beta, pi, c_p, c_b);
            }

            const bool weights_coincide = std::abs(std::log(1.0 / delta) -
                                                   std::log(1.0 / delta_min)) <= kAttainTol;
            for (int a = 0; a < A; ++a) {
                next.at(s, a, k) = std::clamp(sol.values[a], lo, hi);
                if (target_at_k[a] && (sol.penalized[a] || weights_coincide)) ++degenerate;
            }
        }
    }

    enforce_monotone(next);
    return {std::move(next),
            static_cast<double>(degenerate) / (static_cast<double>(S) * A * K)};
}

std::pair<ConfidenceQ, SolveReport> solve(const BackupFn& backup, ConfidenceQ init, double tol,
                                          int max_iters) {
    if (tol <= 0.0) throw ConfigError("solve: tol must be positive");
    ConfidenceQ table = std::move(init);
    double residual = std::numeric_limits<double>::infinity();
    double degeneracy = 0.0;
    for (int it = 1; it <= max_iters; ++it) {
        SweepOutcome out = backup(table);
        residual = 0.0;
        for (std::size_t i = 0; i < table.values.size(); ++i)
            residual = std::max(residual, std::abs(out.table.values[i] - table.values[i]));
        degeneracy = out.degeneracy_rate;
        table = std::move(out.table);
        if (residual <= tol) return {std::move(table), SolveReport{it, residual, degeneracy}};
    }
    throw ConvergenceError("solve: residual " + std::to_string(residual) + " after " +
                               std::to_string(max_iters) + " sweeps",
                           residual, max_iters);
}

}  // namespace ccvl

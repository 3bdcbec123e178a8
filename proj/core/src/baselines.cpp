#include "ccvl/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include <nlohmann/json.hpp>

#include "ccvl/rng.hpp"
#include "equilibrium.hpp"

namespace ccvl {

namespace {

void check_shapes(const QTable& prev, const OfflineDataset& data, const EmpiricalModel& model) {
    if (prev.num_states != data.num_states || prev.num_actions != data.num_actions ||
        prev.num_states != model.num_states || prev.num_actions != model.num_actions)
        throw ShapeError("baseline backup: table/dataset/model shape mismatch");
}

}  // namespace

QTable QTable::constant(int num_states, int num_actions, double value, std::string tag) {
    QTable q;
    q.num_states = num_states;
    q.num_actions = num_actions;
    q.values.assign(static_cast<std::size_t>(num_states) * num_actions, value);
    q.method_tag = std::move(tag);
    return q;
}

std::string QTable::to_json() const {
    nlohmann::json j;
    j["method"] = method_tag;
    j["num_states"] = num_states;
    j["num_actions"] = num_actions;
    j["values"] = values;
    return j.dump();
}

QTable QTable::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    QTable q;
    q.method_tag = j.at("method").get<std::string>();
    q.num_states = j.at("num_states").get<int>();
    q.num_actions = j.at("num_actions").get<int>();
    q.values = j.at("values").get<std::vector<double>>();
    if (q.values.size() != static_cast<std::size_t>(q.num_states) * q.num_actions)
        throw ShapeError("QTable::from_json: values length mismatch");
    return q;
}

void QTable::write_csv(std::ostream& out) const {
    out << "s,a,q\n";
    for (int s = 0; s < num_states; ++s)
        for (int a = 0; a < num_actions; ++a) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.17g", at(s, a));
            out << s << ',' << a << ',' << buf << '\n';
        }
}

QTable plain_backup(const QTable& prev, const EmpiricalModel& model, const MdpMeta& meta) {
    QTable next = prev;
    next.values = empirical_bellman(prev.values, model, meta);
    return next;
}

QTable cql_backup(const QTable& prev, const OfflineDataset& data, const EmpiricalModel& model,
                  double alpha, const MdpMeta& meta, bool exact_inner_policy,
                  double temperature) {
    if (alpha < 0.0) throw ConfigError("cql_backup: alpha must be nonnegative");
    check_shapes(prev, data, model);
    if (alpha == 0.0) return plain_backup(prev, model, meta);

    const int S = prev.num_states, A = prev.num_actions;
    std::vector<double> targets_all = empirical_bellman(prev.values, model, meta);
    QTable next = prev;
    const double bound = meta.value_bound();

    std::vector<double> t(A), beta(A), c(A), prev_row(A);
    for (int s = 0; s < S; ++s) {
        const double floor = 1.0 / (static_cast<double>(data.n_s(s)) + A);
        for (int a = 0; a < A; ++a) {
            t[a] = targets_all[static_cast<std::size_t>(s) * A + a];
            beta[a] = std::max(data.behavior_hat.at(s, a), floor);
            c[a] = alpha / beta[a];  // alpha * (pi/beta - 1) as a slope in pi
            prev_row[a] = prev.at(s, a);
        }
        detail::PenalizedSolution sol;
        if (exact_inner_policy && temperature > 0.0) {
            auto pi = detail::entropy_equilibrium_policy(t, beta, c, c, temperature);
            sol = detail::penalized_with_policy(t, beta, pi, c, c);
        } else if (exact_inner_policy) {
            sol = detail::penalized_equilibrium(t, beta, c, c);
        } else {
            Policy g = greedy_policy(prev_row, 1, A);
            std::vector<double> pi(g.probs.begin(), g.probs.end());
            sol = detail::penalized_with_policy(t, beta, pi, c, c);
        }
        for (int a = 0; a < A; ++a)
            next.at(s, a) = std::clamp(sol.values[a], -bound - alpha * (1.0 / floor - 1.0),
                                       bound);
    }
    return next;
}

QTable anti_exploration_backup(const QTable& prev, const OfflineDataset& data,
                               const EmpiricalModel& model, double alpha, const MdpMeta& meta) {
    if (alpha < 0.0) throw ConfigError("anti_exploration_backup: alpha must be nonnegative");
    check_shapes(prev, data, model);

    const int S = prev.num_states, A = prev.num_actions;
    std::vector<double> targets = empirical_bellman(prev.values, model, meta);
    QTable next = prev;
    const double bound = meta.value_bound();
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            const double n_eff =
                static_cast<double>(std::max<std::int64_t>(data.n_sa(s, a), 1));
            const double v =
                targets[static_cast<std::size_t>(s) * A + a] - alpha * std::sqrt(1.0 / n_eff);
            next.at(s, a) = std::clamp(v, -bound - alpha, bound);
        }
    return next;
}

std::pair<QTable, SolveReport> solve_qtable(const QBackupFn& backup, QTable init, double tol,
                                            int max_iters) {
    if (tol <= 0.0) throw ConfigError("solve_qtable: tol must be positive");
    QTable table = std::move(init);
    double residual = std::numeric_limits<double>::infinity();
    for (int it = 1; it <= max_iters; ++it) {
        QTable next = backup(table);
        residual = 0.0;
        for (std::size_t i = 0; i < table.values.size(); ++i)
            residual = std::max(residual, std::abs(next.values[i] - table.values[i]));
        table = std::move(next);
        if (residual <= tol) return {std::move(table), SolveReport{it, residual, 0.0}};
    }
    throw ConvergenceError("solve_qtable: residual " + std::to_string(residual) + " after " +
                               std::to_string(max_iters) + " sweeps",
                           residual, max_iters);
}

EnsembleQ train_aevl_ensemble(const OfflineDataset& data, const EmpiricalModel& model,
                              int ensemble_size, double alpha,
                              std::span<const std::uint64_t> seeds, const MdpMeta& meta,
                              double tol, int max_iters, double temperature) {
    if (ensemble_size < 2 || static_cast<int>(seeds.size()) != ensemble_size)
        throw ConfigError("train_aevl_ensemble: need ensemble_size >= 2 matching seeds");
    EnsembleQ ensemble;
    ensemble.seeds.assign(seeds.begin(), seeds.end());
    const double bound = meta.value_bound();
    for (int i = 0; i < ensemble_size; ++i) {
        Rng rng(seeds[i]);
        QTable init = QTable::constant(data.num_states, data.num_actions, 0.0, "aevl");
        for (double& v : init.values) v = -bound + 2.0 * bound * uniform01(rng);
        auto [table, report] = solve_qtable(
            [&](const QTable& q) {
                return cql_backup(q, data, model, alpha, meta, true, temperature);
            },
            std::move(init), tol, max_iters);
        ensemble.members.push_back(std::move(table));
    }
    return ensemble;
}

int fixed_ccvl_select(const ConfidenceQ& ccvl, const OfflineDataset& data) {
    if (ccvl.num_states != data.num_states || ccvl.num_actions != data.num_actions)
        throw ShapeError("fixed_ccvl_select: table/dataset shape mismatch");
    const int K = ccvl.k();
    int best_k = 0;
    double best_err = std::numeric_limits<double>::infinity();
    for (int k = 0; k < K; ++k) {
        double total = 0.0;
        for (const Transition& t : data.transitions) {
            double next_v = 0.0;
            if (!t.done) {
                next_v = ccvl.at(t.s_next, 0, k);
                for (int a = 1; a < ccvl.num_actions; ++a)
                    next_v = std::max(next_v, ccvl.at(t.s_next, a, k));
            }
            const double resid = ccvl.at(t.s, t.a, k) - t.r - ccvl.meta.discount * next_v;
            total += resid * resid;
        }
        const double mean = data.transitions.empty() ? 0.0 : total / data.transitions.size();
        if (mean < best_err - 1e-15) {  // ties keep the smaller delta
            best_err = mean;
            best_k = k;
        }
    }
    return best_k;
}

}  // namespace ccvl

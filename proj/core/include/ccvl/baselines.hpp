#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ccvl/solver.hpp"

namespace ccvl {

/// Plain [S][A] value table for the non-confidence-conditioned methods.
struct QTable {
    int num_states = 0;
    int num_actions = 0;
    std::vector<double> values;  // [S][A]
    std::string method_tag;

    double at(int s, int a) const { return values[static_cast<std::size_t>(s) * num_actions + a]; }
    double& at(int s, int a) { return values[static_cast<std::size_t>(s) * num_actions + a]; }

    static QTable constant(int num_states, int num_actions, double value, std::string tag);

    std::string to_json() const;
    static QTable from_json(const std::string& text);
    void write_csv(std::ostream& out) const;  // s,a,q
};

/// One sweep of tabular conservative Q-learning:
/// Q'(s,a) = Bhat*Q(s,a) - alpha*(pi(a|s)/pi_beta_hat(a|s) - 1). By default pi
/// is greedy in the previous iterate (uniform tie-breaking); exact_inner_policy
/// instead solves the entropy-regularized inner maximization exactly at the
/// given temperature, which training loops need since greedy best-response
/// 2-cycles when alpha exceeds action gaps.
QTable cql_backup(const QTable& prev, const OfflineDataset& data, const EmpiricalModel& model,
                  double alpha, const MdpMeta& meta, bool exact_inner_policy = false,
                  double temperature = 0.01);

/// One sweep of count-bonus Q-learning: Q'(s,a) = Bhat*Q(s,a) - alpha*sqrt(1/max(n(s,a),1)).
QTable anti_exploration_backup(const QTable& prev, const OfflineDataset& data,
                               const EmpiricalModel& model, double alpha, const MdpMeta& meta);

/// One sweep of unpenalized empirical value iteration.
QTable plain_backup(const QTable& prev, const EmpiricalModel& model, const MdpMeta& meta);

using QBackupFn = std::function<QTable(const QTable&)>;

std::pair<QTable, SolveReport> solve_qtable(const QBackupFn& backup, QTable init,
                                            double tol = 1e-8, int max_iters = 10000);

struct EnsembleQ {
    std::vector<QTable> members;
    std::vector<std::uint64_t> seeds;
};

/// Independently initialized CQL members trained to convergence on the same
/// dataset (the random-ensemble ablation).
EnsembleQ train_aevl_ensemble(const OfflineDataset& data, const EmpiricalModel& model,
                              int ensemble_size, double alpha,
                              std::span<const std::uint64_t> seeds, const MdpMeta& meta,
                              double tol = 1e-8, int max_iters = 10000,
                              double temperature = 0.01);

/// Grid index whose slice minimizes the dataset-averaged squared Bellman
/// residual; ties break toward smaller delta.
int fixed_ccvl_select(const ConfidenceQ& ccvl, const OfflineDataset& data);

}  // namespace ccvl

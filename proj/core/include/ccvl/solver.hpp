#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "ccvl/dataset.hpp"

namespace ccvl {

/// Strictly increasing confidence levels in (0, 1).
struct ConfidenceGrid {
    std::vector<double> deltas;

    int size() const { return static_cast<int>(deltas.size()); }
    double min_delta() const { return deltas.front(); }
    double at(int k) const { return deltas[k]; }
    void validate() const;
    /// Index of a grid point equal to `delta` within tol; throws ShapeError if absent.
    int index_of(double delta, double tol = 1e-12) const;

    static ConfidenceGrid default_grid();  // {0.02,0.05,0.1,0.2,0.3,0.5,0.7,0.9}
};

enum class BoundKind { Lower, Upper };

/// Q-table conditioned on the confidence level: values[s][a][k] bounds
/// Q*(s,a) from below (Lower) or above (Upper) with probability 1 - deltas[k].
struct ConfidenceQ {
    int num_states = 0;
    int num_actions = 0;
    ConfidenceGrid grid;
    BoundKind bound_kind = BoundKind::Lower;
    double alpha = 1.0;
    double iota = 1.0;
    MdpMeta meta;
    std::vector<double> values;  // [S][A][K]

    int k() const { return grid.size(); }
    std::size_t cell(int s, int a, int ki) const {
        return (static_cast<std::size_t>(s) * num_actions + a) * grid.size() + ki;
    }
    double at(int s, int a, int ki) const { return values[cell(s, a, ki)]; }
    double& at(int s, int a, int ki) { return values[cell(s, a, ki)]; }

    /// Copy of the [S][A] table at one grid index.
    std::vector<double> slice(int ki) const;

    /// Largest bonus this table can ever subtract/add: alpha*sqrt(iota*log(1/min_delta)).
    double bonus_cap() const;
    double clamp_lo() const { return -meta.value_bound() - bonus_cap(); }
    double clamp_hi() const { return meta.value_bound() + bonus_cap(); }

    static ConfidenceQ lower_init(int num_states, int num_actions, ConfidenceGrid grid,
                                  double alpha, double iota, MdpMeta meta);
    static ConfidenceQ upper_init(int num_states, int num_actions, ConfidenceGrid grid,
                                  double alpha, double iota, MdpMeta meta);

    std::string to_json() const;
    static ConfidenceQ from_json(const std::string& text);
    void write_csv(std::ostream& out) const;  // s,a,delta,q
};

struct SolveReport {
    int iterations = 0;
    double final_residual = 0.0;
    /// Fraction of (s,a,delta) cells whose (delta1,delta2) optimum is attained
    /// at delta1 = delta2 = delta, measured on the last sweep.
    double argmax_degeneracy_rate = 0.0;
};

/// Anti-exploration bonus alpha*sqrt(iota*log(1/delta)/max(n,1)).
/// Throws ConfigError for delta outside (0,1).
double bonus(std::int64_t n, double delta, double alpha, double iota);

/// Inner policy of the regularized backup. Greedy and Softmax derive pi from
/// the previous iterate's slice; Equilibrium solves the inner maximization
/// over pi exactly. Greedy best-response has no fixed point once an action gap
/// falls below the penalty scale (the iteration 2-cycles), so training paths
/// default to Equilibrium, which coincides with Greedy wherever the greedy
/// fixed point exists.
enum class PolicyMode { Greedy, Softmax, Equilibrium };

struct RegOptions {
    PolicyMode mode = PolicyMode::Greedy;
    double temperature = 1.0;  // Softmax mode only
    /// false: penalty weighted by sqrt(iota*log(1/delta1)/max(n(s),1)) times
    /// (pi/pi_beta - 1); true: the state-action form
    /// sqrt(iota*log(1/delta1)/max(n(s,a),1)) times (pi - pi_beta)/sqrt(pi_beta).
    bool state_action_weighting = false;
};

struct SweepOutcome {
    ConfidenceQ table;
    double degeneracy_rate = 0.0;
};

/// Lower-bound backup with explicit bonuses:
/// Q'(s,a,d) = max_{d1,d2<=d} Bhat*Q(s,a,d2) - bonus(n(s,a),d1).
SweepOutcome ccvl_bonus_backup(const ConfidenceQ& prev, const OfflineDataset& data,
                               const EmpiricalModel& model);

/// Lower-bound backup with the behavior-regularized penalty. Greedy mode
/// resolves the inner max over pi exactly (mixed where pure argmax has no
/// fixed point); Softmax mode uses pi = softmax(prev slice / temperature).
SweepOutcome ccvl_reg_backup(const ConfidenceQ& prev, const OfflineDataset& data,
                             const EmpiricalModel& model, const RegOptions& opts = {});

/// Upper-bound mirror: Q'(s,a,d) = min_{d1,d2<=d} Bhat*Q(s,a,d2) + bonus(n(s,a),d1).
SweepOutcome ccvl_upper_backup(const ConfidenceQ& prev, const OfflineDataset& data,
                               const EmpiricalModel& model);

using BackupFn = std::function<SweepOutcome(const ConfidenceQ&)>;

/// Iterates a backup to ||Q_{k+1}-Q_k||_inf <= tol. Throws ConvergenceError
/// with the residual if max_iters is exhausted.
std::pair<ConfidenceQ, SolveReport> solve(const BackupFn& backup, ConfidenceQ init,
                                          double tol = 1e-8, int max_iters = 10000);

}  // namespace ccvl

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ccvl/adaptive.hpp"
#include "ccvl/baselines.hpp"
#include "ccvl/config.hpp"

namespace ccvl {

struct DeltaTraceRow {
    int episode = 0;
    int step = 0;
    int delta_index = 0;
    double delta = 0.0;
    int action = 0;
    double reward = 0.0;
};

/// Step-wise policy interface for rollouts: begin_episode() is called before
/// each episode, observe() after every environment step, so non-Markovian
/// policies can grow their history.
class ActionSource {
public:
    virtual ~ActionSource() = default;
    virtual void begin_episode(int episode) { (void)episode; }
    virtual int select(int state) = 0;
    virtual void observe(const Transition& t) { (void)t; }
    virtual void end_episode() {}
};

class StaticActionSource final : public ActionSource {
public:
    StaticActionSource(Policy policy, std::uint64_t seed);
    int select(int state) override;

private:
    Policy policy_;
    Rng rng_;
};

/// Confidence-adaptive policy: maintains the belief over delta, redraws delta
/// per episode (or per step), and logs the delta trace.
class AdaptiveActionSource final : public ActionSource {
public:
    AdaptiveActionSource(ConfidenceQ lower, std::unique_ptr<ConfidenceQ> upper,
                         AdaptivePolicyConfig cfg);

    void begin_episode(int episode) override;
    int select(int state) override;
    void observe(const Transition& t) override;
    void end_episode() override;

    const BeliefState& belief() const { return belief_; }
    const std::vector<DeltaTraceRow>& trace() const { return trace_; }
    /// Belief mode index recorded at the end of each completed episode.
    const std::vector<int>& episode_end_modes() const { return episode_end_modes_; }

private:
    ConfidenceQ lower_;
    std::unique_ptr<ConfidenceQ> upper_;
    AdaptivePolicyConfig cfg_;
    BeliefState belief_;
    Rng rng_;
    int delta_index_ = 0;
    int episode_ = -1;
    int step_ = 0;
    std::vector<DeltaTraceRow> trace_;
    std::vector<int> episode_end_modes_;
};

struct EvalReport {
    std::vector<double> per_episode_returns;
    double mean_return = 0.0;
    double normalized_return = 0.0;
    std::vector<DeltaTraceRow> delta_trace;
    std::vector<int> episode_end_modes;
    double wall_time_seconds = 0.0;
};

/// Undiscounted episodic evaluation from initial_dist; deterministic per seed.
/// normalized_return is filled by the caller (see optimal_mean_return).
EvalReport rollout(const TabularMdp& mdp, ActionSource& source, int episodes, int horizon,
                   std::uint64_t seed);

/// Monte-Carlo mean return of the exact optimal greedy policy; the
/// normalization denominator used by EvalReport.
double optimal_mean_return(const TabularMdp& mdp, int episodes = 10000, int horizon = 100,
                           std::uint64_t seed = 123456789);

struct CoverageRow {
    double delta = 0.0;
    double coverage = 0.0;  // over successful resamples
    int resamples = 0;      // successful
    int failures = 0;       // non-converged, excluded
};

/// Monte-Carlo verification of the high-probability bounds over dataset
/// resampling: trains the configured solver per resample and checks
/// Q(s,a,delta) <= Q*(s,a) for all pairs (ccvl-bonus) or
/// max_a Q(s,a,delta) <= V*(s) for all states (ccvl-reg); ccvl-upper checks
/// the mirrored >= direction on Q.
std::vector<CoverageRow> coverage_experiment(const ExperimentConfig& config, int jobs = 1);

struct SweepCell {
    std::string method;
    double alpha = 0.0;
    std::uint64_t seed = 0;
    double mean_return = 0.0;
    double normalized_return = 0.0;
};

/// Trains each configured method at each alpha and evaluates it in env_eval;
/// adaptive methods use BeliefSample adaptation, static methods their greedy policy.
std::vector<SweepCell> alpha_sweep(const ExperimentConfig& config, std::span<const double> alphas,
                                   int jobs = 1);

/// Shared trainer behind cmd_train and the sweeps: returns the converged
/// table(s) for the configured method.
struct TrainedTables {
    std::string method;
    std::vector<ConfidenceQ> confidence_tables;  // ccvl-* methods
    std::vector<QTable> q_tables;                // cql / anti-explore / plain / aevl members
    SolveReport report;
    int fixed_delta_index = -1;  // fixed_ccvl_select result for ccvl tables
};

TrainedTables train_method(const SolverSpec& solver, const OfflineDataset& data,
                           const EmpiricalModel& model, const MdpMeta& meta,
                           std::uint64_t seed = 0);

}  // namespace ccvl

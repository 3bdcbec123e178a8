#pragma once

#include <cstdint>
#include <optional>

#include "ccvl/rng.hpp"
#include "ccvl/solver.hpp"

namespace ccvl {

/// Categorical belief over the confidence grid, driven by accumulated squared
/// Bellman residuals: probs = softmax(-temperature * cum_sq_error).
struct BeliefState {
    ConfidenceGrid grid;
    double temperature = 1.0;
    std::vector<double> cum_sq_error;  // [K]
    std::vector<double> probs;         // [K]

    /// Argmax of probs, i.e. argmin of cum_sq_error; ties toward smaller delta.
    int mode_index() const;
};

BeliefState belief_init(const ConfidenceGrid& grid, double temperature);

/// Folds one observed transition into the belief. Residual per grid index:
/// Q(s,a,d) - r - gamma * max_a' Q(s',a',d) * (1 - done).
BeliefState belief_update(const BeliefState& belief, const Transition& t, const ConfidenceQ& ccvl);

enum class PolicyKind { BeliefSample, BeliefMode, FixedDelta, SafeSet };

struct AdaptivePolicyConfig {
    PolicyKind mode = PolicyKind::BeliefSample;
    int fixed_delta_index = 0;      // FixedDelta
    double beta = 0.9;              // SafeSet threshold in (0, 1]
    bool use_upper = false;         // SafeSet requires the upper table
    bool resample_each_step = false;
    bool carry_belief = true;       // keep the belief across evaluation episodes
    double temperature = 1.0;       // belief temperature
    std::uint64_t seed = 0;

    void validate() const;
};

/// Draws the delta index governing behavior: categorical from the belief
/// (BeliefSample / SafeSet), modal (BeliefMode) or pinned (FixedDelta).
int sample_delta_index(const BeliefState& belief, const AdaptivePolicyConfig& cfg, Rng& rng);

/// Greedy action for the configured mode at the given delta index, ties broken
/// uniformly at random. `pinned_delta` overrides the per-call draw so callers
/// can hold delta fixed within an episode.
int select_action(const ConfidenceQ& lower, const ConfidenceQ* upper, int state,
                  const BeliefState& belief, const AdaptivePolicyConfig& cfg, Rng& rng,
                  std::optional<int> pinned_delta = std::nullopt);

}  // namespace ccvl

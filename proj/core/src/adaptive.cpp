#include "ccvl/adaptive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ccvl {

namespace {

void renormalize(BeliefState& belief) {
    // probs = softmax(-temperature * cum_sq_error), shifted for stability
    double best = std::numeric_limits<double>::infinity();
    for (double e : belief.cum_sq_error) best = std::min(best, e);
    double total = 0.0;
    for (int k = 0; k < belief.grid.size(); ++k) {
        belief.probs[k] = std::exp(-belief.temperature * (belief.cum_sq_error[k] - best));
        total += belief.probs[k];
    }
    for (double& p : belief.probs) p /= total;
}

}  // namespace

int BeliefState::mode_index() const {
    int best = 0;
    for (int k = 1; k < grid.size(); ++k)
        if (probs[k] > probs[best]) best = k;
    return best;
}

BeliefState belief_init(const ConfidenceGrid& grid, double temperature) {
    grid.validate();
    if (temperature <= 0.0) throw ConfigError("belief_init: temperature must be positive");
    BeliefState b;
    b.grid = grid;
    b.temperature = temperature;
    b.cum_sq_error.assign(grid.size(), 0.0);
    b.probs.assign(grid.size(), 1.0 / grid.size());
    return b;
}

BeliefState belief_update(const BeliefState& belief, const Transition& t,
                          const ConfidenceQ& ccvl) {
    if (t.s < 0 || t.s >= ccvl.num_states || t.s_next < 0 || t.s_next >= ccvl.num_states ||
        t.a < 0 || t.a >= ccvl.num_actions)
        throw ShapeError("belief_update: transition ids out of range for the table");
    if (belief.grid.size() != ccvl.k())
        throw ShapeError("belief_update: belief grid does not match the table grid");

    BeliefState next = belief;
    for (int k = 0; k < belief.grid.size(); ++k) {
        double next_v = 0.0;
        if (!t.done) {
            next_v = ccvl.at(t.s_next, 0, k);
            for (int a = 1; a < ccvl.num_actions; ++a)
                next_v = std::max(next_v, ccvl.at(t.s_next, a, k));
        }
        const double resid = ccvl.at(t.s, t.a, k) - t.r - ccvl.meta.discount * next_v;
        next.cum_sq_error[k] += resid * resid;
    }
    renormalize(next);
    return next;
}

void AdaptivePolicyConfig::validate() const {
    if (mode == PolicyKind::SafeSet && (beta <= 0.0 || beta > 1.0))
        throw ConfigError("AdaptivePolicyConfig: SafeSet beta outside (0,1]");
    if (temperature <= 0.0) throw ConfigError("AdaptivePolicyConfig: temperature must be positive");
}

int sample_delta_index(const BeliefState& belief, const AdaptivePolicyConfig& cfg, Rng& rng) {
    switch (cfg.mode) {
        case PolicyKind::FixedDelta:
            if (cfg.fixed_delta_index < 0 || cfg.fixed_delta_index >= belief.grid.size())
                throw ShapeError("sample_delta_index: fixed_delta_index out of range");
            return cfg.fixed_delta_index;
        case PolicyKind::BeliefMode:
            return belief.mode_index();
        case PolicyKind::BeliefSample:
        case PolicyKind::SafeSet:
            return sample_categorical(belief.probs, rng);
    }
    return 0;
}

namespace {

int argmax_with_random_ties(std::span<const double> row, Rng& rng) {
    double best = -std::numeric_limits<double>::infinity();
    for (double v : row) best = std::max(best, v);
    int ties = 0;
    for (double v : row) ties += v >= best - 1e-12;
    int pick = ties == 1 ? 0 : static_cast<int>(uniform01(rng) * ties);
    pick = std::min(pick, ties - 1);
    for (int a = 0; a < static_cast<int>(row.size()); ++a)
        if (row[a] >= best - 1e-12 && pick-- == 0) return a;
    return static_cast<int>(row.size()) - 1;
}

}  // namespace

int select_action(const ConfidenceQ& lower, const ConfidenceQ* upper, int state,
                  const BeliefState& belief, const AdaptivePolicyConfig& cfg, Rng& rng,
                  std::optional<int> pinned_delta) {
    cfg.validate();
    const int k = pinned_delta ? *pinned_delta : sample_delta_index(belief, cfg, rng);
    const int A = lower.num_actions;
    std::vector<double> lo_row(A);
    for (int a = 0; a < A; ++a) lo_row[a] = lower.at(state, a, k);

    if (cfg.mode != PolicyKind::SafeSet) return argmax_with_random_ties(lo_row, rng);

    if (upper == nullptr) throw ConfigError("select_action: SafeSet mode requires an upper table");
    if (upper->num_states != lower.num_states || upper->num_actions != lower.num_actions ||
        upper->k() != lower.k())
        throw ShapeError("select_action: lower/upper table shape mismatch");

    double row_max = -std::numeric_limits<double>::infinity();
    for (double v : lo_row) row_max = std::max(row_max, v);
    // The multiplicative threshold is ill-posed for nonpositive maxima; fall
    // back to an additive margin spanning (1-beta) of the table's value range.
    double threshold;
    if (row_max > 0.0) {
        threshold = cfg.beta * row_max;
    } else {
        threshold = row_max - (1.0 - cfg.beta) * (lower.clamp_hi() - lower.clamp_lo());
    }

    std::vector<double> up_row(A, -std::numeric_limits<double>::infinity());
    int safe_count = 0;
    for (int a = 0; a < A; ++a) {
        if (lo_row[a] >= threshold) {
            up_row[a] = upper->at(state, a, k);
            ++safe_count;
        }
    }
    // The lower-slice argmax always qualifies.
    if (safe_count == 0) throw std::logic_error("select_action: empty safe set");
    return argmax_with_random_ties(up_row, rng);
}

}  // namespace ccvl

#pragma once

#include <array>

#include "offdrive/config.hpp"
#include "offdrive/types.hpp"

namespace offdrive {

// s* = s0 + max(0, v * (t* + dv / (2 sqrt(|A_min * A_max|)))), dv the follower's closing speed.
double safe_distance(double v_follower_next, double delta_v_next, const RewardWeights& weights);

struct RewardBreakdown {
    std::array<double, 5> components{};  // R1..R5
    double total = 0.0;                  // sum(eta_i * R_i) + C
};

double speed_reward(double v_next, const RewardWeights& w);
// min[0, 1 - (safe / gap)^2], with gaps below min_gap (overlaps included) read as min_gap.
double headway_penalty(double safe, double gap, double min_gap);

// Reward of `action` taking the agent from `pre` to `post`. An accident is read from
// the agent's crash flag in `post`.
RewardBreakdown reward(const WorldState& pre, const Action& action, const WorldState& post, int agent_id,
                       const RewardWeights& weights, const PerceptionParams& perception);

// Largest possible per-step reward; subtracting it keeps every reward <= 0.
double reward_upper_bound(const RewardWeights& weights, const PerceptionParams& perception);

}  // namespace offdrive

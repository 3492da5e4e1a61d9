#include "offdrive/reward.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "offdrive/observation.hpp"
#include "offdrive/traffic_sim.hpp"

namespace offdrive {

double safe_distance(double v_follower_next, double delta_v_next, const RewardWeights& w) {
    return safe_gap(w.s0, w.t_star, w.a_min, w.a_max, v_follower_next, delta_v_next);
}

double speed_reward(double v, const RewardWeights& w) {
    if (v <= w.v_star) return v / w.v_star;
    return (w.v_limit - v) / (w.v_limit - w.v_star);
}

double headway_penalty(double safe, double gap, double min_gap) {
    const double ratio = safe / std::max(gap, min_gap);
    return std::min(0.0, 1.0 - ratio * ratio);
}

RewardBreakdown reward(const WorldState& pre, const Action& action, const WorldState& post, int agent_id,
                       const RewardWeights& w, const PerceptionParams& perception) {
    const VehicleState& before = pre.vehicles[pre.index_of(agent_id)];
    const VehicleState& after = post.vehicles[post.index_of(agent_id)];
    const double lc = std::abs(action.lane_change);
    RewardBreakdown out;
    auto& r = out.components;

    r[0] = speed_reward(after.velocity, w);
    r[1] = lc * (leading_gap(post, agent_id, perception) - leading_gap(pre, agent_id, perception));

    const ObservableSet set = observable_vehicles(post, agent_id, perception);
    const auto same = static_cast<std::size_t>(perception.lateral_range);
    {
        double gap = perception.longitudinal_range;
        double closing = 0.0;
        if (const auto& l = set.leaders[same]) {
            const VehicleState& v = *post.find(*l);
            gap = post.road.delta(after.position, v.position) - v.length;
            closing = after.velocity - v.velocity;
        }
        r[2] = headway_penalty(safe_distance(after.velocity, closing, w), gap, w.s0);
    }
    {
        double gap = perception.longitudinal_range;
        double v_follow = 0.0;
        double closing = 0.0;
        if (const auto& f = set.followers[same]) {
            const VehicleState& v = *post.find(*f);
            gap = post.road.delta(v.position, after.position) - after.length;
            v_follow = v.velocity;
            closing = v.velocity - after.velocity;
        }
        r[3] = lc * headway_penalty(safe_distance(v_follow, closing, w), gap, w.s0);
    }
    r[4] = (after.crashed && !before.crashed) ? -1.0 : 0.0;

    out.total = w.c;
    for (std::size_t i = 0; i < 5; ++i) out.total += w.eta[i] * r[i];
    return out;
}

double reward_upper_bound(const RewardWeights& w, const PerceptionParams& perception) {
    // R1 <= 1, R2 <= range (a leading gap never exceeds the range), R3..R5 <= 0.
    return w.eta[0] + w.eta[1] * perception.longitudinal_range + w.c;
}

}  // namespace offdrive

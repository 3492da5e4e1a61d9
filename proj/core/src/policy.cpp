#include "offdrive/policy.hpp"

#include <algorithm>

#include "offdrive/error.hpp"
#include "offdrive/traffic_sim.hpp"

namespace offdrive {

ActorPolicy::ActorPolicy(nn::Mlp actor, Normalization norm, rl::ActionScale scale, std::string label, double noise,
                         std::uint64_t seed)
    : actor_(std::move(actor)),
      norm_(std::move(norm)),
      scale_(scale),
      label_(std::move(label)),
      noise_(noise),
      rng_(seed, "policy-noise") {
    if (static_cast<int>(norm_.mean.size()) != actor_.input_dim())
        throw ContractError("policy normalization does not match the actor input");
}

ActorPolicy::ActorPolicy(const Checkpoint& c, double noise, std::uint64_t seed)
    : ActorPolicy(c.actor, c.normalization, c.action_scale, c.label, noise, seed) {}

std::array<double, 2> ActorPolicy::act(const PolicyContext& context) {
    if (static_cast<int>(context.obs.size()) != actor_.input_dim())
        throw DataError("policy expects " + std::to_string(actor_.input_dim()) + "-dim observations, got " +
                        std::to_string(context.obs.size()));
    const Eigen::MatrixXd u = actor_.forward(rl::normalize(context.obs, norm_));
    double u0 = u(0, 0), u1 = u(1, 0);
    if (noise_ > 0.0) {
        u0 = std::clamp(u0 + rng_.normal(0.0, noise_), -1.0, 1.0);
        u1 = std::clamp(u1 + rng_.normal(0.0, noise_), -1.0, 1.0);
    }
    return scale_.to_physical(u0, u1);
}

std::array<double, 2> IdmPolicy::act(const PolicyContext& context) {
    const Action a = background_action(context.world, context.agent_id, params_);
    return {a.accel, static_cast<double>(a.lane_change)};
}

}  // namespace offdrive

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <vector>

#include "offdrive/config.hpp"
#include "offdrive/observation.hpp"
#include "offdrive/reward.hpp"
#include "offdrive/traffic_sim.hpp"
#include "offdrive/types.hpp"

namespace offdrive {

// Continuous (accel, lane signal) to hybrid action: accel clipped to [A_min, A_max],
// lane signal clipped to [-1, 1] and rounded half away from zero.
Action continuous_to_hybrid(double accel, double lane_signal, const RewardWeights& weights);

struct AgentStep {
    Observation observation;  // next observation (geometry only once the agent is done)
    RewardBreakdown reward;
    bool done = false;
    bool terminal = false;   // done because of an accident
    bool truncated = false;  // done because the horizon was reached
    std::optional<AccidentCause> accident;
};

struct EnvStep {
    std::map<int, AgentStep> agents;
    bool episode_over = false;
};

class DrivingEnv {
public:
    explicit DrivingEnv(ExperimentConfig config);

    // Both return the initial observation of every agent.
    std::map<int, Observation> reset();
    std::map<int, Observation> reset(std::uint64_t seed);

    // `actions` must cover exactly the agents that are not done.
    EnvStep step(const std::map<int, Action>& actions);

    const WorldState& world() const { return world_; }
    const ExperimentConfig& config() const { return config_; }
    const std::vector<int>& agent_ids() const { return agents_; }
    bool agent_done(int id) const { return done_.at(id); }
    bool episode_over() const { return over_; }
    std::int64_t steps() const { return steps_; }
    int observation_dim() const { return config_.perception.observation_dim(); }

    Observation observation(int agent_id) const;

private:
    ExperimentConfig config_;
    WorldState world_;
    std::vector<int> agents_;
    std::map<int, bool> done_;
    std::int64_t steps_ = 0;
    bool over_ = true;
};

// Trace rows: the simulator columns plus per-agent reward components (blank for background).
void write_env_trace_header(std::ostream& out);
void append_env_trace(std::ostream& out, const WorldState& world, const EnvStep* step);

}  // namespace offdrive

#include "offdrive/env.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>
#include <utility>

#include "offdrive/error.hpp"

namespace offdrive {

Action continuous_to_hybrid(double accel, double lane_signal, const RewardWeights& w) {
    Action a;
    a.accel = std::clamp(accel, w.a_min, w.a_max);
    if (std::isnan(lane_signal)) lane_signal = 0.0;
    a.lane_change = static_cast<int>(std::round(std::clamp(lane_signal, -1.0, 1.0)));
    return a;
}

DrivingEnv::DrivingEnv(ExperimentConfig config) : config_(std::move(config)) { config_.validate(); }

std::map<int, Observation> DrivingEnv::reset() { return reset(config_.scenario.seed); }

std::map<int, Observation> DrivingEnv::reset(std::uint64_t seed) {
    ScenarioConfig sc = config_.scenario;
    sc.seed = seed;
    world_ = build_scenario(sc, config_.reward.v_star, config_.dynamics);
    agents_.clear();
    done_.clear();
    for (const auto& v : world_.vehicles)
        if (v.autonomous()) {
            agents_.push_back(v.id);
            done_[v.id] = false;
        }
    steps_ = 0;
    over_ = agents_.empty();
    std::map<int, Observation> obs;
    for (int id : agents_) obs.emplace(id, observation(id));
    return obs;
}

Observation DrivingEnv::observation(int agent_id) const {
    return observe(world_, agent_id, config_.perception, config_.reward.s0);
}

EnvStep DrivingEnv::step(const std::map<int, Action>& actions) {
    if (over_) throw ContractError("env_step: episode is over; call reset()");
    for (const auto& [id, a] : actions) {
        auto it = done_.find(id);
        if (it == done_.end()) throw ContractError("env_step: unknown agent id " + std::to_string(id));
        if (it->second) throw ContractError("env_step: agent " + std::to_string(id) + " is already done");
    }
    std::map<int, Action> applied;
    for (int id : agents_) {
        if (done_[id]) continue;
        auto it = actions.find(id);
        if (it == actions.end()) throw ContractError("env_step: missing action for agent " + std::to_string(id));
        applied[id] = continuous_to_hybrid(it->second.accel, it->second.lane_change, config_.reward);
    }

    StepResult sim = offdrive::step(world_, applied, config_.dynamics, config_.scenario.dt);
    ++steps_;
    const bool horizon = steps_ >= config_.scenario.horizon;

    EnvStep out;
    for (const auto& [id, action] : applied) {
        AgentStep s;
        s.reward = reward(world_, action, sim.world, id, config_.reward, config_.perception);
        if (auto acc = sim.accidents.find(id); acc != sim.accidents.end()) s.accident = acc->second;
        s.terminal = s.accident.has_value();
        s.truncated = !s.terminal && horizon;
        s.done = s.terminal || s.truncated;
        out.agents.emplace(id, std::move(s));
    }
    world_ = std::move(sim.world);
    for (auto& [id, s] : out.agents) {
        s.observation = observation(id);
        if (s.done) done_[id] = true;
    }
    over_ = horizon || std::all_of(done_.begin(), done_.end(), [](const auto& kv) { return kv.second; });
    if (horizon)
        for (auto& kv : done_) kv.second = true;
    out.episode_over = over_;
    return out;
}

void write_env_trace_header(std::ostream& out) {
    out << "time_step,vehicle_id,velocity,position,lane,accident_flag,r1,r2,r3,r4,r5,reward\n";
}

void append_env_trace(std::ostream& out, const WorldState& world, const EnvStep* step) {
    out << std::setprecision(10);
    for (const auto& v : world.vehicles) {
        out << world.time_step << ',' << v.id << ',' << v.velocity << ',' << v.position << ',' << v.lane << ','
            << (v.crashed ? 1 : 0);
        const AgentStep* s = nullptr;
        if (step)
            if (auto it = step->agents.find(v.id); it != step->agents.end()) s = &it->second;
        if (s) {
            for (double c : s->reward.components) out << ',' << c;
            out << ',' << s->reward.total << '\n';
        } else {
            out << ",,,,,,\n";
        }
    }
}

}  // namespace offdrive

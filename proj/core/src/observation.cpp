#include "offdrive/observation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>

#include "offdrive/error.hpp"

namespace offdrive {

std::vector<float> Observation::to_vector() const {
    std::vector<float> out;
    out.reserve(dim());
    out.push_back(static_cast<float>(own_speed));
    for (const auto* part : {&rel_speeds, &rel_gaps, &lane_density, &lane_exists})
        for (double x : *part) out.push_back(static_cast<float>(x));
    return out;
}

std::size_t ObservableSet::count() const {
    std::size_t n = 0;
    for (const auto& l : leaders) n += l.has_value();
    for (const auto& f : followers) n += f.has_value();
    return n;
}

std::vector<int> perceivable_vehicles(const WorldState& world, int agent_id, const PerceptionParams& params) {
    const VehicleState& agent = world.vehicles[world.index_of(agent_id)];
    std::vector<int> out;
    for (const auto& v : world.vehicles) {
        if (v.id == agent_id) continue;
        if (std::abs(v.lane - agent.lane) > params.lateral_range) continue;
        if (std::abs(world.road.delta(agent.position, v.position)) > params.longitudinal_range) continue;
        out.push_back(v.id);
    }
    return out;
}

ObservableSet observable_vehicles(const WorldState& world, int agent_id, const PerceptionParams& params) {
    const VehicleState& agent = world.vehicles[world.index_of(agent_id)];
    const auto slots = static_cast<std::size_t>(params.lane_slots());
    ObservableSet set{std::vector<std::optional<int>>(slots), std::vector<std::optional<int>>(slots)};
    std::vector<double> lead_d(slots, 0.0), follow_d(slots, 0.0);
    for (int id : perceivable_vehicles(world, agent_id, params)) {
        const VehicleState& v = *world.find(id);
        if (v.lane < 1 || v.lane > world.road.lane_count()) continue;
        const auto slot = static_cast<std::size_t>(lane_slot(v.lane - agent.lane, params));
        const double d = world.road.delta(agent.position, v.position);
        if (d >= 0.0) {
            if (!set.leaders[slot] || d < lead_d[slot]) {
                set.leaders[slot] = id;
                lead_d[slot] = d;
            }
        } else if (!set.followers[slot] || d > follow_d[slot]) {
            set.followers[slot] = id;
            follow_d[slot] = d;
        }
    }
    return set;
}

namespace {

double gap_to_leader(const WorldState& w, const VehicleState& agent, const VehicleState& leader) {
    return w.road.delta(agent.position, leader.position) - leader.length;
}

double gap_to_follower(const WorldState& w, const VehicleState& agent, const VehicleState& follower) {
    return w.road.delta(follower.position, agent.position) - agent.length;
}

}  // namespace

double leading_gap(const WorldState& world, int agent_id, const PerceptionParams& params) {
    const auto set = observable_vehicles(world, agent_id, params);
    const auto& slot = set.leaders[static_cast<std::size_t>(params.lateral_range)];
    if (!slot) return params.longitudinal_range;
    return gap_to_leader(world, *world.find(agent_id), *world.find(*slot));
}

double following_gap(const WorldState& world, int agent_id, const PerceptionParams& params) {
    const auto set = observable_vehicles(world, agent_id, params);
    const auto& slot = set.followers[static_cast<std::size_t>(params.lateral_range)];
    if (!slot) return params.longitudinal_range;
    return gap_to_follower(world, *world.find(agent_id), *world.find(*slot));
}

Observation observe(const WorldState& world, int agent_id, const PerceptionParams& params, double min_gap) {
    const VehicleState& agent = world.vehicles[world.index_of(agent_id)];
    const int slots = params.lane_slots();
    Observation o;
    o.own_speed = agent.velocity;
    o.rel_speeds.assign(static_cast<std::size_t>(2 * slots), 0.0);
    o.rel_gaps.assign(static_cast<std::size_t>(2 * slots), params.longitudinal_range);
    o.lane_density.assign(static_cast<std::size_t>(slots), 0.0);
    o.lane_exists.assign(static_cast<std::size_t>(slots), 0.0);

    const ObservableSet set = observable_vehicles(world, agent_id, params);
    for (int s = 0; s < slots; ++s) {
        const auto us = static_cast<std::size_t>(s);
        if (const auto& l = set.leaders[us]) {
            const VehicleState& v = *world.find(*l);
            o.rel_speeds[us] = v.velocity - agent.velocity;
            o.rel_gaps[us] = gap_to_leader(world, agent, v);
        }
        if (const auto& f = set.followers[us]) {
            const VehicleState& v = *world.find(*f);
            o.rel_speeds[us + static_cast<std::size_t>(slots)] = v.velocity - agent.velocity;
            o.rel_gaps[us + static_cast<std::size_t>(slots)] = gap_to_follower(world, agent, v);
        }
    }

    const double unit = world.mean_vehicle_length() + min_gap;
    const double capacity = std::max(1.0, std::floor(2.0 * params.longitudinal_range / std::max(unit, 1e-9)));
    std::vector<int> counts(static_cast<std::size_t>(slots), 0);
    for (int id : perceivable_vehicles(world, agent_id, params)) {
        const int lane = world.find(id)->lane;
        ++counts[static_cast<std::size_t>(lane_slot(lane - agent.lane, params))];
    }
    const double far_edge = agent.position + params.longitudinal_range;
    for (int offset = -params.lateral_range; offset <= params.lateral_range; ++offset) {
        const auto s = static_cast<std::size_t>(lane_slot(offset, params));
        const int lane = agent.lane + offset;
        o.lane_density[s] = std::clamp(counts[s] / capacity, 0.0, 1.0);
        const bool here = world.road.lane_exists(lane, agent.position);
        const bool ahead = world.road.lane_exists(lane, world.road.wrap(far_edge));
        o.lane_exists[s] = (here && ahead) ? 1.0 : 0.0;
    }
    return o;
}

Observation build_observation(const WorldState& world, int agent_id, const PerceptionParams& params, double min_gap) {
    const VehicleState& agent = world.vehicles[world.index_of(agent_id)];
    if (agent.crashed)
        throw ContractError("build_observation: agent " + std::to_string(agent_id) + " is in an accident state");
    return observe(world, agent_id, params, min_gap);
}

}  // namespace offdrive

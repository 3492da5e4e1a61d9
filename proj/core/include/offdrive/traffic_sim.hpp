#pragma once

#include <iosfwd>
#include <limits>
#include <map>
#include <optional>

#include "offdrive/config.hpp"
#include "offdrive/types.hpp"

namespace offdrive {

// Minimum desired gap s0 + max(0, v * (t + dv / (2 sqrt(|brake * accel|)))), where
// dv = v - v_leader is the closing speed of the follower.
double safe_gap(double s0, double t_star, double brake, double accel, double v_follower, double closing_speed);

double idm_acceleration(const VehicleState& ego, std::optional<double> leader_gap, std::optional<double> leader_speed,
                        const DynamicsParams& params);

struct Neighbor {
    double gap = 0.0;            // bumper-to-bumper, m
    double speed = 0.0;          // m/s
    double desired_speed = 0.0;  // m/s, used for the follower's courtesy term
};

struct LaneNeighbors {
    bool exists = false;
    std::optional<Neighbor> leader;
    std::optional<Neighbor> follower;
    double end_distance = std::numeric_limits<double>::infinity();  // m until this lane drops
};

// Lanes ego-1 (right), ego, ego+1 (left).
struct NeighborSummary {
    LaneNeighbors right;
    LaneNeighbors same;
    LaneNeighbors left;
};

// Safety-gated incentive rule; returns -1, 0 or +1.
int lane_change_decision(const VehicleState& ego, const NeighborSummary& neighbors, const DynamicsParams& params);

enum class AccidentCause { Collision, NonexistentLane };

struct StepResult {
    WorldState world;
    std::map<int, AccidentCause> accidents;  // vehicles newly involved in an accident this step
};

StepResult step(const WorldState& world, const std::map<int, Action>& agent_actions, const DynamicsParams& params,
                double dt);

// Neighbour summary exactly as the background controller sees it, lane-end obstacles included.
NeighborSummary summarize_neighbors(const WorldState& world, int vehicle_id, const DynamicsParams& params);

// Action the background controller would take for `vehicle_id` in `world`.
Action background_action(const WorldState& world, int vehicle_id, const DynamicsParams& params);

// Background vehicles get ids 0..vehicle_count-1, agents follow.
WorldState build_scenario(const ScenarioConfig& config, double agent_desired_speed, const DynamicsParams& params);

void write_trace_header(std::ostream& out);
void append_trace(std::ostream& out, const WorldState& world);

}  // namespace offdrive

#pragma once

#include <optional>
#include <vector>

#include "offdrive/config.hpp"
#include "offdrive/types.hpp"

namespace offdrive {

// Agent view: [own_speed, rel_speeds, rel_gaps, lane_density, lane_exists].
// Neighbour slots run leading far-left..far-right, then following far-left..far-right;
// lane slots run far-left..far-right. Missing neighbours read gap = range, rel_speed = 0.
struct Observation {
    double own_speed = 0.0;
    std::vector<double> rel_speeds;
    std::vector<double> rel_gaps;
    std::vector<double> lane_density;
    std::vector<double> lane_exists;

    std::size_t dim() const { return 1 + rel_speeds.size() + rel_gaps.size() + lane_density.size() + lane_exists.size(); }
    std::vector<float> to_vector() const;
};

// Slot of the lane at `offset` lanes to the left (negative = right): 0 is far-left.
inline int lane_slot(int offset, const PerceptionParams& p) { return p.lateral_range - offset; }

struct ObservableSet {
    std::vector<std::optional<int>> leaders;    // indexed by lane slot
    std::vector<std::optional<int>> followers;  // indexed by lane slot

    std::size_t count() const;
};

std::vector<int> perceivable_vehicles(const WorldState& world, int agent_id, const PerceptionParams& params);
ObservableSet observable_vehicles(const WorldState& world, int agent_id, const PerceptionParams& params);

// Same-lane bumper gaps to the observable leader / follower, range when absent.
double leading_gap(const WorldState& world, int agent_id, const PerceptionParams& params);
double following_gap(const WorldState& world, int agent_id, const PerceptionParams& params);

// Throws ContractError for a crashed agent.
Observation build_observation(const WorldState& world, int agent_id, const PerceptionParams& params, double min_gap);
// Geometry only, no accident check (used for terminal next-observations).
Observation observe(const WorldState& world, int agent_id, const PerceptionParams& params, double min_gap);

}  // namespace offdrive

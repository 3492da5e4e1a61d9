#include "offdrive/types.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "offdrive/error.hpp"

namespace offdrive {

RoadGeometry::RoadGeometry(double length, int lane_count, std::optional<Bottleneck> bottleneck, bool ring)
    : length_(length), lane_count_(lane_count), bottleneck_(bottleneck), ring_(ring) {
    if (!(length > 0.0)) throw ConfigError("road length must be positive");
    if (lane_count < 1) throw ConfigError("lane count must be at least 1");
    if (bottleneck) {
        if (bottleneck->lanes < 1 || bottleneck->lanes >= lane_count)
            throw ConfigError("bottleneck lane count must be in [1, lane_count)");
        if (bottleneck->start < 0.0 || bottleneck->end > length || bottleneck->start >= bottleneck->end)
            throw ConfigError("bottleneck interval must lie within [0, road_length)");
    }
}

int RoadGeometry::lanes_at(double position) const {
    if (!bottleneck_) return lane_count_;
    const double p = wrap(position);
    if (p >= bottleneck_->start && p < bottleneck_->end) return bottleneck_->lanes;
    return lane_count_;
}

std::optional<double> RoadGeometry::lane_end_ahead(double position, int lane, double horizon) const {
    if (!bottleneck_ || lane <= bottleneck_->lanes) return std::nullopt;
    if (lanes_at(position) < lane) return 0.0;
    const double d = ring_ ? ahead(position, bottleneck_->start) : bottleneck_->start - position;
    if (d < 0.0 || d > horizon) return std::nullopt;
    return d;
}

const VehicleState* WorldState::find(int id) const {
    auto it = std::lower_bound(vehicles.begin(), vehicles.end(), id,
                               [](const VehicleState& v, int key) { return v.id < key; });
    return (it != vehicles.end() && it->id == id) ? &*it : nullptr;
}

VehicleState* WorldState::find(int id) {
    return const_cast<VehicleState*>(std::as_const(*this).find(id));
}

std::size_t WorldState::index_of(int id) const {
    const VehicleState* v = find(id);
    if (!v) throw ContractError("unknown vehicle id " + std::to_string(id));
    return static_cast<std::size_t>(v - vehicles.data());
}

double WorldState::mean_vehicle_length() const {
    if (vehicles.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& v : vehicles) sum += v.length;
    return sum / static_cast<double>(vehicles.size());
}

void WorldState::sort_by_id() {
    std::sort(vehicles.begin(), vehicles.end(),
              [](const VehicleState& a, const VehicleState& b) { return a.id < b.id; });
}

std::vector<double> flatten_state(const WorldState& world) {
    std::vector<double> out;
    out.reserve(world.vehicles.size() * 3);
    for (const auto& v : world.vehicles) {
        out.push_back(v.velocity);
        out.push_back(v.position);
        out.push_back(static_cast<double>(v.lane));
    }
    return out;
}

}  // namespace offdrive

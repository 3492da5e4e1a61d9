#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

namespace offdrive {

enum class VehicleKind : std::uint8_t {
    Autonomous = 0,
    Class1 = 1,
    Class2 = 2,
    Class3 = 3,
    Class4 = 4,
    Class5 = 5,
};

inline VehicleKind background_class(int index) { return static_cast<VehicleKind>(index + 1); }

struct VehicleState {
    int id = 0;
    double velocity = 0.0;  // m/s, never negative
    double position = 0.0;  // m, front bumper along the road axis
    int lane = 1;           // 1 = rightmost; higher index is further left
    double length = 4.45;   // m
    VehicleKind kind = VehicleKind::Class1;
    double desired_speed = 0.0;  // m/s, per-vehicle IDM target
    bool crashed = false;
    int lc_cooldown = 0;  // steps left before another lane change is allowed

    bool autonomous() const { return kind == VehicleKind::Autonomous; }
    double rear() const { return position - length; }
};

// Hybrid command: continuous acceleration plus a lane change in {-1, 0, +1}
// (+1 moves one lane to the left, -1 one lane to the right).
struct Action {
    double accel = 0.0;  // m/s^2
    int lane_change = 0;
};

struct Bottleneck {
    double start = 0.0;  // m
    double end = 0.0;    // m, exclusive
    int lanes = 1;       // lanes available in [start, end)
};

// 1-D road with discrete lanes. Ring roads wrap positions modulo length.
class RoadGeometry {
public:
    RoadGeometry() = default;
    RoadGeometry(double length, int lane_count, std::optional<Bottleneck> bottleneck, bool ring);

    double length() const { return length_; }
    int lane_count() const { return lane_count_; }
    bool ring() const { return ring_; }
    const std::optional<Bottleneck>& bottleneck() const { return bottleneck_; }

    double wrap(double position) const {
        if (!ring_) return position;
        double p = reduce(position);
        if (p < 0.0) p += length_;
        if (p >= length_) p -= length_;
        return p;
    }
    // Signed displacement from `from` to `to`; on a ring it lies in (-L/2, L/2].
    double delta(double from, double to) const {
        double d = to - from;
        if (!ring_) return d;
        d = reduce(d);
        if (d > 0.5 * length_) d -= length_;
        if (d <= -0.5 * length_) d += length_;
        return d;
    }
    // Forward distance from `from` to `to`, in [0, L) on a ring.
    double ahead(double from, double to) const {
        double d = to - from;
        if (!ring_) return d;
        d = reduce(d);
        if (d < 0.0) d += length_;
        return d;
    }
    int lanes_at(double position) const;
    bool lane_exists(int lane, double position) const { return lane >= 1 && lane <= lanes_at(position); }
    // Distance ahead of `position` at which `lane` stops existing, if within `horizon`.
    std::optional<double> lane_end_ahead(double position, int lane, double horizon) const;

private:
    // fmod(x, L), skipping the call in the common |x| < L case where it is the identity.
    double reduce(double x) const { return (x > -length_ && x < length_) ? x : std::fmod(x, length_); }

    double length_ = 1.0;
    int lane_count_ = 1;
    std::optional<Bottleneck> bottleneck_;
    bool ring_ = true;
};

struct WorldState {
    std::vector<VehicleState> vehicles;  // ascending id order
    std::int64_t time_step = 0;
    RoadGeometry road;

    const VehicleState* find(int id) const;
    VehicleState* find(int id);
    std::size_t index_of(int id) const;  // throws ContractError when absent
    double mean_vehicle_length() const;
    void sort_by_id();
};

// [v1, p1, k1, ..., vN, pN, kN] in id order.
std::vector<double> flatten_state(const WorldState& world);

}  // namespace offdrive

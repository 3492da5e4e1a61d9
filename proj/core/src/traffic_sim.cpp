#include "offdrive/traffic_sim.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "offdrive/error.hpp"
#include "offdrive/rng.hpp"

namespace offdrive {

namespace {

constexpr double kLaneEndLookahead = 250.0;  // m
constexpr double kMandatoryMergeDistance = 150.0;  // m
constexpr double kMandatoryMergeBonus = 5.0;  // m/s^2

DynamicsParams params_for(const VehicleState& v, const DynamicsParams& base) {
    DynamicsParams p = base;
    if (v.desired_speed > 0.0) p.v0 = v.desired_speed;
    return p;
}

double lane_change_gap(const DynamicsParams& p, double v_follower, double v_leader) {
    return safe_gap(p.s0, p.t_star, p.idm_b, p.idm_a, v_follower, v_follower - v_leader);
}

// Vehicle indices per lane, sorted by (position, index). Positions do not change while
// the index is alive; lane changes keep the order.
class LaneIndex {
public:
    explicit LaneIndex(const WorldState& world) : world_(world) {
        int max_lane = world.road.lane_count();
        for (const auto& v : world.vehicles) max_lane = std::max(max_lane, v.lane);
        lanes_.resize(static_cast<std::size_t>(max_lane) + 2);
        for (std::size_t i = 0; i < world.vehicles.size(); ++i) {
            const int lane = world.vehicles[i].lane;
            if (lane >= 0) lanes_[static_cast<std::size_t>(lane)].push_back(i);
        }
        for (auto& l : lanes_) std::sort(l.begin(), l.end(), [this](std::size_t a, std::size_t b) { return less(a, b); });
    }

    const std::vector<std::size_t>& lane(int l) const {
        static const std::vector<std::size_t> empty;
        if (l < 0 || static_cast<std::size_t>(l) >= lanes_.size()) return empty;
        return lanes_[static_cast<std::size_t>(l)];
    }

    void move(std::size_t idx, int from, int to) {
        auto& src = lanes_.at(static_cast<std::size_t>(from));
        src.erase(std::find(src.begin(), src.end(), idx));
        if (static_cast<std::size_t>(to) >= lanes_.size()) lanes_.resize(static_cast<std::size_t>(to) + 2);
        auto& dst = lanes_[static_cast<std::size_t>(to)];
        dst.insert(std::lower_bound(dst.begin(), dst.end(), idx, [this](std::size_t a, std::size_t b) { return less(a, b); }),
                   idx);
    }

    // Nearest vehicle whose front is at or ahead of `position` in `lane`; ties go to the lower index.
    std::optional<std::size_t> leader(int lane, double position, std::size_t self) const {
        const auto& v = this->lane(lane);
        const std::size_t n = v.size();
        const std::size_t start = first_at_or_after(v, position);
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t slot = start + k;
            if (slot >= n && !world_.road.ring()) break;
            const std::size_t j = v[slot % n];
            if (j != self) return j;  // sorted order already puts the lowest index first among ties
        }
        return std::nullopt;
    }

    // Nearest vehicle strictly behind `position` in `lane`; ties go to the lower index.
    std::optional<std::size_t> follower(int lane, double position, std::size_t self) const {
        const auto& v = this->lane(lane);
        const std::size_t n = v.size();
        const std::size_t start = first_at_or_after(v, position);
        const bool ring = world_.road.ring();
        auto back = [&](std::size_t k) { return v[(start + 2 * n - k) % n]; };  // k-th entry before start
        for (std::size_t k = 1; k <= n && (ring || k <= start); ++k) {
            const std::size_t j = back(k);
            const double p = world_.vehicles[j].position;
            if (j == self || p == position) continue;  // zero distance is not behind
            // Equal positions sort by index, so the lowest one sits furthest back.
            std::size_t pick = j;
            for (std::size_t m = k + 1; m <= n && (ring || m <= start); ++m) {
                const std::size_t q = back(m);
                if (world_.vehicles[q].position != p) break;
                if (q != self) pick = q;
            }
            return pick;
        }
        return std::nullopt;
    }

private:
    bool less(std::size_t a, std::size_t b) const {
        const double pa = world_.vehicles[a].position, pb = world_.vehicles[b].position;
        return pa < pb || (pa == pb && a < b);
    }
    std::size_t first_at_or_after(const std::vector<std::size_t>& v, double position) const {
        return static_cast<std::size_t>(
            std::lower_bound(v.begin(), v.end(), position,
                             [this](std::size_t j, double p) { return world_.vehicles[j].position < p; }) -
            v.begin());
    }

    const WorldState& world_;
    std::vector<std::vector<std::size_t>> lanes_;
};

LaneNeighbors lane_neighbors(const WorldState& world, const LaneIndex& index, std::size_t self, int lane) {
    const VehicleState& ego = world.vehicles[self];
    LaneNeighbors out;
    out.exists = lane >= 1 && lane <= world.road.lane_count() && world.road.lane_exists(lane, ego.position);
    if (!out.exists) return out;
    if (auto j = index.leader(lane, ego.position, self)) {
        const VehicleState& l = world.vehicles[*j];
        out.leader = Neighbor{world.road.ahead(ego.position, l.position) - l.length, l.velocity, l.desired_speed};
    }
    if (auto j = index.follower(lane, ego.position, self)) {
        const VehicleState& f = world.vehicles[*j];
        out.follower = Neighbor{world.road.ahead(f.position, ego.position) - ego.length, f.velocity, f.desired_speed};
    }
    if (auto end = world.road.lane_end_ahead(ego.position, lane, kLaneEndLookahead)) {
        out.end_distance = *end;
        if (!out.leader || *end < out.leader->gap) out.leader = Neighbor{*end, 0.0, 0.0};
    }
    return out;
}

NeighborSummary summarize(const WorldState& world, const LaneIndex& index, std::size_t self) {
    const int lane = world.vehicles[self].lane;
    return NeighborSummary{lane_neighbors(world, index, self, lane - 1), lane_neighbors(world, index, self, lane),
                           lane_neighbors(world, index, self, lane + 1)};
}

double controller_accel(const VehicleState& v, const LaneNeighbors& same, const DynamicsParams& base) {
    const DynamicsParams p = params_for(v, base);
    if (!same.leader) return idm_acceleration(v, std::nullopt, std::nullopt, p);
    if (same.leader->gap <= 0.0) return p.a_min;
    return idm_acceleration(v, same.leader->gap, same.leader->speed, p);
}

}  // namespace

double safe_gap(double s0, double t_star, double brake, double accel, double v_follower, double closing_speed) {
    const double denom = 2.0 * std::sqrt(std::abs(brake * accel));
    return s0 + std::max(0.0, v_follower * (t_star + closing_speed / denom));
}

double idm_acceleration(const VehicleState& ego, std::optional<double> leader_gap, std::optional<double> leader_speed,
                        const DynamicsParams& p) {
    const double v = ego.velocity;
    double bracket = 1.0 - std::pow(v / p.v0, p.idm_delta);
    if (leader_gap) {
        if (!(*leader_gap > 0.0)) throw ContractError("idm_acceleration: leader gap must be positive");
        const double dv = v - leader_speed.value_or(0.0);
        const double s_star = safe_gap(p.s0, p.t_star, p.idm_b, p.idm_a, v, dv);
        const double ratio = s_star / *leader_gap;
        bracket -= ratio * ratio;
    }
    return std::clamp(p.idm_a * bracket, p.a_min, p.a_max);
}

int lane_change_decision(const VehicleState& ego, const NeighborSummary& n, const DynamicsParams& base) {
    if (ego.lc_cooldown > 0 || ego.crashed) return 0;
    const DynamicsParams p = params_for(ego, base);
    const double a_current = controller_accel(ego, n.same, base);
    const bool must_leave = n.same.end_distance < kMandatoryMergeDistance;

    int best = 0;
    double best_gain = p.lc_threshold;
    for (int dir : {+1, -1}) {
        const LaneNeighbors& target = dir > 0 ? n.left : n.right;
        if (!target.exists) continue;
        if (target.end_distance < std::max(50.0, 8.0 * ego.velocity)) continue;
        if (target.leader && target.leader->gap <= lane_change_gap(p, ego.velocity, target.leader->speed)) continue;
        if (target.follower && target.follower->gap <= lane_change_gap(p, target.follower->speed, ego.velocity))
            continue;

        double gain = controller_accel(ego, target, base) - a_current;
        if (target.follower) {
            VehicleState f;
            f.velocity = target.follower->speed;
            f.desired_speed = target.follower->desired_speed;
            const DynamicsParams fp = params_for(f, base);
            const double after = idm_acceleration(f, target.follower->gap, ego.velocity, fp);
            double before = idm_acceleration(f, std::nullopt, std::nullopt, fp);
            if (target.leader) {
                const double g = target.leader->gap + target.follower->gap + ego.length;
                if (g > 0.0) before = idm_acceleration(f, g, target.leader->speed, fp);
            }
            gain += p.lc_politeness * (after - before);
        }
        if (must_leave && target.end_distance > n.same.end_distance) gain += kMandatoryMergeBonus;
        if (gain > best_gain) {
            best_gain = gain;
            best = dir;
        }
    }
    return best;
}

NeighborSummary summarize_neighbors(const WorldState& world, int vehicle_id, const DynamicsParams&) {
    const LaneIndex index(world);
    return summarize(world, index, world.index_of(vehicle_id));
}

Action background_action(const WorldState& world, int vehicle_id, const DynamicsParams& params) {
    const LaneIndex index(world);
    const std::size_t i = world.index_of(vehicle_id);
    const NeighborSummary n = summarize(world, index, i);
    Action a;
    a.lane_change = params.lane_changes ? lane_change_decision(world.vehicles[i], n, params) : 0;
    const LaneNeighbors& lane = a.lane_change > 0 ? n.left : (a.lane_change < 0 ? n.right : n.same);
    a.accel = controller_accel(world.vehicles[i], lane, params);
    return a;
}

StepResult step(const WorldState& world, const std::map<int, Action>& agent_actions, const DynamicsParams& params,
                double dt) {
    for (const auto& [id, action] : agent_actions) {
        if (!world.find(id)) throw ContractError("step: unknown agent id " + std::to_string(id));
        if (action.lane_change < -1 || action.lane_change > 1)
            throw ContractError("step: lane change must be -1, 0 or +1");
    }

    StepResult result{world, {}};
    WorldState& w = result.world;
    w.time_step += 1;
    auto& vs = w.vehicles;
    LaneIndex index(w);

    auto flag = [&](std::size_t i, AccidentCause cause) {
        if (vs[i].crashed) return;
        vs[i].crashed = true;
        result.accidents.emplace(vs[i].id, cause);
    };

    // Lane changes: commanded agent moves first, then the background controller,
    // one vehicle at a time so each decision sees the moves before it.
    for (const auto& [id, action] : agent_actions) {
        const std::size_t i = w.index_of(id);
        if (vs[i].crashed || action.lane_change == 0) continue;
        const int target = vs[i].lane + action.lane_change;
        if (!w.road.lane_exists(target, vs[i].position)) {
            flag(i, AccidentCause::NonexistentLane);
            continue;
        }
        index.move(i, vs[i].lane, target);
        vs[i].lane = target;
    }
    for (std::size_t i = 0; i < vs.size(); ++i) {
        VehicleState& v = vs[i];
        if (v.crashed || agent_actions.count(v.id)) continue;
        if (v.lc_cooldown > 0) {
            --v.lc_cooldown;
            continue;
        }
        if (!params.lane_changes) continue;
        const int dir = lane_change_decision(v, summarize(w, index, i), params);
        if (dir == 0) continue;
        index.move(i, v.lane, v.lane + dir);
        v.lane += dir;
        v.lc_cooldown = params.lc_cooldown;
    }

    // Accelerations from the post-lane-change configuration, applied synchronously.
    std::vector<double> accel(vs.size(), 0.0);
    for (std::size_t i = 0; i < vs.size(); ++i) {
        if (vs[i].crashed) continue;
        if (auto it = agent_actions.find(vs[i].id); it != agent_actions.end()) {
            accel[i] = it->second.accel;
        } else {
            accel[i] = controller_accel(vs[i], lane_neighbors(w, index, i, vs[i].lane), params);
        }
    }

    // Ballistic update: v' = max(0, v + a dt), p' = p + (v + v') dt / 2, exact when stopping mid-step.
    for (std::size_t i = 0; i < vs.size(); ++i) {
        VehicleState& v = vs[i];
        if (v.crashed) {
            v.velocity = 0.0;
            continue;
        }
        const double v_next = v.velocity + accel[i] * dt;
        double travelled;
        if (v_next >= 0.0) {
            travelled = 0.5 * (v.velocity + v_next) * dt;
            v.velocity = v_next;
        } else {
            travelled = accel[i] < 0.0 ? -0.5 * v.velocity * v.velocity / accel[i] : 0.0;
            v.velocity = 0.0;
        }
        v.position = w.road.wrap(v.position + travelled);
    }

    // Same-lane overlap and driving into a dropped lane.
    for (int lane = 0; lane <= w.road.lane_count() + 1; ++lane) {
        const auto& members = index.lane(lane);
        for (std::size_t a = 0; a < members.size(); ++a) {
            const std::size_t i = members[a];
            for (std::size_t b = a + 1; b < members.size(); ++b) {
                const std::size_t j = members[b];
                if (vs[i].crashed && vs[j].crashed) continue;
                const double gap_ij = w.road.ahead(vs[i].position, vs[j].position) - vs[j].length;
                const double gap_ji = w.road.ahead(vs[j].position, vs[i].position) - vs[i].length;
                const bool overlap = w.road.ring() ? (gap_ij <= 0.0 || gap_ji <= 0.0)
                                                   : (vs[j].position >= vs[i].position ? gap_ij <= 0.0 : gap_ji <= 0.0);
                if (overlap) {
                    flag(i, AccidentCause::Collision);
                    flag(j, AccidentCause::Collision);
                }
            }
        }
    }
    for (std::size_t i = 0; i < vs.size(); ++i)
        if (!vs[i].crashed && !w.road.lane_exists(vs[i].lane, vs[i].position)) flag(i, AccidentCause::NonexistentLane);
    for (auto& v : vs)
        if (v.crashed) v.velocity = 0.0;
    return result;
}

namespace {

bool clear_of(const WorldState& w, int lane, double position, double length, double min_gap) {
    for (const auto& u : w.vehicles) {
        if (u.lane != lane) continue;
        const double front_gap = w.road.ahead(position, u.position) - u.length;
        const double back_gap = w.road.ahead(u.position, position) - length;
        if (front_gap < min_gap || back_gap < min_gap) return false;
    }
    return true;
}

// Caps initial speeds so every vehicle can settle behind its leader at comfortable braking.
void settle_initial_speeds(WorldState& w, const DynamicsParams& params) {
    for (auto& v : w.vehicles) v.velocity = v.desired_speed;
    const LaneIndex index(w);
    for (int iter = 0; iter < 500; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < w.vehicles.size(); ++i) {
            VehicleState& v = w.vehicles[i];
            const LaneNeighbors same = lane_neighbors(w, index, i, v.lane);
            if (!same.leader) continue;
            const double room = std::max(0.0, same.leader->gap - params.s0);
            const double cap = std::min({v.desired_speed, room / std::max(params.t_star, 1e-9),
                                         same.leader->speed + std::sqrt(2.0 * params.idm_b * room)});
            if (cap < v.velocity - 1e-12) {
                v.velocity = std::max(0.0, cap);
                changed = true;
            }
        }
        if (!changed) break;
    }
}

}  // namespace

WorldState build_scenario(const ScenarioConfig& config, double agent_desired_speed, const DynamicsParams& params) {
    config.validate();
    WorldState w;
    w.road = config.road();
    Rng rng(config.seed, "scenario");

    const int n = config.vehicle_count;
    // Even split across five classes; which classes get the remainder is shuffled.
    std::vector<int> class_order{0, 1, 2, 3, 4};
    std::shuffle(class_order.begin(), class_order.end(), rng.engine());
    std::vector<int> labels;
    labels.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < 5; ++k) {
        const int cls = class_order[static_cast<std::size_t>(k)];
        const int count = n / 5 + (k < n % 5 ? 1 : 0);
        labels.insert(labels.end(), static_cast<std::size_t>(count), cls);
    }
    std::shuffle(labels.begin(), labels.end(), rng.engine());

    auto make = [&](int id, VehicleKind kind, double speed) {
        VehicleState v;
        v.id = id;
        v.kind = kind;
        v.length = config.vehicle_length;
        v.desired_speed = speed;
        return v;
    };

    auto place_random = [&](VehicleState v) {
        for (int attempt = 0; attempt < 2000; ++attempt) {
            const int lane = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(config.lane_count)));
            const double pos = rng.uniform(0.0, config.road_length);
            if (!w.road.lane_exists(lane, pos) || !w.road.lane_exists(lane, w.road.wrap(pos - v.length))) continue;
            if (auto end = w.road.lane_end_ahead(pos, lane, config.road_length); end && *end < params.s0) continue;
            if (!clear_of(w, lane, pos, v.length, params.s0)) continue;
            v.lane = lane;
            v.position = pos;
            w.vehicles.push_back(v);
            return;
        }
        throw ConfigError("placement failure: road too full to respect the minimum gap");
    };

    if (config.scenario == ScenarioKind::CutIn) {
        const int lanes = config.lane_count;
        const int per_lane = (n + lanes - 1) / std::max(lanes, 1);
        const double spacing = config.spacing > 0.0 ? config.spacing
                                                    : config.road_length / std::max(per_lane, 1);
        if (per_lane > 0 && (spacing * per_lane > config.road_length + 1e-9 ||
                             spacing - config.vehicle_length < params.s0))
            throw ConfigError("placement failure: cut_in spacing does not fit the road");
        for (int i = 0; i < n; ++i) {
            const int lane = 1 + i % lanes;
            const int slot = i / lanes;
            VehicleState v = make(i, background_class(labels[static_cast<std::size_t>(i)]),
                                  config.class_speeds[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])]);
            v.lane = lane;
            v.position = w.road.wrap((lane - 1) * spacing / lanes + slot * spacing);
            w.vehicles.push_back(v);
        }
        // Agents sit half-way between two background vehicles in the middle lane.
        const int mid = (lanes + 1) / 2;
        for (int a = 0; a < config.agent_count; ++a) {
            VehicleState v = make(n + a, VehicleKind::Autonomous, agent_desired_speed);
            const int slots = std::max(per_lane, 1);
            const int slot = (a * std::max(slots / std::max(config.agent_count, 1), 1)) % slots;
            const double pos = w.road.wrap((mid - 1) * spacing / lanes + (slot + 0.5) * spacing);
            if (clear_of(w, mid, pos, v.length, params.s0)) {
                v.lane = mid;
                v.position = pos;
                w.vehicles.push_back(v);
            } else {
                place_random(v);
            }
        }
    } else {
        for (int i = 0; i < n; ++i) {
            const int cls = labels[static_cast<std::size_t>(i)];
            place_random(make(i, background_class(cls), config.class_speeds[static_cast<std::size_t>(cls)]));
        }
        for (int a = 0; a < config.agent_count; ++a) place_random(make(n + a, VehicleKind::Autonomous, agent_desired_speed));
    }
    w.sort_by_id();
    settle_initial_speeds(w, params);
    return w;
}

void write_trace_header(std::ostream& out) { out << "time_step,vehicle_id,velocity,position,lane,accident_flag\n"; }

void append_trace(std::ostream& out, const WorldState& world) {
    out << std::setprecision(10);
    for (const auto& v : world.vehicles)
        out << world.time_step << ',' << v.id << ',' << v.velocity << ',' << v.position << ',' << v.lane << ','
            << (v.crashed ? 1 : 0) << '\n';
}

}  // namespace offdrive

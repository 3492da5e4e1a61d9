#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "offdrive/types.hpp"

namespace offdrive {

inline constexpr double kFeetToMeters = 0.3048;

struct PerceptionParams {
    double longitudinal_range = 100.0;  // m, symmetric front/behind
    int lateral_range = 1;              // lanes on each side

    int lane_slots() const { return 2 * lateral_range + 1; }
    int max_observable() const { return 2 * lane_slots(); }
    int observation_dim() const { return 1 + 2 * max_observable() + 2 * lane_slots(); }
    void validate() const;
};

struct RewardWeights {
    std::array<double, 5> eta{1.0, 0.02, 0.5, 0.5, 40.0};
    double c = 0.0;
    double v_star = 25.0;   // m/s
    double v_limit = 30.0;  // m/s
    double s0 = 2.0;        // m
    double t_star = 1.0;    // s
    double a_min = -4.0;    // m/s^2
    double a_max = 3.0;     // m/s^2

    void validate() const;
};

enum class ScenarioKind { Highway, LaneReduction, CutIn };

std::string to_string(ScenarioKind kind);
ScenarioKind parse_scenario_kind(const std::string& name);

struct ScenarioConfig {
    ScenarioKind scenario = ScenarioKind::Highway;
    double road_length = 2195.4 * kFeetToMeters;
    int lane_count = 5;
    std::optional<Bottleneck> bottleneck;
    int vehicle_count = 117;  // background vehicles
    std::array<double, 5> class_speeds{15.0, 20.0, 23.0, 26.0, 30.0};
    int agent_count = 1;
    int horizon = 1500;
    double dt = 0.1;
    std::uint64_t seed = 0;
    double vehicle_length = 14.6 * kFeetToMeters;
    double spacing = 0.0;  // cut_in only; 0 picks road_length / per-lane count

    static ScenarioConfig defaults(ScenarioKind kind);
    void validate() const;
    RoadGeometry road() const;
};

struct DynamicsParams {
    double idm_a = 1.5;       // m/s^2
    double idm_b = 2.0;       // m/s^2
    double idm_delta = 4.0;
    double s0 = 2.0;          // m
    double t_star = 1.0;      // s
    double v0 = 25.0;         // m/s, overridden per vehicle by its desired speed
    double lc_politeness = 0.2;
    double lc_threshold = 0.2;  // m/s^2
    int lc_cooldown = 30;       // steps
    double a_min = -9.0;        // hard braking bound for background vehicles
    double a_max = 3.0;
    bool lane_changes = true;

    void validate() const;
};

struct TrainConfig {
    double gamma = 0.99;
    int batch_size = 256;
    double actor_lr = 1e-4;
    double critic_lr = 1e-3;
    double tau = 0.005;
    double lambda = 2.5;     // Q-term weight of the imitative actor loss
    double bc_weight = 1.0;  // behaviour-cloning term weight of the imitative actor loss
    double exploration_noise = 0.2;
    int gradient_steps = 100000;
    int eval_interval = 5000;
    int eval_episodes = 4;  // per checkpoint during online training
    int start_steps = 0;
    int replay_capacity = 1000000;
    bool shift_nonpositive = true;
    double reward_scale = 0.05;  // multiplies critic targets; the greedy policy is unchanged
    int final_candidates = 3;   // top quick-eval candidates re-scored with the reference protocol
    std::vector<int> hidden{256, 256};
    std::uint64_t seed = 0;

    void validate() const;
};

struct ExperimentConfig {
    ScenarioConfig scenario;
    RewardWeights reward;
    PerceptionParams perception;
    DynamicsParams dynamics;
    TrainConfig train;

    void validate() const;
};

ScenarioConfig load_scenario_config(const std::filesystem::path& path);
ScenarioConfig parse_scenario_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
ExperimentConfig parse_experiment_config(const std::string& json_text);
std::string to_json(const ScenarioConfig& config);
std::string to_json(const ExperimentConfig& config);

}  // namespace offdrive

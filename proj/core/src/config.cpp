#include "offdrive/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "offdrive/error.hpp"

namespace offdrive {

using nlohmann::json;

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json parse_json(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
}

ScenarioConfig scenario_from_json(const json& j) {
    const std::string where = "scenario";
    reject_unknown(j,
                   {"scenario", "road_length", "lane_count", "bottleneck", "vehicle_count", "class_speeds",
                    "agent_count", "horizon", "dt", "seed", "vehicle_length", "spacing"},
                   where);
    ScenarioKind kind = ScenarioKind::Highway;
    if (j.contains("scenario")) {
        if (!j.at("scenario").is_string()) throw ConfigError("scenario.scenario: expected a string");
        kind = parse_scenario_kind(j.at("scenario").get<std::string>());
    }
    ScenarioConfig c = ScenarioConfig::defaults(kind);
    read(j, "road_length", c.road_length, where);
    read(j, "lane_count", c.lane_count, where);
    read(j, "vehicle_count", c.vehicle_count, where);
    read(j, "class_speeds", c.class_speeds, where);
    read(j, "agent_count", c.agent_count, where);
    read(j, "horizon", c.horizon, where);
    read(j, "dt", c.dt, where);
    read(j, "seed", c.seed, where);
    read(j, "vehicle_length", c.vehicle_length, where);
    read(j, "spacing", c.spacing, where);
    if (j.contains("bottleneck")) {
        const json& b = j.at("bottleneck");
        if (b.is_null()) {
            c.bottleneck.reset();
        } else {
            reject_unknown(b, {"start", "end", "lanes"}, "scenario.bottleneck");
            Bottleneck bn = c.bottleneck.value_or(Bottleneck{});
            read(b, "start", bn.start, "scenario.bottleneck");
            read(b, "end", bn.end, "scenario.bottleneck");
            read(b, "lanes", bn.lanes, "scenario.bottleneck");
            c.bottleneck = bn;
        }
    }
    return c;
}

json scenario_to_json(const ScenarioConfig& c) {
    json j;
    j["scenario"] = to_string(c.scenario);
    j["road_length"] = c.road_length;
    j["lane_count"] = c.lane_count;
    if (c.bottleneck)
        j["bottleneck"] = {{"start", c.bottleneck->start}, {"end", c.bottleneck->end}, {"lanes", c.bottleneck->lanes}};
    else
        j["bottleneck"] = nullptr;
    j["vehicle_count"] = c.vehicle_count;
    j["class_speeds"] = c.class_speeds;
    j["agent_count"] = c.agent_count;
    j["horizon"] = c.horizon;
    j["dt"] = c.dt;
    j["seed"] = c.seed;
    j["vehicle_length"] = c.vehicle_length;
    j["spacing"] = c.spacing;
    return j;
}

}  // namespace

void PerceptionParams::validate() const {
    require(longitudinal_range > 0.0, "perception.longitudinal_range must be positive");
    require(lateral_range >= 0, "perception.lateral_range must be non-negative");
}

void RewardWeights::validate() const {
    for (double e : eta) require(e >= 0.0, "reward.eta entries must be non-negative");
    for (int i = 0; i < 4; ++i)
        require(eta[4] >= eta[i], "reward.eta[4] (accident weight) must be the largest coefficient");
    require(v_star > 0.0, "reward.v_star must be positive");
    require(v_limit - v_star > 0.0, "reward.v_limit must exceed reward.v_star");
    require(s0 >= 0.0, "reward.s0 must be non-negative");
    require(t_star >= 0.0, "reward.t_star must be non-negative");
    require(a_min < 0.0 && a_max > 0.0, "reward requires a_min < 0 < a_max");
}

std::string to_string(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::Highway: return "highway";
        case ScenarioKind::LaneReduction: return "lane_reduction";
        case ScenarioKind::CutIn: return "cut_in";
    }
    return "unknown";
}

ScenarioKind parse_scenario_kind(const std::string& name) {
    if (name == "highway") return ScenarioKind::Highway;
    if (name == "lane_reduction" || name == "lanereduction") return ScenarioKind::LaneReduction;
    if (name == "cut_in" || name == "cutin") return ScenarioKind::CutIn;
    throw ConfigError("unknown scenario '" + name + "' (expected highway, lane_reduction or cut_in)");
}

ScenarioConfig ScenarioConfig::defaults(ScenarioKind kind) {
    ScenarioConfig c;
    c.scenario = kind;
    switch (kind) {
        case ScenarioKind::Highway:
            break;
        case ScenarioKind::LaneReduction:
            c.lane_count = 4;
            c.bottleneck = Bottleneck{250.0, 450.0, 3};
            break;
        case ScenarioKind::CutIn:
            c.lane_count = 3;
            c.vehicle_count = 36;
            c.class_speeds = {12.0, 13.0, 14.0, 15.0, 16.0};
            c.spacing = 50.0;
            break;
    }
    return c;
}

void ScenarioConfig::validate() const {
    require(road_length > 0.0, "scenario.road_length must be positive");
    require(lane_count >= 1, "scenario.lane_count must be at least 1");
    require(vehicle_count >= 0, "scenario.vehicle_count must be non-negative");
    require(agent_count >= 0, "scenario.agent_count must be non-negative");
    require(horizon >= 1, "scenario.horizon must be at least 1");
    require(dt > 0.0, "scenario.dt must be positive");
    require(vehicle_length > 0.0, "scenario.vehicle_length must be positive");
    require(spacing >= 0.0, "scenario.spacing must be non-negative");
    for (std::size_t i = 0; i < class_speeds.size(); ++i) {
        require(class_speeds[i] > 0.0, "scenario.class_speeds must be positive");
        if (i > 0) require(class_speeds[i] > class_speeds[i - 1], "scenario.class_speeds must be strictly increasing");
    }
    if (scenario == ScenarioKind::LaneReduction) {
        require(bottleneck.has_value(), "lane_reduction requires a bottleneck");
        require(bottleneck->lanes < lane_count && bottleneck->lanes >= 1,
                "scenario.bottleneck.lanes must be in [1, lane_count)");
        require(bottleneck->start >= 0.0 && bottleneck->end <= road_length && bottleneck->start < bottleneck->end,
                "scenario.bottleneck interval must lie within [0, road_length)");
    } else {
        require(!bottleneck.has_value(), "only lane_reduction supports a bottleneck");
    }
}

RoadGeometry ScenarioConfig::road() const { return RoadGeometry(road_length, lane_count, bottleneck, true); }

void DynamicsParams::validate() const {
    require(idm_a > 0.0 && idm_b > 0.0, "dynamics.idm_a and dynamics.idm_b must be positive");
    require(idm_delta > 0.0, "dynamics.idm_delta must be positive");
    require(v0 > 0.0, "dynamics.v0 must be positive");
    require(s0 >= 0.0 && t_star >= 0.0, "dynamics.s0 and dynamics.t_star must be non-negative");
    require(lc_cooldown >= 0, "dynamics.lc_cooldown must be non-negative");
    require(a_min < 0.0 && a_max > 0.0, "dynamics requires a_min < 0 < a_max");
}

void TrainConfig::validate() const {
    require(gamma >= 0.0 && gamma < 1.0, "train.gamma must be in [0, 1)");
    require(batch_size >= 1, "train.batch_size must be positive");
    require(actor_lr > 0.0 && critic_lr > 0.0, "train learning rates must be positive");
    require(tau > 0.0 && tau <= 1.0, "train.tau must be in (0, 1]");
    require(lambda >= 0.0 && bc_weight >= 0.0, "train.lambda and train.bc_weight must be non-negative");
    require(exploration_noise >= 0.0, "train.exploration_noise must be non-negative");
    require(gradient_steps >= 0, "train.gradient_steps must be non-negative");
    require(eval_interval >= 1, "train.eval_interval must be positive");
    require(eval_episodes >= 1, "train.eval_episodes must be positive");
    require(start_steps >= 0, "train.start_steps must be non-negative");
    require(replay_capacity >= 1, "train.replay_capacity must be positive");
    require(reward_scale > 0.0, "train.reward_scale must be positive");
    require(final_candidates >= 1, "train.final_candidates must be positive");
    require(!hidden.empty(), "train.hidden must list at least one layer");
    for (int h : hidden) require(h >= 1, "train.hidden sizes must be positive");
}

void ExperimentConfig::validate() const {
    scenario.validate();
    reward.validate();
    perception.validate();
    dynamics.validate();
    train.validate();
    if (scenario.scenario == ScenarioKind::CutIn) {
        for (double v : scenario.class_speeds)
            require(v < reward.v_star, "cut_in requires every background class speed below reward.v_star");
    }
}

ScenarioConfig parse_scenario_config(const std::string& json_text) {
    ScenarioConfig c = scenario_from_json(parse_json(json_text));
    c.validate();
    return c;
}

ScenarioConfig load_scenario_config(const std::filesystem::path& path) {
    return parse_scenario_config(read_file(path));
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
    const json j = parse_json(json_text);
    reject_unknown(j, {"scenario", "reward", "perception", "dynamics", "train"}, "config");
    ExperimentConfig c;
    if (j.contains("scenario")) c.scenario = scenario_from_json(j.at("scenario"));
    if (j.contains("reward")) {
        const json& r = j.at("reward");
        const std::string w = "reward";
        reject_unknown(r, {"eta", "c", "v_star", "v_limit", "s0", "t_star", "a_min", "a_max"}, w);
        read(r, "eta", c.reward.eta, w);
        read(r, "c", c.reward.c, w);
        read(r, "v_star", c.reward.v_star, w);
        read(r, "v_limit", c.reward.v_limit, w);
        read(r, "s0", c.reward.s0, w);
        read(r, "t_star", c.reward.t_star, w);
        read(r, "a_min", c.reward.a_min, w);
        read(r, "a_max", c.reward.a_max, w);
    }
    if (j.contains("perception")) {
        const json& p = j.at("perception");
        reject_unknown(p, {"longitudinal_range", "lateral_range"}, "perception");
        read(p, "longitudinal_range", c.perception.longitudinal_range, "perception");
        read(p, "lateral_range", c.perception.lateral_range, "perception");
    }
    if (j.contains("dynamics")) {
        const json& d = j.at("dynamics");
        const std::string w = "dynamics";
        reject_unknown(d,
                       {"idm_a", "idm_b", "idm_delta", "s0", "t_star", "v0", "lc_politeness", "lc_threshold",
                        "lc_cooldown", "a_min", "a_max", "lane_changes"},
                       w);
        read(d, "idm_a", c.dynamics.idm_a, w);
        read(d, "idm_b", c.dynamics.idm_b, w);
        read(d, "idm_delta", c.dynamics.idm_delta, w);
        read(d, "s0", c.dynamics.s0, w);
        read(d, "t_star", c.dynamics.t_star, w);
        read(d, "v0", c.dynamics.v0, w);
        read(d, "lc_politeness", c.dynamics.lc_politeness, w);
        read(d, "lc_threshold", c.dynamics.lc_threshold, w);
        read(d, "lc_cooldown", c.dynamics.lc_cooldown, w);
        read(d, "a_min", c.dynamics.a_min, w);
        read(d, "a_max", c.dynamics.a_max, w);
        read(d, "lane_changes", c.dynamics.lane_changes, w);
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        const std::string w = "train";
        reject_unknown(t,
                       {"gamma", "batch_size", "actor_lr", "critic_lr", "tau", "lambda", "bc_weight",
                        "exploration_noise", "gradient_steps", "eval_interval", "eval_episodes", "start_steps",
                        "replay_capacity", "shift_nonpositive", "reward_scale", "final_candidates", "hidden", "seed"},
                       w);
        read(t, "gamma", c.train.gamma, w);
        read(t, "batch_size", c.train.batch_size, w);
        read(t, "actor_lr", c.train.actor_lr, w);
        read(t, "critic_lr", c.train.critic_lr, w);
        read(t, "tau", c.train.tau, w);
        read(t, "lambda", c.train.lambda, w);
        read(t, "bc_weight", c.train.bc_weight, w);
        read(t, "exploration_noise", c.train.exploration_noise, w);
        read(t, "gradient_steps", c.train.gradient_steps, w);
        read(t, "eval_interval", c.train.eval_interval, w);
        read(t, "eval_episodes", c.train.eval_episodes, w);
        read(t, "start_steps", c.train.start_steps, w);
        read(t, "replay_capacity", c.train.replay_capacity, w);
        read(t, "shift_nonpositive", c.train.shift_nonpositive, w);
        read(t, "reward_scale", c.train.reward_scale, w);
        read(t, "final_candidates", c.train.final_candidates, w);
        read(t, "hidden", c.train.hidden, w);
        read(t, "seed", c.train.seed, w);
    }
    c.validate();
    return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    return parse_experiment_config(read_file(path));
}

std::string to_json(const ScenarioConfig& config) { return scenario_to_json(config).dump(2); }

std::string to_json(const ExperimentConfig& c) {
    json j;
    j["scenario"] = scenario_to_json(c.scenario);
    j["reward"] = {{"eta", c.reward.eta},       {"c", c.reward.c},         {"v_star", c.reward.v_star},
                   {"v_limit", c.reward.v_limit}, {"s0", c.reward.s0},       {"t_star", c.reward.t_star},
                   {"a_min", c.reward.a_min},   {"a_max", c.reward.a_max}};
    j["perception"] = {{"longitudinal_range", c.perception.longitudinal_range},
                       {"lateral_range", c.perception.lateral_range}};
    j["dynamics"] = {{"idm_a", c.dynamics.idm_a},
                     {"idm_b", c.dynamics.idm_b},
                     {"idm_delta", c.dynamics.idm_delta},
                     {"s0", c.dynamics.s0},
                     {"t_star", c.dynamics.t_star},
                     {"v0", c.dynamics.v0},
                     {"lc_politeness", c.dynamics.lc_politeness},
                     {"lc_threshold", c.dynamics.lc_threshold},
                     {"lc_cooldown", c.dynamics.lc_cooldown},
                     {"a_min", c.dynamics.a_min},
                     {"a_max", c.dynamics.a_max},
                     {"lane_changes", c.dynamics.lane_changes}};
    j["train"] = {{"gamma", c.train.gamma},
                  {"batch_size", c.train.batch_size},
                  {"actor_lr", c.train.actor_lr},
                  {"critic_lr", c.train.critic_lr},
                  {"tau", c.train.tau},
                  {"lambda", c.train.lambda},
                  {"bc_weight", c.train.bc_weight},
                  {"exploration_noise", c.train.exploration_noise},
                  {"gradient_steps", c.train.gradient_steps},
                  {"eval_interval", c.train.eval_interval},
                  {"eval_episodes", c.train.eval_episodes},
                  {"start_steps", c.train.start_steps},
                  {"replay_capacity", c.train.replay_capacity},
                  {"shift_nonpositive", c.train.shift_nonpositive},
                  {"reward_scale", c.train.reward_scale},
                  {"final_candidates", c.train.final_candidates},
                  {"hidden", c.train.hidden},
                  {"seed", c.train.seed}};
    return j.dump(2);
}

}  // namespace offdrive

#include "offdrive/generate.hpp"

#include <cmath>
#include <map>

#include "offdrive/env.hpp"
#include "offdrive/error.hpp"
#include "offdrive/rng.hpp"
#include "offdrive/stats.hpp"

namespace offdrive {

LoadedDataset generate_synthetic(const ExperimentConfig& config, Policy& policy, const GenerateOptions& options) {
    if (options.count == 0) throw ConfigError("gen-dataset: count must be positive");
    const int dim = config.perception.observation_dim();
    if (policy.obs_dim() >= 0 && policy.obs_dim() != dim)
        throw DataError("policy '" + policy.label() + "' expects " + std::to_string(policy.obs_dim()) +
                        "-dim observations, environment emits " + std::to_string(dim));

    LoadedDataset out{{}, Dataset(dim)};
    out.data.reserve(options.count);
    DrivingEnv env(config);
    std::vector<double> episode_returns;
    std::uint64_t episode = 0;

    while (out.data.size() < options.count) {
        auto initial = env.reset(Rng::derive_key(options.seed, "gen-episode-" + std::to_string(episode)));
        ++episode;
        std::map<int, std::vector<float>> obs;
        std::map<int, double> totals;
        for (auto& [id, o] : initial) {
            obs[id] = o.to_vector();
            totals[id] = 0.0;
        }
        bool complete = false;
        while (out.data.size() < options.count) {
            std::map<int, Action> actions;
            for (int id : env.agent_ids()) {
                if (env.agent_done(id)) continue;
                const auto raw = policy.act(PolicyContext{obs[id], env.world(), id});
                actions[id] = continuous_to_hybrid(raw[0], raw[1], config.reward);
            }
            const WorldState before = env.world();
            const EnvStep s = env.step(actions);
            for (const auto& [id, a] : s.agents) {
                if (out.data.size() >= options.count) break;
                const Action& act = actions.at(id);
                const auto next = a.observation.to_vector();
                const DoneFlag done = a.terminal ? DoneFlag::Terminal : (a.truncated ? DoneFlag::Truncated : DoneFlag::None);
                out.data.push(obs[id], {static_cast<float>(act.accel), static_cast<float>(act.lane_change)},
                              static_cast<float>(a.reward.total), next, done);
                if (options.reward_check_every && out.data.size() % options.reward_check_every == 0) {
                    const double check = reward(before, act, env.world(), id, config.reward, config.perception).total;
                    if (static_cast<float>(check) != out.data.reward(out.data.size() - 1))
                        throw ContractError("stored reward differs from the recomputed reward");
                }
                totals[id] += a.reward.total;
                obs[id] = next;
            }
            if (s.episode_over) {
                complete = true;
                break;
            }
        }
        if (complete) {
            double sum = 0.0;
            for (const auto& [id, r] : totals) sum += r;
            episode_returns.push_back(totals.empty() ? 0.0 : sum / static_cast<double>(totals.size()));
        } else if (episode_returns.empty()) {
            // Not a single full episode fit in the budget; report the partial one.
            double sum = 0.0;
            for (const auto& [id, r] : totals) sum += r;
            episode_returns.push_back(totals.empty() ? 0.0 : sum / static_cast<double>(totals.size()));
        }
    }

    DatasetMeta& m = out.meta;
    m.scenario = to_string(config.scenario.scenario);
    m.flavor = options.flavor;
    m.obs_dim = dim;
    m.transition_count = out.data.size();
    m.seed = options.seed;
    m.normalization = compute_normalization(out.data);
    m.source_policy = options.source_policy.empty() ? policy.label() : options.source_policy;
    m.behavior_return = mean(episode_returns);
    m.episodes = episode;
    return out;
}

}  // namespace offdrive

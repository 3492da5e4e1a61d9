#include "offdrive/training.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include "offdrive/env.hpp"
#include "offdrive/error.hpp"
#include "offdrive/policy.hpp"
#include "offdrive/reward.hpp"
#include "offdrive/rl.hpp"
#include "offdrive/rng.hpp"

namespace offdrive {

std::string log_csv(const std::vector<LogRow>& rows) {
    std::ostringstream out;
    out << std::setprecision(10) << "step,critic_loss,actor_loss,bc_loss,eval_return\n";
    for (const auto& r : rows) {
        out << r.step << ',' << r.critic_loss << ',' << r.actor_loss << ',' << r.bc_loss << ',';
        if (r.eval_return) out << *r.eval_return;
        out << '\n';
    }
    return out.str();
}

namespace {

struct LossAverager {
    double critic = 0.0, actor = 0.0, bc = 0.0;
    std::int64_t n = 0;

    void add(const rl::StepStats& s) {
        critic += s.critic_loss;
        actor += s.actor_loss;
        bc += s.bc_loss;
        ++n;
    }
    LogRow flush(std::int64_t step) {
        LogRow row;
        row.step = step;
        if (n > 0) {
            row.critic_loss = critic / static_cast<double>(n);
            row.actor_loss = actor / static_cast<double>(n);
            row.bc_loss = bc / static_cast<double>(n);
        }
        *this = {};
        return row;
    }
};

std::vector<std::size_t> sample_rows(Rng& rng, std::size_t size, int batch) {
    std::vector<std::size_t> rows(static_cast<std::size_t>(batch));
    for (auto& r : rows) r = rng.index(size);
    return rows;
}

Checkpoint make_checkpoint(const ExperimentConfig& config, const nn::Mlp& actor, const nn::Mlp* critic,
                           const Normalization& norm, std::string label, std::string algorithm, std::int64_t step,
                           std::uint64_t seed) {
    Checkpoint c;
    c.label = std::move(label);
    c.algorithm = std::move(algorithm);
    c.scenario = to_string(config.scenario.scenario);
    c.actor = actor;
    if (critic) c.critic = *critic;
    c.normalization = norm;
    c.action_scale = rl::ActionScale::from(config.reward);
    c.config_hash = config_hash(config);
    c.seed = seed;
    c.step = step;
    return c;
}

}  // namespace

OnlineResult train_online(const ExperimentConfig& config, const OnlineOptions& options) {
    config.validate();
    const TrainConfig& tc = config.train;
    if (options.steps <= 0) throw ConfigError("train-online: steps must be positive");
    const int dim = config.perception.observation_dim();
    const Normalization norm = rl::physical_normalization(config.perception, config.reward);
    const rl::ActionScale scale = rl::ActionScale::from(config.reward);
    const double shift = tc.shift_nonpositive ? reward_upper_bound(config.reward, config.perception) : 0.0;
    const double absorbing = rl::terminal_value(shift, tc.gamma) * tc.reward_scale;

    Rng init_rng(tc.seed, "ddpg-init");
    Rng explore(tc.seed, "ddpg-explore");
    Rng sampler(tc.seed, "ddpg-sample");
    rl::ActorCritic ac = rl::make_actor_critic(dim, tc, init_rng);

    const std::size_t capacity = static_cast<std::size_t>(tc.replay_capacity);
    Dataset replay(dim);
    std::size_t write_pos = 0;

    struct Candidate {
        std::int64_t step;
        nn::Mlp actor;
        nn::Mlp critic;
        double score;
    };
    std::vector<Candidate> candidates;
    const std::uint64_t quick_seed = Rng::derive_key(tc.seed, "quick-eval");
    auto quick_eval = [&](const nn::Mlp& actor) {
        ActorPolicy p(actor, norm, scale, "candidate");
        return mean(evaluate_policy(config, p, tc.eval_episodes, quick_seed));
    };

    OnlineResult result;
    candidates.push_back({0, ac.actor, ac.critic, quick_eval(ac.actor)});
    result.log.push_back(LogRow{0, 0, 0, 0, candidates.back().score});

    DrivingEnv env(config);
    std::uint64_t episode = 0;
    std::map<int, std::vector<float>> obs;
    auto start_episode = [&] {
        auto initial = env.reset(Rng::derive_key(tc.seed, "train-episode-" + std::to_string(episode++)));
        obs.clear();
        for (auto& [id, o] : initial) obs[id] = o.to_vector();
    };
    start_episode();

    LossAverager losses;
    const std::size_t warmup = std::max<std::size_t>(static_cast<std::size_t>(tc.batch_size),
                                                     static_cast<std::size_t>(tc.start_steps));
    for (std::int64_t t = 1; t <= options.steps; ++t) {
        if (env.episode_over()) start_episode();
        std::map<int, Action> actions;
        for (int id : env.agent_ids()) {
            if (env.agent_done(id)) continue;
            double u0, u1;
            if (t <= tc.start_steps) {
                u0 = explore.uniform(-1.0, 1.0);
                u1 = explore.uniform(-1.0, 1.0);
            } else {
                const Eigen::MatrixXd u = ac.actor.forward(rl::normalize(obs[id], norm));
                u0 = std::clamp(u(0, 0) + explore.normal(0.0, tc.exploration_noise), -1.0, 1.0);
                u1 = std::clamp(u(1, 0) + explore.normal(0.0, tc.exploration_noise), -1.0, 1.0);
            }
            const auto phys = scale.to_physical(u0, u1);
            actions[id] = continuous_to_hybrid(phys[0], phys[1], config.reward);
        }
        const EnvStep s = env.step(actions);
        for (const auto& [id, a] : s.agents) {
            const Action& act = actions.at(id);
            const auto next = a.observation.to_vector();
            const DoneFlag done = a.terminal ? DoneFlag::Terminal : (a.truncated ? DoneFlag::Truncated : DoneFlag::None);
            const std::array<float, 2> stored{static_cast<float>(act.accel), static_cast<float>(act.lane_change)};
            if (replay.size() < capacity)
                replay.push(obs[id], stored, static_cast<float>(a.reward.total), next, done);
            else
                replay.assign(write_pos, obs[id], stored, static_cast<float>(a.reward.total), next, done);
            write_pos = (write_pos + 1) % capacity;
            obs[id] = next;
        }

        if (replay.size() >= warmup) {
            const auto rows = sample_rows(sampler, replay.size(), tc.batch_size);
            rl::Batch batch = rl::make_batch(replay, rows, norm, scale, shift, tc.reward_scale);
            batch.terminal_value = absorbing;
            losses.add(rl::ddpg_step(ac, batch, tc));
        }
        if (options.log_interval > 0 && t % options.log_interval == 0) result.log.push_back(losses.flush(t));
        if (t % tc.eval_interval == 0 || t == options.steps) {
            candidates.push_back({t, ac.actor, ac.critic, quick_eval(ac.actor)});
            LogRow row = losses.flush(t);
            row.eval_return = candidates.back().score;
            result.log.push_back(row);
        }
    }

    // Quick evaluations are noisy: re-score the strongest few with the reference protocol and keep the best.
    auto reference_of = [&](const Candidate& c) {
        return evaluate_protocol(
                   config, [&] { return std::make_unique<ActorPolicy>(c.actor, norm, scale, "candidate"); },
                   options.reference_protocol, options.threads)
            .mean();
    };
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return candidates[a].score > candidates[b].score; });
    std::map<std::size_t, double> ref_score;
    ref_score[0] = reference_of(candidates[0]);
    const std::size_t shortlist = std::min<std::size_t>(order.size(), static_cast<std::size_t>(tc.final_candidates));
    std::size_t best = order[0];
    for (std::size_t k = 0; k < shortlist; ++k) {
        const std::size_t i = order[k];
        if (!ref_score.count(i)) ref_score[i] = reference_of(candidates[i]);
        if (ref_score[i] > ref_score[best]) best = i;
    }
    if (!ref_score.count(best)) ref_score[best] = reference_of(candidates[best]);

    // Medium: earliest candidate before the final one whose quick score reaches halfway from random.
    const double half = candidates[0].score + 0.5 * (candidates[best].score - candidates[0].score);
    std::size_t med = best;
    for (std::size_t i = 1; i < best; ++i)
        if (candidates[i].score >= half) {
            med = i;
            break;
        }
    if (!ref_score.count(med)) ref_score[med] = reference_of(candidates[med]);
    if (ref_score[med] > ref_score[best]) std::swap(med, best);
    for (const auto& c : candidates) result.quick_scores.emplace_back(c.step, c.score);

    auto checkpoint_of = [&](const Candidate& c, const char* label) {
        return make_checkpoint(config, c.actor, &c.critic, norm, label, "ddpg", c.step, tc.seed);
    };
    result.random = checkpoint_of(candidates[0], "random");
    result.medium = checkpoint_of(candidates[med], "medium");
    result.final = checkpoint_of(candidates[best], "final");
    result.final.rng_state = explore.save_state();

    References& refs = result.references;
    refs.scenario = to_string(config.scenario.scenario);
    refs.protocol = options.reference_protocol;
    refs.random = ref_score[0];
    refs.medium = ref_score[med];
    refs.final = ref_score[best];
    refs.config_hash = config_hash(config);
    return result;
}

OfflineResult train_offline(const ExperimentConfig& config, const LoadedDataset& dataset, const OfflineOptions& options) {
    config.validate();
    const int dim = config.perception.observation_dim();
    if (dataset.data.obs_dim() != dim)
        throw DataError("dataset has " + std::to_string(dataset.data.obs_dim()) + "-dim observations, config expects " +
                        std::to_string(dim));
    if (dataset.data.empty()) throw DataError("train-offline: dataset is empty");
    if (options.steps <= 0) throw ConfigError("train-offline: steps must be positive");
    const TrainConfig& tc = config.train;
    Normalization norm = dataset.meta.normalization;
    if (norm.empty()) norm = compute_normalization(dataset.data);
    const rl::ActionScale scale = rl::ActionScale::from(config.reward);
    const double shift = tc.shift_nonpositive ? reward_upper_bound(config.reward, config.perception) : 0.0;

    auto algo = rl::make_algorithm(options.algorithm);
    TrainConfig run = tc;
    run.seed = options.seed;
    Rng init_rng(options.seed, "offline-init");
    Rng sampler(options.seed, "offline-sample");
    algo->init(dim, run, init_rng);

    OfflineResult result;
    LossAverager losses;
    for (std::int64_t t = 1; t <= options.steps; ++t) {
        const auto rows = sample_rows(sampler, dataset.data.size(), tc.batch_size);
        rl::Batch batch = rl::make_batch(dataset.data, rows, norm, scale, shift, tc.reward_scale);
        batch.terminal_value = rl::terminal_value(shift, tc.gamma) * tc.reward_scale;
        losses.add(algo->train_step(batch));
        if ((options.log_interval > 0 && t % options.log_interval == 0) || t == options.steps)
            result.log.push_back(losses.flush(t));
    }
    result.checkpoint = make_checkpoint(config, algo->actor(), algo->critic(), norm, algo->name(), algo->name(),
                                        options.steps, options.seed);
    result.checkpoint.rng_state = sampler.save_state();
    return result;
}

}  // namespace offdrive

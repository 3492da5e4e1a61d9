#include "offdrive/rl.hpp"

#include <algorithm>
#include <cmath>

#include "offdrive/error.hpp"

namespace offdrive::rl {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::array<double, 2> ActionScale::to_unit(double accel, double lane) const {
    const double mid = 0.5 * (accel_max + accel_min), half = 0.5 * (accel_max - accel_min);
    return {(accel - mid) / half, lane};
}

std::array<double, 2> ActionScale::to_physical(double unit_accel, double unit_lane) const {
    const double mid = 0.5 * (accel_max + accel_min), half = 0.5 * (accel_max - accel_min);
    return {mid + half * unit_accel, unit_lane};
}

Normalization physical_normalization(const PerceptionParams& p, const RewardWeights& w) {
    const int dim = p.observation_dim();
    const int n = p.max_observable();
    Normalization norm = Normalization::identity(dim);
    norm.scale[0] = w.v_limit;
    for (int i = 0; i < n; ++i) {
        norm.scale[1 + i] = w.v_limit;
        norm.scale[1 + n + i] = p.longitudinal_range;
    }
    return norm;
}

double terminal_value(double reward_shift, double gamma) {
    return reward_shift > 0.0 ? -reward_shift / (1.0 - gamma) : 0.0;
}

MatrixXd normalize(std::span<const float> obs, const Normalization& norm) {
    MatrixXd out(static_cast<Eigen::Index>(obs.size()), 1);
    for (std::size_t j = 0; j < obs.size(); ++j) out(j, 0) = (obs[j] - norm.mean[j]) / norm.scale[j];
    return out;
}

Batch make_batch(const Dataset& data, std::span<const std::size_t> rows, const Normalization& norm,
                 const ActionScale& scale, double reward_shift, double reward_scale) {
    const int d = data.obs_dim();
    if (static_cast<int>(norm.mean.size()) != d) throw ContractError("normalization does not match dataset dimension");
    const auto n = static_cast<Eigen::Index>(rows.size());
    Batch b{MatrixXd(d, n), MatrixXd(2, n), VectorXd(n), MatrixXd(d, n), VectorXd(n)};
    for (Eigen::Index c = 0; c < n; ++c) {
        const std::size_t r = rows[c];
        const auto o = data.obs(r), o2 = data.next_obs(r);
        for (int j = 0; j < d; ++j) {
            b.obs(j, c) = (o[j] - norm.mean[j]) / norm.scale[j];
            b.next_obs(j, c) = (o2[j] - norm.mean[j]) / norm.scale[j];
        }
        const auto a = data.action(r);
        const auto u = scale.to_unit(a[0], a[1]);
        b.action(0, c) = u[0];
        b.action(1, c) = u[1];
        b.reward(c) = (data.reward(r) - reward_shift) * reward_scale;
        b.not_terminal(c) = data.terminal(r) ? 0.0 : 1.0;
    }
    return b;
}

nn::Mlp make_actor(int obs_dim, const std::vector<int>& hidden, Rng& rng) {
    std::vector<int> sizes{obs_dim};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(2);
    nn::Mlp net(sizes, nn::Activation::Tanh, nn::Activation::Tanh);
    net.initialize(rng);
    return net;
}

nn::Mlp make_critic(int obs_dim, const std::vector<int>& hidden, Rng& rng) {
    std::vector<int> sizes{obs_dim + 2};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(1);
    nn::Mlp net(sizes, nn::Activation::Tanh, nn::Activation::Identity);
    net.initialize(rng);
    return net;
}

MatrixXd critic_input(const MatrixXd& obs, const MatrixXd& action) {
    MatrixXd x(obs.rows() + action.rows(), obs.cols());
    x << obs, action;
    return x;
}

double td_loss_gradient(const nn::Mlp& critic, const nn::Mlp& critic_target, const nn::Mlp& target_actor,
                        const Batch& batch, double gamma, VectorXd& grad) {
    const MatrixXd next_action = target_actor.forward(batch.next_obs);
    const VectorXd next_q = critic_target.forward(critic_input(batch.next_obs, next_action)).row(0).transpose();
    const VectorXd bootstrap =
        batch.not_terminal.cwiseProduct(next_q) +
        (VectorXd::Ones(batch.size()) - batch.not_terminal) * batch.terminal_value;
    const VectorXd target = batch.reward + gamma * bootstrap;

    nn::Mlp::Cache cache;
    const VectorXd q = critic.forward(critic_input(batch.obs, batch.action), cache).row(0).transpose();
    const VectorXd err = q - target;
    const double n = static_cast<double>(batch.size());
    MatrixXd dq = (2.0 / n) * err.transpose();
    critic.backward(cache, dq, grad);
    return err.squaredNorm() / n;
}

namespace {

// Gradient of mean_j coef * Q(o_j, pi(o_j)) with respect to the actor parameters, plus
// the per-sample Q values. Returns the input gradient of the critic restricted to the action rows.
VectorXd q_through_actor(const nn::Mlp& actor, const nn::Mlp& critic, const MatrixXd& obs, const MatrixXd& pi,
                         double coef, MatrixXd& d_action) {
    nn::Mlp::Cache cc;
    const VectorXd q = critic.forward(critic_input(obs, pi), cc).row(0).transpose();
    const double n = static_cast<double>(obs.cols());
    VectorXd unused;
    MatrixXd d_in;
    critic.backward(cc, MatrixXd::Constant(1, obs.cols(), coef / n), unused, &d_in);
    d_action = d_in.bottomRows(actor.output_dim());
    return q;
}

}  // namespace

double ddpg_actor_gradient(const nn::Mlp& actor, const nn::Mlp& critic, const Batch& batch, VectorXd& grad) {
    nn::Mlp::Cache ac;
    const MatrixXd pi = actor.forward(batch.obs, ac);
    MatrixXd d_action;
    const VectorXd q = q_through_actor(actor, critic, batch.obs, pi, -1.0, d_action);
    actor.backward(ac, d_action, grad);
    return -q.mean();
}

double bc_gradient(const nn::Mlp& actor, const Batch& batch, VectorXd& grad) {
    nn::Mlp::Cache ac;
    const MatrixXd diff = actor.forward(batch.obs, ac) - batch.action;
    const double n = static_cast<double>(diff.size());
    actor.backward(ac, (2.0 / n) * diff, grad);
    return diff.squaredNorm() / n;
}

double imitative_actor_gradient(const nn::Mlp& actor, const nn::Mlp& critic, const Batch& batch, double lambda,
                                double bc_weight, VectorXd& grad) {
    nn::Mlp::Cache ac;
    const MatrixXd pi = actor.forward(batch.obs, ac);
    const VectorXd q0 = critic.forward(critic_input(batch.obs, pi)).row(0).transpose();
    const double alpha = lambda / std::max(q0.cwiseAbs().mean(), 1e-8);

    MatrixXd d_action;
    const VectorXd q = q_through_actor(actor, critic, batch.obs, pi, -alpha, d_action);
    const MatrixXd diff = pi - batch.action;
    const double n = static_cast<double>(diff.size());
    d_action += bc_weight * (2.0 / n) * diff;
    actor.backward(ac, d_action, grad);
    return -alpha * q.mean() + bc_weight * diff.squaredNorm() / n;
}

double td_step(nn::Mlp& critic, nn::Mlp& critic_target, const nn::Mlp& target_actor, nn::Adam& opt,
               const Batch& batch, double gamma, double tau) {
    VectorXd grad;
    const double loss = td_loss_gradient(critic, critic_target, target_actor, batch, gamma, grad);
    opt.step(critic.parameters(), grad);
    nn::polyak_update(critic_target, critic, tau);
    return loss;
}

double bc_step(nn::Mlp& actor, nn::Adam& opt, const Batch& batch) {
    VectorXd grad;
    const double loss = bc_gradient(actor, batch, grad);
    opt.step(actor.parameters(), grad);
    return loss;
}

ActorCritic make_actor_critic(int obs_dim, const TrainConfig& config, Rng& rng) {
    ActorCritic ac;
    ac.actor = make_actor(obs_dim, config.hidden, rng);
    ac.critic = make_critic(obs_dim, config.hidden, rng);
    ac.actor_target = ac.actor;
    ac.critic_target = ac.critic;
    ac.actor_opt = nn::Adam(ac.actor.parameter_count(), config.actor_lr);
    ac.critic_opt = nn::Adam(ac.critic.parameter_count(), config.critic_lr);
    return ac;
}

StepStats ddpg_step(ActorCritic& ac, const Batch& batch, const TrainConfig& config) {
    StepStats s;
    s.critic_loss = td_step(ac.critic, ac.critic_target, ac.actor_target, ac.critic_opt, batch, config.gamma, config.tau);
    VectorXd grad;
    s.actor_loss = ddpg_actor_gradient(ac.actor, ac.critic, batch, grad);
    ac.actor_opt.step(ac.actor.parameters(), grad);
    nn::polyak_update(ac.actor_target, ac.actor, config.tau);
    return s;
}

StepStats imitative_step(ActorCritic& ac, const Batch& batch, const TrainConfig& config) {
    StepStats s;
    s.critic_loss = td_step(ac.critic, ac.critic_target, ac.actor_target, ac.critic_opt, batch, config.gamma, config.tau);
    VectorXd grad;
    s.actor_loss = imitative_actor_gradient(ac.actor, ac.critic, batch, config.lambda, config.bc_weight, grad);
    ac.actor_opt.step(ac.actor.parameters(), grad);
    nn::polyak_update(ac.actor_target, ac.actor, config.tau);
    VectorXd unused;
    s.bc_loss = bc_gradient(ac.actor, batch, unused);
    return s;
}

namespace {

class BehaviorCloning final : public OfflineAlgorithm {
public:
    std::string name() const override { return "bc"; }
    void init(int obs_dim, const TrainConfig& config, Rng& rng) override {
        actor_ = make_actor(obs_dim, config.hidden, rng);
        opt_ = nn::Adam(actor_.parameter_count(), config.actor_lr);
    }
    StepStats train_step(const Batch& batch) override {
        StepStats s;
        s.bc_loss = s.actor_loss = bc_step(actor_, opt_, batch);
        return s;
    }
    const nn::Mlp& actor() const override { return actor_; }

private:
    nn::Mlp actor_;
    nn::Adam opt_;
};

class Imitative final : public OfflineAlgorithm {
public:
    std::string name() const override { return "imitative"; }
    void init(int obs_dim, const TrainConfig& config, Rng& rng) override {
        config_ = config;
        ac_ = make_actor_critic(obs_dim, config, rng);
    }
    StepStats train_step(const Batch& batch) override { return imitative_step(ac_, batch, config_); }
    const nn::Mlp& actor() const override { return ac_.actor; }
    const nn::Mlp* critic() const override { return &ac_.critic; }

private:
    TrainConfig config_;
    ActorCritic ac_;
};

}  // namespace

std::unique_ptr<OfflineAlgorithm> make_algorithm(const std::string& name) {
    if (name == "bc") return std::make_unique<BehaviorCloning>();
    if (name == "imitative") return std::make_unique<Imitative>();
    for (const char* planned : kPlannedAlgorithms)
        if (name == planned) throw ConfigError("offline algorithm '" + name + "' is not implemented");
    throw ConfigError("unknown offline algorithm '" + name + "'");
}

}  // namespace offdrive::rl

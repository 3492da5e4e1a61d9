#pragma once

#include <array>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "offdrive/config.hpp"
#include "offdrive/dataset.hpp"
#include "offdrive/mlp.hpp"
#include "offdrive/rng.hpp"

namespace offdrive::rl {

// Affine map between physical actions and the actor's [-1, 1]^2 output.
struct ActionScale {
    double accel_min = -4.0;
    double accel_max = 3.0;

    static ActionScale from(const RewardWeights& w) { return {w.a_min, w.a_max}; }
    std::array<double, 2> to_unit(double accel, double lane) const;
    std::array<double, 2> to_physical(double unit_accel, double unit_lane) const;
};

// Fixed scales from physical limits (speeds by v_limit, gaps by the perception range).
Normalization physical_normalization(const PerceptionParams& perception, const RewardWeights& weights);

// Columns are samples. Observations are normalized, actions in unit space, rewards shifted.
struct Batch {
    Eigen::MatrixXd obs;
    Eigen::MatrixXd action;
    Eigen::VectorXd reward;
    Eigen::MatrixXd next_obs;
    Eigen::VectorXd not_terminal;  // 0 only for accident terminals
    // Value bootstrapped after an accident terminal. Zero for raw rewards; with rewards
    // shifted down by c it is -c / (1 - gamma), the value of an absorbing state that keeps
    // paying the shifted zero reward, so the shift leaves the optimal policy unchanged.
    double terminal_value = 0.0;

    Eigen::Index size() const { return obs.cols(); }
};

// Stored rewards become (r - reward_shift) * reward_scale.
Batch make_batch(const Dataset& data, std::span<const std::size_t> rows, const Normalization& norm,
                 const ActionScale& scale, double reward_shift = 0.0, double reward_scale = 1.0);
// Value of the absorbing post-accident state for a given reward shift.
double terminal_value(double reward_shift, double gamma);
Eigen::MatrixXd normalize(std::span<const float> obs, const Normalization& norm);

nn::Mlp make_actor(int obs_dim, const std::vector<int>& hidden, Rng& rng);
nn::Mlp make_critic(int obs_dim, const std::vector<int>& hidden, Rng& rng);
Eigen::MatrixXd critic_input(const Eigen::MatrixXd& obs, const Eigen::MatrixXd& action);

// Loss gradients. Each returns the loss value and fills `grad` with its parameter gradient.
// TD: mean (Q(o,a) - y)^2 with y = r + gamma * Q'(o', pi'(o')) held fixed, where Q' is
// replaced by batch.terminal_value on accident terminals.
double td_loss_gradient(const nn::Mlp& critic, const nn::Mlp& critic_target, const nn::Mlp& target_actor,
                        const Batch& batch, double gamma, Eigen::VectorXd& grad);
// Actor: -mean Q(o, pi(o)).
double ddpg_actor_gradient(const nn::Mlp& actor, const nn::Mlp& critic, const Batch& batch, Eigen::VectorXd& grad);
// Actor: mean squared error to the stored unit-space action.
double bc_gradient(const nn::Mlp& actor, const Batch& batch, Eigen::VectorXd& grad);
// Actor: -(lambda / mean|Q|) mean Q(o, pi(o)) + bc_weight * MSE, with mean|Q| held fixed.
double imitative_actor_gradient(const nn::Mlp& actor, const nn::Mlp& critic, const Batch& batch, double lambda,
                                double bc_weight, Eigen::VectorXd& grad);

// One optimizer step each. td_step also moves critic_target toward critic by tau.
double td_step(nn::Mlp& critic, nn::Mlp& critic_target, const nn::Mlp& target_actor, nn::Adam& opt,
               const Batch& batch, double gamma, double tau);
double bc_step(nn::Mlp& actor, nn::Adam& opt, const Batch& batch);

struct ActorCritic {
    nn::Mlp actor, actor_target, critic, critic_target;
    nn::Adam actor_opt, critic_opt;
};
ActorCritic make_actor_critic(int obs_dim, const TrainConfig& config, Rng& rng);

struct StepStats {
    double critic_loss = 0.0;
    double actor_loss = 0.0;
    double bc_loss = 0.0;
};

StepStats ddpg_step(ActorCritic& ac, const Batch& batch, const TrainConfig& config);
StepStats imitative_step(ActorCritic& ac, const Batch& batch, const TrainConfig& config);

// Offline algorithms share this interface; only bc and imitative are implemented.
class OfflineAlgorithm {
public:
    virtual ~OfflineAlgorithm() = default;
    virtual std::string name() const = 0;
    virtual void init(int obs_dim, const TrainConfig& config, Rng& rng) = 0;
    virtual StepStats train_step(const Batch& batch) = 0;
    // Unit-space actions for normalized observations.
    Eigen::MatrixXd act(const Eigen::MatrixXd& obs) const { return actor().forward(obs); }
    virtual const nn::Mlp& actor() const = 0;
    virtual const nn::Mlp* critic() const { return nullptr; }
};

inline constexpr std::array<const char*, 2> kImplementedAlgorithms{"bc", "imitative"};
inline constexpr std::array<const char*, 5> kPlannedAlgorithms{"bcq", "cql", "iql", "edac", "plas"};

// Throws ConfigError for unknown names and for the planned-but-unimplemented ones.
std::unique_ptr<OfflineAlgorithm> make_algorithm(const std::string& name);

}  // namespace offdrive::rl

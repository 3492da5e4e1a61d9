#pragma once

#include <array>
#include <memory>
#include <span>
#include <string>

#include "offdrive/checkpoint.hpp"
#include "offdrive/config.hpp"
#include "offdrive/rng.hpp"
#include "offdrive/types.hpp"

namespace offdrive {

struct PolicyContext {
    std::span<const float> obs;
    const WorldState& world;
    int agent_id;
};

// Returns the raw continuous (accel, lane signal) pair; the environment quantizes it.
class Policy {
public:
    virtual ~Policy() = default;
    virtual std::array<double, 2> act(const PolicyContext& context) = 0;
    virtual std::string label() const = 0;
    virtual int obs_dim() const { return -1; }  // -1: accepts any dimension
};

class ActorPolicy final : public Policy {
public:
    // `noise` is the stddev of Gaussian noise added in the actor's unit action space.
    ActorPolicy(nn::Mlp actor, Normalization norm, rl::ActionScale scale, std::string label, double noise = 0.0,
                std::uint64_t seed = 0);
    explicit ActorPolicy(const Checkpoint& checkpoint, double noise = 0.0, std::uint64_t seed = 0);

    std::array<double, 2> act(const PolicyContext& context) override;
    std::string label() const override { return label_; }
    int obs_dim() const override { return actor_.input_dim(); }

private:
    nn::Mlp actor_;
    Normalization norm_;
    rl::ActionScale scale_;
    std::string label_;
    double noise_;
    Rng rng_;
};

// The background controller (IDM plus the lane-change rule) driving the agent.
class IdmPolicy final : public Policy {
public:
    explicit IdmPolicy(DynamicsParams params) : params_(params) {}
    std::array<double, 2> act(const PolicyContext& context) override;
    std::string label() const override { return "idm"; }

private:
    DynamicsParams params_;
};

}  // namespace offdrive

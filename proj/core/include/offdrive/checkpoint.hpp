#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "offdrive/config.hpp"
#include "offdrive/dataset.hpp"
#include "offdrive/mlp.hpp"
#include "offdrive/rl.hpp"

namespace offdrive {

struct Checkpoint {
    std::string label;      // random, medium, final, or the offline algorithm name
    std::string algorithm;  // ddpg, bc, imitative
    std::string scenario;
    nn::Mlp actor;
    std::optional<nn::Mlp> critic;
    Normalization normalization;  // applied to raw observations before the actor
    rl::ActionScale action_scale;
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    std::int64_t step = 0;
    std::string rng_state;  // empty when not meaningful

    int obs_dim() const { return actor.input_dim(); }
};

std::uint64_t config_hash(const ExperimentConfig& config);

// Layout: 8-byte magic "OD4RLCKP", u32 version, u64 header length, JSON header,
// then the parameters of every network as little-endian f64. The header carries
// the layer sizes, activations and an FNV-1a checksum of the parameter block.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
// Throws DataError on a bad magic, version, checksum or truncated file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace offdrive

#pragma once

#include <cstdint>
#include <string>

#include "offdrive/config.hpp"
#include "offdrive/dataset.hpp"
#include "offdrive/policy.hpp"

namespace offdrive {

struct GenerateOptions {
    std::uint64_t count = 1000000;
    std::uint64_t seed = 0;
    std::string flavor;
    std::string source_policy;  // defaults to the policy label
    // Every n-th stored reward is recomputed from the pre/post worlds and compared (0: off).
    std::uint64_t reward_check_every = 97;
};

// Rolls seeded episodes (episode k resets with a key derived from (seed, k)) until exactly
// `count` transitions are collected. Stored actions are the hybrid actions actually applied.
// The metadata records the mean undiscounted return of completed episodes as behavior_return.
LoadedDataset generate_synthetic(const ExperimentConfig& config, Policy& policy, const GenerateOptions& options);

}  // namespace offdrive

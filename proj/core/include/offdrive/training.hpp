#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "offdrive/checkpoint.hpp"
#include "offdrive/config.hpp"
#include "offdrive/dataset.hpp"
#include "offdrive/evaluation.hpp"

namespace offdrive {

struct LogRow {
    std::int64_t step = 0;
    double critic_loss = 0.0;  // averaged since the previous row
    double actor_loss = 0.0;
    double bc_loss = 0.0;
    std::optional<double> eval_return;
};

std::string log_csv(const std::vector<LogRow>& rows);

struct OnlineOptions {
    std::int64_t steps = 100000;  // environment steps, one gradient step each once warmed up
    EvalProtocol reference_protocol;
    int log_interval = 1000;
    int threads = 0;  // reference evaluation workers
};

struct OnlineResult {
    Checkpoint random;  // the initial actor
    Checkpoint medium;  // first candidate reaching half of the best quick-eval improvement
    Checkpoint final;   // best reference score among the top quick-eval candidates
    References references;
    std::vector<LogRow> log;
    std::vector<std::pair<std::int64_t, double>> quick_scores;  // (step, quick-eval return) per candidate
};

// Online DDPG behaviour-policy training. Candidates are the initial actor and a snapshot
// every eval_interval steps, each scored on eval_episodes quick episodes.
OnlineResult train_online(const ExperimentConfig& config, const OnlineOptions& options);

struct OfflineOptions {
    std::string algorithm = "bc";
    std::int64_t steps = 100000;
    std::uint64_t seed = 0;
    int log_interval = 1000;
};

struct OfflineResult {
    Checkpoint checkpoint;
    std::vector<LogRow> log;
};

// Trains on a fixed dataset; observations are normalized with the dataset's statistics.
OfflineResult train_offline(const ExperimentConfig& config, const LoadedDataset& dataset, const OfflineOptions& options);

}  // namespace offdrive

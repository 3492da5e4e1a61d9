#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "offdrive/config.hpp"
#include "offdrive/policy.hpp"
#include "offdrive/stats.hpp"

namespace offdrive {

// Undiscounted return of each of `episodes` noise-free episodes (mean over agents when
// several are present). Episode e resets the environment with a key derived from (seed, e).
std::vector<double> evaluate_policy(const ExperimentConfig& config, Policy& policy, int episodes, std::uint64_t seed);

struct EvalProtocol {
    int seeds = 5;
    int episodes = 10;
    std::uint64_t base_seed = 0;  // seeds are base_seed .. base_seed + seeds - 1

    bool operator==(const EvalProtocol&) const = default;
};

struct PolicyScores {
    std::vector<std::uint64_t> seeds;
    std::vector<std::vector<double>> returns;  // [seed][episode]

    std::vector<double> seed_means() const;
    double mean() const;       // mean of the per-seed means
    double two_sigma() const;  // twice the sample stddev of the per-seed means
};

using PolicyFactory = std::function<std::unique_ptr<Policy>()>;

// One policy instance per seed; seeds run on up to `threads` workers (0: hardware concurrency).
// Results do not depend on the thread count.
PolicyScores evaluate_protocol(const ExperimentConfig& config, const PolicyFactory& make_policy,
                               const EvalProtocol& protocol, int threads = 0);

// (score - random) / (final - random); DataError when final and random coincide.
double normalized_score(double score, double score_random, double score_final);

// Scores of the online reference policies, produced by train-online.
struct References {
    std::string scenario;
    EvalProtocol protocol;
    double random = 0.0;
    double medium = 0.0;
    double final = 0.0;
    std::uint64_t config_hash = 0;
};

void save_references(const std::filesystem::path& path, const References& refs);
References load_references(const std::filesystem::path& path);

struct EvalReport {
    std::string scenario;
    std::string flavor;     // dataset flavor, or "online" for the reference policies
    std::string algorithm;  // bc, imitative, ddpg, idm
    std::string label;      // checkpoint label
    std::uint64_t train_seed = 0;
    EvalProtocol protocol;
    References references;
    PolicyScores scores;

    std::vector<double> normalized_seed_means() const;
    double normalized_mean() const;
    double normalized_two_sigma() const;
    Quartiles normalized_iqr() const;  // over all per-episode normalized returns
};

std::string to_json(const EvalReport& report);
EvalReport parse_eval_report(const std::string& json_text);
EvalReport load_eval_report(const std::filesystem::path& path);

struct ReportTables {
    std::string scores_csv;   // scenario,flavor,algorithm,seed,episode,return
    std::string summary_csv;  // per (scenario, flavor, algorithm) cell
    std::string table_csv;    // rows scenario/flavor, one column per algorithm
};

// Pure function of the report contents; input order does not matter.
ReportTables aggregate_reports(std::vector<EvalReport> reports);

}  // namespace offdrive

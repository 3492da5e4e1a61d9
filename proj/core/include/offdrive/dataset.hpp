#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace offdrive {

// Stored in the trailing byte of each record.
enum class DoneFlag : std::uint8_t {
    None = 0,
    Terminal = 1,   // accident; bootstrapping is masked
    Truncated = 2,  // horizon or end of a recorded segment; still bootstraps
};

struct Transition {
    std::vector<float> obs;
    std::array<float, 2> action{};  // accel, lane change in {-1, 0, 1}
    float reward = 0.0f;
    std::vector<float> next_obs;
    DoneFlag done = DoneFlag::None;
};

struct Normalization {
    std::vector<double> mean;
    std::vector<double> scale;

    bool empty() const { return mean.empty(); }
    static Normalization identity(int dim);
};

inline constexpr std::array<const char*, 7> kFlavors{"final",        "medium",       "random",   "final-medium",
                                                     "final-random", "human-like",   "ngsim"};
bool is_known_flavor(const std::string& flavor);

struct DatasetMeta {
    std::string scenario;
    std::string flavor;
    int obs_dim = 0;
    std::uint64_t transition_count = 0;
    std::uint64_t seed = 0;
    Normalization normalization;
    std::string source_policy;
    std::optional<double> behavior_return;  // mean undiscounted episode return of the generating policy
    std::uint64_t episodes = 0;
};

// Columnar transition store; rows share one observation dimension.
class Dataset {
public:
    explicit Dataset(int obs_dim = 0) : obs_dim_(obs_dim) {}

    int obs_dim() const { return obs_dim_; }
    std::size_t size() const { return rewards_.size(); }
    bool empty() const { return rewards_.empty(); }

    void reserve(std::size_t n);
    void push(const Transition& t);
    void push(std::span<const float> obs, std::array<float, 2> action, float reward, std::span<const float> next_obs,
              DoneFlag done);
    // Overwrites row i in place (ring-buffer use).
    void assign(std::size_t i, std::span<const float> obs, std::array<float, 2> action, float reward,
                std::span<const float> next_obs, DoneFlag done);
    Transition at(std::size_t i) const;

    std::span<const float> obs(std::size_t i) const;
    std::span<const float> next_obs(std::size_t i) const;
    std::array<float, 2> action(std::size_t i) const { return {actions_[2 * i], actions_[2 * i + 1]}; }
    float reward(std::size_t i) const { return rewards_[i]; }
    DoneFlag done(std::size_t i) const { return static_cast<DoneFlag>(done_[i]); }
    bool terminal(std::size_t i) const { return done(i) == DoneFlag::Terminal; }

    bool operator==(const Dataset& other) const = default;

private:
    int obs_dim_;
    std::vector<float> obs_;
    std::vector<float> next_obs_;
    std::vector<float> actions_;
    std::vector<float> rewards_;
    std::vector<std::uint8_t> done_;
};

// Bytes per record: obs || action || reward || next_obs as little-endian f32, then the done byte.
constexpr std::size_t record_size(int obs_dim) { return static_cast<std::size_t>(2 * obs_dim + 3) * 4 + 1; }

struct DatasetPaths {
    std::filesystem::path payload;  // <name>.ad4rl
    std::filesystem::path meta;     // <name>.meta.json
};
// Accepts the bare name, the payload path or the meta path.
DatasetPaths dataset_paths(const std::filesystem::path& any);

// Sets meta.transition_count and meta.obs_dim from the data before writing.
void write_dataset(const std::filesystem::path& name, const Dataset& data, DatasetMeta meta);
struct LoadedDataset {
    DatasetMeta meta;
    Dataset data;
};
LoadedDataset read_dataset(const std::filesystem::path& name);
DatasetMeta read_dataset_meta(const std::filesystem::path& name);

Normalization compute_normalization(const Dataset& data);

// Equal-proportion blend: floor(min(|a|, |b|) / 2) rows sampled from each, then shuffled.
LoadedDataset mix_datasets(const LoadedDataset& a, const LoadedDataset& b, std::uint64_t seed);

void export_csv(const std::filesystem::path& path, const Dataset& data);

}  // namespace offdrive

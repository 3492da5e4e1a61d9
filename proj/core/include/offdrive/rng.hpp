#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace offdrive {

// Deterministic random stream keyed by (seed, label). Identical keys give
// identical streams; different labels give decorrelated streams.
class Rng {
public:
    Rng(std::uint64_t seed, std::string_view stream_label);

    std::uint64_t next() { return engine_(); }
    double uniform(double lo = 0.0, double hi = 1.0);
    double normal(double mean = 0.0, double stddev = 1.0);
    // Uniform integer in [0, n).
    std::size_t index(std::size_t n);

    std::mt19937_64& engine() { return engine_; }

    std::string save_state() const;
    void load_state(const std::string& state);

    static std::uint64_t derive_key(std::uint64_t seed, std::string_view label);

private:
    std::mt19937_64 engine_;
};

// 64-bit FNV-1a, used for config hashes and payload checksums.
std::uint64_t fnv1a64(std::string_view bytes);

inline Rng seeded_rng(std::uint64_t seed, std::string_view stream_label) {
    return Rng(seed, stream_label);
}

}  // namespace offdrive

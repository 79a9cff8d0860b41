#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace sparsesbc {

// A seeded random stream with a serializable state. Uniform and Gaussian
// draws are computed here rather than through <random> distributions so that
// the sequence is fully determined by the engine state (no hidden caches).
class RngStream {
public:
    explicit RngStream(std::uint64_t seed = 0) : engine_(seed) {}

    // Derives an independent stream from a master seed and a stream name.
    static RngStream named(std::uint64_t master_seed, std::string_view name);

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller; consumes exactly two engine outputs.
    double normal();

    std::string save_state() const;
    void restore_state(const std::string& state);

    bool operator==(const RngStream& other) const { return engine_ == other.engine_; }

private:
    std::mt19937_64 engine_;
};

// splitmix64 finalizer; used to turn (seed, name) pairs into stream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::string_view name);

} // namespace sparsesbc

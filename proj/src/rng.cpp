#include "sparsesbc/rng.hpp"

#include "sparsesbc/error.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace sparsesbc {

std::uint64_t mix_seed(std::uint64_t seed, std::string_view name)
{
    std::uint64_t h = seed ^ 0x9E3779B97F4A7C15ULL;
    for (unsigned char c : name) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    h += 0x9E3779B97F4A7C15ULL;
    h = (h ^ (h >> 30)) * 0xBF58476D1CE4E5B9ULL;
    h = (h ^ (h >> 27)) * 0x94D049BB133111EBULL;
    return h ^ (h >> 31);
}

RngStream RngStream::named(std::uint64_t master_seed, std::string_view name)
{
    return RngStream(mix_seed(master_seed, name));
}

double RngStream::normal()
{
    // 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string RngStream::save_state() const
{
    std::ostringstream out;
    out << engine_;
    return out.str();
}

void RngStream::restore_state(const std::string& state)
{
    std::istringstream in(state);
    in >> engine_;
    if (in.fail()) {
        throw CheckpointError("corrupt RNG state");
    }
}

} // namespace sparsesbc

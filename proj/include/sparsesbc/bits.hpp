#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace sparsesbc {

// N-length binary payload; every element is 0 or 1.
class BitVector {
public:
    BitVector() = default;
    explicit BitVector(std::size_t n) : bits_(n, 0) {}
    // Throws ContractError if any element is not 0/1.
    explicit BitVector(std::vector<std::uint8_t> bits);

    std::size_t size() const { return bits_.size(); }
    std::uint8_t operator[](std::size_t i) const { return bits_[i]; }
    void set(std::size_t i, bool value) { bits_[i] = value ? 1 : 0; }

    std::size_t popcount() const;
    std::span<const std::uint8_t> bits() const { return bits_; }

    bool operator==(const BitVector&) const = default;

private:
    std::vector<std::uint8_t> bits_;
};

// Channel output y = h x + n.
struct ReceivedVector {
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
};

} // namespace sparsesbc

#pragma once

#include "sparsesbc/transceiver.hpp"

#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

namespace sparsesbc {

// File layout (all integers little-endian):
//   magic "SSBCCKPT" | u32 version | u64 meta length | meta JSON text
//   u32 array count | per array: u32 name length, name bytes, u32 rows,
//   u32 cols, rows*cols float32 values in column-major order.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
    ArchConfig arch;
    int epoch = 0;
    // RNG stream states, optimizer settings, resolved config, ...
    nlohmann::json extra = nlohmann::json::object();
};

struct Checkpoint {
    EncoderParams<float> encoder;
    DecoderParams<float> decoder;
    CheckpointMeta meta;
    // Arrays beyond phi/theta (optimizer moments), keyed by name.
    std::map<std::string, nn::Matrix<float>> aux;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

// Validates the container and that every phi/theta array matches the stored arch.
Checkpoint load_checkpoint(const std::filesystem::path& path);
// Additionally requires the stored arch to equal `expected`.
Checkpoint load_checkpoint(const std::filesystem::path& path, const ArchConfig& expected);

} // namespace sparsesbc

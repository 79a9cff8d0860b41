#pragma once

#include "sparsesbc/imaging.hpp"
#include "sparsesbc/rng.hpp"
#include "sparsesbc/transceiver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <unistd.h>

namespace testing {

// Unique scratch directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag)
    {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("sparsesbc_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline sparsesbc::Image random_image(sparsesbc::ImageShape shape, sparsesbc::RngStream& rng)
{
    sparsesbc::Image img(shape);
    for (auto& p : img.pixels()) {
        p = static_cast<std::uint8_t>(rng.next_u64() % 256);
    }
    return img;
}

inline sparsesbc::NormalizedImage random_normalized(sparsesbc::ImageShape shape, sparsesbc::RngStream& rng)
{
    std::vector<double> v(shape.size());
    for (auto& x : v) {
        x = rng.uniform();
    }
    return sparsesbc::NormalizedImage(shape, std::move(v));
}

// Smooth images (gradient plus a disc) that a small autoencoder can learn.
inline sparsesbc::Image smooth_image(sparsesbc::ImageShape shape, sparsesbc::RngStream& rng)
{
    sparsesbc::Image img(shape);
    const double cx = 0.2 + 0.6 * rng.uniform();
    const double cy = 0.2 + 0.6 * rng.uniform();
    const double r = 0.1 + 0.2 * rng.uniform();
    for (int c = 0; c < shape.channels; ++c) {
        const double a = 2.0 * rng.uniform() - 1.0;
        const double b = 2.0 * rng.uniform() - 1.0;
        const double disc = 0.6 * rng.uniform() - 0.3;
        for (int y = 0; y < shape.height; ++y) {
            for (int x = 0; x < shape.width; ++x) {
                const double fx = shape.width > 1 ? static_cast<double>(x) / (shape.width - 1) : 0.0;
                const double fy = shape.height > 1 ? static_cast<double>(y) / (shape.height - 1) : 0.0;
                double v = 0.5 + 0.25 * (a * fx + b * fy);
                if ((fx - cx) * (fx - cx) + (fy - cy) * (fy - cy) < r * r) {
                    v += disc;
                }
                img.at(c, y, x) = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
            }
        }
    }
    return img;
}

// Writes `count` smooth 32x32x3 records in CIFAR-10 binary layout.
inline void write_synthetic_cifar(const std::filesystem::path& file, std::size_t count, std::uint64_t seed)
{
    sparsesbc::RngStream rng(seed);
    std::ofstream out(file, std::ios::binary);
    for (std::size_t i = 0; i < count; ++i) {
        const auto rec = sparsesbc::to_cifar_record(smooth_image(sparsesbc::kCifarShape, rng),
                                                    static_cast<std::uint8_t>(i % 10));
        out.write(reinterpret_cast<const char*>(rec.data()), static_cast<std::streamsize>(rec.size()));
    }
}

// 4x4 single-channel toy: 4 -> 2 -> 1 spatially, so M = last conv width.
inline sparsesbc::ArchConfig toy_arch(int bits = 6)
{
    sparsesbc::ArchConfig arch;
    arch.image = {4, 4, 1};
    arch.conv_channels = {2, 3};
    arch.embedding_dim = 3;
    arch.bit_length = bits;
    return arch;
}

// 8x8 RGB: 8 -> 4 -> 2, M = 2*2*4.
inline sparsesbc::ArchConfig small_arch(int bits = 64)
{
    sparsesbc::ArchConfig arch;
    arch.image = {8, 8, 3};
    arch.conv_channels = {4, 4};
    arch.embedding_dim = 16;
    arch.bit_length = bits;
    return arch;
}

inline std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace testing

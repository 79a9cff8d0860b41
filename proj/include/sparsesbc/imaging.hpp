#pragma once

#include "sparsesbc/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace sparsesbc {

struct ImageShape {
    int height = 0;
    int width = 0;
    int channels = 0;

    std::size_t size() const
    {
        return static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
               static_cast<std::size_t>(channels);
    }
    bool operator==(const ImageShape&) const = default;
};

std::string to_string(const ImageShape& shape);

// 8-bit image, channel-major (planar) layout: index = (c * height + y) * width + x.
class Image {
public:
    Image() = default;
    explicit Image(ImageShape shape, std::uint8_t fill = 0);
    Image(ImageShape shape, std::vector<std::uint8_t> pixels);

    const ImageShape& shape() const { return shape_; }
    int height() const { return shape_.height; }
    int width() const { return shape_.width; }
    int channels() const { return shape_.channels; }

    std::uint8_t& at(int c, int y, int x) { return pixels_[index(c, y, x)]; }
    std::uint8_t at(int c, int y, int x) const { return pixels_[index(c, y, x)]; }

    std::span<const std::uint8_t> pixels() const { return pixels_; }
    std::span<std::uint8_t> pixels() { return pixels_; }

    bool operator==(const Image&) const = default;

private:
    std::size_t index(int c, int y, int x) const
    {
        return (static_cast<std::size_t>(c) * shape_.height + y) * shape_.width + x;
    }

    ImageShape shape_{};
    std::vector<std::uint8_t> pixels_;
};

// Same layout as Image with real values in [0, 1].
class NormalizedImage {
public:
    NormalizedImage() = default;
    explicit NormalizedImage(ImageShape shape, double fill = 0.0);
    // Values outside [0, 1] are rejected; use clamped() for decoder outputs.
    NormalizedImage(ImageShape shape, std::vector<double> values);
    static NormalizedImage clamped(ImageShape shape, std::vector<double> values);

    const ImageShape& shape() const { return shape_; }
    std::size_t size() const { return values_.size(); }

    double& at(int c, int y, int x) { return values_[index(c, y, x)]; }
    double at(int c, int y, int x) const { return values_[index(c, y, x)]; }
    double operator[](std::size_t i) const { return values_[i]; }

    std::span<const double> values() const { return values_; }

    bool operator==(const NormalizedImage&) const = default;

private:
    std::size_t index(int c, int y, int x) const
    {
        return (static_cast<std::size_t>(c) * shape_.height + y) * shape_.width + x;
    }

    ImageShape shape_{};
    std::vector<double> values_;
};

void validate_shape(const ImageShape& shape);

NormalizedImage normalize(const Image& img);
// round(clamp(v, 0, 1) * 255) per value.
Image denormalize(const NormalizedImage& img);

struct Dataset {
    std::string name;
    std::string split;
    ImageShape shape{};
    std::vector<Image> images;
    std::vector<std::uint8_t> labels;

    std::size_t size() const { return images.size(); }
    void add(Image img, std::uint8_t label);
    // Keeps the first `count` records (no-op when count >= size()).
    void truncate(std::size_t count);
};

inline constexpr std::size_t kCifarRecordBytes = 3073;
inline constexpr ImageShape kCifarShape{32, 32, 3};

// Reads CIFAR-10 binary batches. `path` may be a single .bin file or a
// directory holding data_batch_{1..5}.bin and test_batch.bin (optionally
// inside a cifar-10-batches-bin/ subdirectory).
Dataset load_cifar10(const std::filesystem::path& path, const std::string& split);
Dataset load_cifar10_file(const std::filesystem::path& file, const std::string& split);

// Serializes one image + label as a CIFAR-10 binary record.
std::vector<std::uint8_t> to_cifar_record(const Image& img, std::uint8_t label);

// Fisher-Yates permutation of [0, n) driven by `rng`.
std::vector<std::size_t> shuffled_order(std::size_t n, RngStream& rng);

// Binary PPM (P6, 3 channels) or PGM (P5, 1 channel), maxval 255.
Image read_image(const std::filesystem::path& path);
void write_image(const Image& img, const std::filesystem::path& path);
Image decode_pnm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_pnm(const Image& img);

} // namespace sparsesbc

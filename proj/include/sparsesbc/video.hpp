#pragma once

#include "sparsesbc/bits.hpp"
#include "sparsesbc/channel.hpp"
#include "sparsesbc/imaging.hpp"
#include "sparsesbc/rng.hpp"
#include "sparsesbc/transceiver.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sparsesbc {

inline constexpr int kDefaultGop = 12;

// Signed keeps the difference sign: (f - base + 1) / 2, invertible.
// Absolute stores |f - base| and loses the sign.
enum class DiffMode { Signed, Absolute };
enum class FrameKind { Base, Diff };

std::string to_string(DiffMode mode);
DiffMode diff_mode_from_string(const std::string& name);

struct FrameSequence {
    std::vector<Image> frames;
    double frame_rate = 0.0; // informational

    std::size_t size() const { return frames.size(); }
};

struct TaggedFrame {
    FrameKind kind = FrameKind::Base;
    NormalizedImage image;
};

struct DiffStream {
    std::vector<TaggedFrame> frames;
    int gop = kDefaultGop;
    DiffMode mode = DiffMode::Signed;
};

// Frame t (0-based) is a Base when t % gop == 0; every other frame is
// differenced against the latest Base.
DiffStream temporal_difference(const FrameSequence& frames, int gop = kDefaultGop,
                               DiffMode mode = DiffMode::Signed);

// Inverts temporal_difference. `mode` must match the stream's mode.
FrameSequence reconstruct_sequence(const DiffStream& stream, DiffMode mode);

// One image through a transmitter/channel/receiver chain.
class FrameCodec {
public:
    virtual ~FrameCodec() = default;
    // `bits` receives the transmitted payload when the codec has one.
    virtual NormalizedImage roundtrip(const NormalizedImage& img, std::optional<BitVector>* bits) = 0;
};

// Noiseless identity transceiver.
class IdentityCodec final : public FrameCodec {
public:
    NormalizedImage roundtrip(const NormalizedImage& img, std::optional<BitVector>* bits) override
    {
        if (bits != nullptr) {
            bits->reset();
        }
        return img;
    }
};

class ModelCodec final : public FrameCodec {
public:
    ModelCodec(const EncoderParams<float>& phi, const DecoderParams<float>& theta, const ArchConfig& arch,
               ChannelConfig channel, RngStream rng)
        : phi_(phi), theta_(theta), arch_(arch), channel_(channel), rng_(std::move(rng))
    {
    }
    NormalizedImage roundtrip(const NormalizedImage& img, std::optional<BitVector>* bits) override;

private:
    const EncoderParams<float>& phi_;
    const DecoderParams<float>& theta_;
    const ArchConfig& arch_;
    ChannelConfig channel_;
    RngStream rng_;
};

// Sends every tagged frame through `codec`; tags, GOP and mode are preserved.
DiffStream transmit_stream(const DiffStream& stream, FrameCodec& codec,
                           std::vector<std::optional<BitVector>>* payloads = nullptr);

// Bases and Diffs as one training set (labels: 0 = Base, 1 = Diff).
Dataset stream_dataset(const DiffStream& stream);

// Reads frame_%06d.{ppm,pgm} files in index order. Mixed shapes -> ContractError.
FrameSequence read_frame_directory(const std::filesystem::path& dir);
void write_frame(const Image& img, const std::filesystem::path& dir, const std::string& prefix, std::size_t index);

} // namespace sparsesbc

#include "sparsesbc/video.hpp"

#include "sparsesbc/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <regex>

namespace sparsesbc {

std::string to_string(DiffMode mode)
{
    return mode == DiffMode::Signed ? "signed" : "absolute";
}

DiffMode diff_mode_from_string(const std::string& name)
{
    if (name == "signed") {
        return DiffMode::Signed;
    }
    if (name == "absolute") {
        return DiffMode::Absolute;
    }
    throw ConfigError("unknown differencing mode '" + name + "' (expected signed or absolute)");
}

DiffStream temporal_difference(const FrameSequence& frames, int gop, DiffMode mode)
{
    if (frames.frames.empty()) {
        throw ContractError("cannot difference an empty frame sequence");
    }
    if (gop < 2) {
        throw ContractError("GOP length must be at least 2");
    }
    const ImageShape shape = frames.frames.front().shape();
    DiffStream stream;
    stream.gop = gop;
    stream.mode = mode;

    NormalizedImage base;
    for (std::size_t t = 0; t < frames.size(); ++t) {
        if (frames.frames[t].shape() != shape) {
            throw ContractError("frame " + std::to_string(t) + " has shape " +
                                to_string(frames.frames[t].shape()) + ", expected " + to_string(shape));
        }
        NormalizedImage current = normalize(frames.frames[t]);
        if (t % static_cast<std::size_t>(gop) == 0) {
            base = current;
            stream.frames.push_back({FrameKind::Base, std::move(current)});
            continue;
        }
        std::vector<double> diff(current.size());
        for (std::size_t i = 0; i < diff.size(); ++i) {
            const double d = current[i] - base[i];
            diff[i] = mode == DiffMode::Signed ? (d + 1.0) / 2.0 : std::abs(d);
        }
        stream.frames.push_back({FrameKind::Diff, NormalizedImage::clamped(shape, std::move(diff))});
    }
    return stream;
}

FrameSequence reconstruct_sequence(const DiffStream& stream, DiffMode mode)
{
    if (mode != stream.mode) {
        throw ContractError("stream was differenced in " + to_string(stream.mode) +
                            " mode, cannot reconstruct in " + to_string(mode) + " mode");
    }
    if (stream.frames.empty() || stream.frames.front().kind != FrameKind::Base) {
        throw ContractError("a diff stream must start with a Base frame");
    }
    FrameSequence out;
    const NormalizedImage* base = nullptr;
    for (const auto& tagged : stream.frames) {
        if (tagged.kind == FrameKind::Base) {
            base = &tagged.image;
            out.frames.push_back(denormalize(tagged.image));
            continue;
        }
        if (tagged.image.shape() != base->shape()) {
            throw ContractError("diff frame shape differs from its base");
        }
        std::vector<double> frame(tagged.image.size());
        for (std::size_t i = 0; i < frame.size(); ++i) {
            const double d = tagged.image[i];
            frame[i] = mode == DiffMode::Signed ? (*base)[i] + 2.0 * d - 1.0 : (*base)[i] + d;
        }
        out.frames.push_back(denormalize(NormalizedImage::clamped(base->shape(), std::move(frame))));
    }
    return out;
}

NormalizedImage ModelCodec::roundtrip(const NormalizedImage& img, std::optional<BitVector>* bits)
{
    BitVector payload = transmit_bits(img, phi_, arch_);
    const ReceivedVector y = transmit(payload, channel_, rng_);
    NormalizedImage out = reconstruct(y, theta_, arch_);
    if (bits != nullptr) {
        *bits = std::move(payload);
    }
    return out;
}

DiffStream transmit_stream(const DiffStream& stream, FrameCodec& codec,
                           std::vector<std::optional<BitVector>>* payloads)
{
    DiffStream out;
    out.gop = stream.gop;
    out.mode = stream.mode;
    if (payloads != nullptr) {
        payloads->clear();
    }
    for (const auto& tagged : stream.frames) {
        std::optional<BitVector> bits;
        out.frames.push_back({tagged.kind, codec.roundtrip(tagged.image, &bits)});
        if (payloads != nullptr) {
            payloads->push_back(std::move(bits));
        }
    }
    return out;
}

Dataset stream_dataset(const DiffStream& stream)
{
    Dataset ds;
    ds.name = "video";
    ds.split = "train";
    for (const auto& tagged : stream.frames) {
        ds.add(denormalize(tagged.image), tagged.kind == FrameKind::Base ? 0 : 1);
    }
    return ds;
}

FrameSequence read_frame_directory(const std::filesystem::path& dir)
{
    if (!std::filesystem::is_directory(dir)) {
        throw IngestionError("frame directory does not exist: " + dir.string());
    }
    static const std::regex pattern(R"(frame_(\d{6})\.(ppm|pgm))");
    std::map<long, std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        std::smatch match;
        const std::string name = entry.path().filename().string();
        if (entry.is_regular_file() && std::regex_match(name, match, pattern)) {
            files.emplace(std::stol(match[1].str()), entry.path());
        }
    }
    if (files.empty()) {
        throw IngestionError("no frame_%06d.ppm files in " + dir.string());
    }
    FrameSequence seq;
    for (const auto& [index, path] : files) {
        Image img = read_image(path);
        if (!seq.frames.empty() && img.shape() != seq.frames.front().shape()) {
            throw ContractError("frame " + path.filename().string() + " has shape " + to_string(img.shape()) +
                                ", expected " + to_string(seq.frames.front().shape()));
        }
        seq.frames.push_back(std::move(img));
    }
    return seq;
}

void write_frame(const Image& img, const std::filesystem::path& dir, const std::string& prefix, std::size_t index)
{
    char name[64];
    std::snprintf(name, sizeof name, "%s_%06zu.%s", prefix.c_str(), index, img.channels() == 3 ? "ppm" : "pgm");
    write_image(img, dir / name);
}

} // namespace sparsesbc

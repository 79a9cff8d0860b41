#include "sparsesbc/imaging.hpp"

#include "sparsesbc/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

namespace sparsesbc {

namespace fs = std::filesystem;

std::string to_string(const ImageShape& shape)
{
    std::ostringstream out;
    out << shape.height << "x" << shape.width << "x" << shape.channels;
    return out.str();
}

void validate_shape(const ImageShape& shape)
{
    if (shape.height <= 0 || shape.width <= 0 || (shape.channels != 1 && shape.channels != 3)) {
        throw ContractError("invalid image shape " + to_string(shape));
    }
}

Image::Image(ImageShape shape, std::uint8_t fill) : shape_(shape)
{
    validate_shape(shape);
    pixels_.assign(shape.size(), fill);
}

Image::Image(ImageShape shape, std::vector<std::uint8_t> pixels)
    : shape_(shape), pixels_(std::move(pixels))
{
    validate_shape(shape);
    if (pixels_.size() != shape.size()) {
        throw ContractError("pixel count does not match shape " + to_string(shape));
    }
}

NormalizedImage::NormalizedImage(ImageShape shape, double fill) : shape_(shape)
{
    validate_shape(shape);
    if (!(fill >= 0.0 && fill <= 1.0)) {
        throw ContractError("normalized fill value outside [0,1]");
    }
    values_.assign(shape.size(), fill);
}

NormalizedImage::NormalizedImage(ImageShape shape, std::vector<double> values)
    : shape_(shape), values_(std::move(values))
{
    validate_shape(shape);
    if (values_.size() != shape.size()) {
        throw ContractError("value count does not match shape " + to_string(shape));
    }
    for (double v : values_) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw ContractError("normalized image value outside [0,1]");
        }
    }
}

NormalizedImage NormalizedImage::clamped(ImageShape shape, std::vector<double> values)
{
    for (double& v : values) {
        // NaN maps to 0 as well.
        v = (v > 0.0) ? std::min(v, 1.0) : 0.0;
    }
    return NormalizedImage(shape, std::move(values));
}

NormalizedImage normalize(const Image& img)
{
    std::vector<double> values(img.pixels().size());
    std::transform(img.pixels().begin(), img.pixels().end(), values.begin(),
                   [](std::uint8_t p) { return static_cast<double>(p) / 255.0; });
    return NormalizedImage(img.shape(), std::move(values));
}

Image denormalize(const NormalizedImage& img)
{
    std::vector<std::uint8_t> pixels(img.size());
    std::transform(img.values().begin(), img.values().end(), pixels.begin(), [](double v) {
        return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    });
    return Image(img.shape(), std::move(pixels));
}

void Dataset::add(Image img, std::uint8_t label)
{
    if (images.empty() && shape.size() == 0) {
        shape = img.shape();
    }
    if (img.shape() != shape) {
        throw ContractError("dataset image shape " + to_string(img.shape()) + " differs from " +
                            to_string(shape));
    }
    images.push_back(std::move(img));
    labels.push_back(label);
}

void Dataset::truncate(std::size_t count)
{
    if (count < images.size()) {
        images.resize(count);
        labels.resize(count);
    }
}

namespace {

std::vector<std::uint8_t> read_bytes(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IngestionError("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void append_cifar_records(Dataset& ds, const fs::path& file)
{
    const auto bytes = read_bytes(file);
    if (bytes.empty() || bytes.size() % kCifarRecordBytes != 0) {
        throw FormatError(file.string() + ": size " + std::to_string(bytes.size()) +
                          " is not a positive multiple of the 3073-byte record length");
    }
    const std::size_t records = bytes.size() / kCifarRecordBytes;
    ds.images.reserve(ds.images.size() + records);
    ds.labels.reserve(ds.labels.size() + records);
    for (std::size_t r = 0; r < records; ++r) {
        const auto* rec = bytes.data() + r * kCifarRecordBytes;
        std::vector<std::uint8_t> pixels(rec + 1, rec + kCifarRecordBytes);
        ds.add(Image(kCifarShape, std::move(pixels)), rec[0]);
    }
}

} // namespace

Dataset load_cifar10_file(const fs::path& file, const std::string& split)
{
    Dataset ds;
    ds.name = "cifar10";
    ds.split = split;
    ds.shape = kCifarShape;
    append_cifar_records(ds, file);
    return ds;
}

Dataset load_cifar10(const fs::path& path, const std::string& split)
{
    if (split != "train" && split != "test") {
        throw ContractError("split must be 'train' or 'test', got '" + split + "'");
    }
    if (fs::is_regular_file(path)) {
        return load_cifar10_file(path, split);
    }
    if (!fs::is_directory(path)) {
        throw IngestionError("CIFAR-10 path does not exist: " + path.string());
    }
    fs::path dir = path;
    if (!fs::exists(dir / "test_batch.bin") && fs::is_directory(dir / "cifar-10-batches-bin")) {
        dir /= "cifar-10-batches-bin";
    }

    Dataset ds;
    ds.name = "cifar10";
    ds.split = split;
    ds.shape = kCifarShape;
    if (split == "train") {
        for (int i = 1; i <= 5; ++i) {
            append_cifar_records(ds, dir / ("data_batch_" + std::to_string(i) + ".bin"));
        }
    } else {
        append_cifar_records(ds, dir / "test_batch.bin");
    }
    return ds;
}

std::vector<std::uint8_t> to_cifar_record(const Image& img, std::uint8_t label)
{
    if (img.shape() != kCifarShape) {
        throw ContractError("CIFAR-10 records hold 32x32x3 images");
    }
    std::vector<std::uint8_t> rec;
    rec.reserve(kCifarRecordBytes);
    rec.push_back(label);
    rec.insert(rec.end(), img.pixels().begin(), img.pixels().end());
    return rec;
}

std::vector<std::size_t> shuffled_order(std::size_t n, RngStream& rng)
{
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) {
        order[i] = i;
    }
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.next_u64() % i);
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

// --- PNM ------------------------------------------------------------------

namespace {

class HeaderReader {
public:
    explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    void skip_space_and_comments()
    {
        while (pos_ < bytes_.size()) {
            if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') {
                    ++pos_;
                }
            } else {
                break;
            }
        }
    }

    int read_int()
    {
        skip_space_and_comments();
        if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) {
            throw FormatError("malformed PNM header");
        }
        long value = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            value = value * 10 + (bytes_[pos_] - '0');
            if (value > 1'000'000) {
                throw FormatError("PNM dimension out of range");
            }
            ++pos_;
        }
        return static_cast<int>(value);
    }

    // Exactly one whitespace byte separates the header from the raster.
    void expect_single_space()
    {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
            throw FormatError("malformed PNM header");
        }
        ++pos_;
    }

    std::size_t pos() const { return pos_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 2;
};

} // namespace

Image decode_pnm(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '6' && bytes[1] != '5')) {
        throw FormatError("not a binary PPM/PGM file (expected P6 or P5)");
    }
    const int channels = bytes[1] == '6' ? 3 : 1;
    HeaderReader header(bytes);
    const int width = header.read_int();
    const int height = header.read_int();
    const int maxval = header.read_int();
    header.expect_single_space();
    if (width <= 0 || height <= 0) {
        throw FormatError("PNM dimensions must be positive");
    }
    if (maxval != 255) {
        throw FormatError("only 8-bit PNM (maxval 255) is supported");
    }
    const ImageShape shape{height, width, channels};
    if (bytes.size() - header.pos() < shape.size()) {
        throw FormatError("truncated PNM raster");
    }
    Image img(shape);
    const auto* raster = bytes.data() + header.pos();
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            for (int c = 0; c < channels; ++c) {
                img.at(c, y, x) = raster[(static_cast<std::size_t>(y) * width + x) * channels + c];
            }
        }
    }
    return img;
}

std::vector<std::uint8_t> encode_pnm(const Image& img)
{
    const std::string header = std::string(img.channels() == 3 ? "P6" : "P5") + "\n" +
                               std::to_string(img.width()) + " " + std::to_string(img.height()) +
                               "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(header.size() + img.shape().size());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            for (int c = 0; c < img.channels(); ++c) {
                out.push_back(img.at(c, y, x));
            }
        }
    }
    return out;
}

Image read_image(const fs::path& path)
{
    const auto bytes = read_bytes(path);
    return decode_pnm(bytes);
}

void write_image(const Image& img, const fs::path& path)
{
    const auto bytes = encode_pnm(img);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IngestionError("cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

} // namespace sparsesbc

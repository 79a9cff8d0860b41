#include "sparsesbc/checkpoint.hpp"

#include "sparsesbc/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace sparsesbc {

namespace {

constexpr char kMagic[8] = {'S', 'S', 'B', 'C', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

class Writer {
public:
    void bytes(const void* data, std::size_t n)
    {
        const auto* p = static_cast<const std::uint8_t*>(data);
        buf_.insert(buf_.end(), p, p + n);
    }
    template <typename T>
    void scalar(T v)
    {
        bytes(&v, sizeof v);
    }
    void string(const std::string& s)
    {
        scalar<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    const std::vector<std::uint8_t>& buffer() const { return buf_; }

private:
    std::vector<std::uint8_t> buf_;
};

class Reader {
public:
    explicit Reader(std::vector<std::uint8_t> buf) : buf_(std::move(buf)) {}

    void bytes(void* out, std::size_t n)
    {
        if (buf_.size() - pos_ < n) {
            throw CheckpointError("checkpoint truncated");
        }
        std::memcpy(out, buf_.data() + pos_, n);
        pos_ += n;
    }
    template <typename T>
    T scalar()
    {
        T v;
        bytes(&v, sizeof v);
        return v;
    }
    std::string string(std::size_t n)
    {
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }

private:
    std::vector<std::uint8_t> buf_;
    std::size_t pos_ = 0;
};

void write_array(Writer& w, const std::string& name, const nn::Matrix<float>& m)
{
    w.string(name);
    w.scalar<std::uint32_t>(static_cast<std::uint32_t>(m.rows()));
    w.scalar<std::uint32_t>(static_cast<std::uint32_t>(m.cols()));
    w.bytes(m.data(), sizeof(float) * static_cast<std::size_t>(m.size()));
}

} // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path)
{
    nlohmann::json meta = {
        {"format", "sparsesbc-checkpoint"},
        {"version", kCheckpointVersion},
        {"arch", arch_to_json(ckpt.meta.arch)},
        {"epoch", ckpt.meta.epoch},
        {"extra", ckpt.meta.extra},
    };
    const std::string meta_text = meta.dump();

    auto encoder = ckpt.encoder;
    auto decoder = ckpt.decoder;
    auto enc_tensors = encoder.tensors();
    auto dec_tensors = decoder.tensors();

    Writer w;
    w.bytes(kMagic, sizeof kMagic);
    w.scalar<std::uint32_t>(kCheckpointVersion);
    w.scalar<std::uint64_t>(meta_text.size());
    w.bytes(meta_text.data(), meta_text.size());
    w.scalar<std::uint32_t>(static_cast<std::uint32_t>(enc_tensors.size() + dec_tensors.size() + ckpt.aux.size()));
    for (const auto& t : enc_tensors) {
        write_array(w, t.name, *t.tensor);
    }
    for (const auto& t : dec_tensors) {
        write_array(w, t.name, *t.tensor);
    }
    for (const auto& [name, m] : ckpt.aux) {
        write_array(w, name, m);
    }

    // Write-then-rename so an interrupted save never leaves a torn file.
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) {
            throw CheckpointError("cannot write checkpoint " + tmp.string());
        }
        const auto& buf = w.buffer();
        out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (!out) {
            throw CheckpointError("short write on " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw CheckpointError("cannot open checkpoint " + path.string());
    }
    Reader r({std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()});

    char magic[8];
    r.bytes(magic, sizeof magic);
    if (std::memcmp(magic, kMagic, sizeof magic) != 0) {
        throw CheckpointError(path.string() + " is not a checkpoint file");
    }
    const auto version = r.scalar<std::uint32_t>();
    if (version != kCheckpointVersion) {
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    }
    const auto meta_len = r.scalar<std::uint64_t>();
    if (meta_len > (1ULL << 30)) {
        throw CheckpointError("checkpoint metadata length out of range");
    }
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(r.string(meta_len));
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("checkpoint metadata is not valid JSON: ") + e.what());
    }

    if (!meta.is_object() || !meta.contains("arch")) {
        throw CheckpointError("checkpoint metadata has no arch block");
    }
    Checkpoint ckpt;
    ckpt.meta.arch = arch_from_json(meta["arch"]);
    ckpt.meta.epoch = meta.value("epoch", 0);
    ckpt.meta.extra = meta.value("extra", nlohmann::json::object());

    std::map<std::string, nn::Matrix<float>> arrays;
    const auto count = r.scalar<std::uint32_t>();
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name = r.string(r.scalar<std::uint32_t>());
        const auto rows = r.scalar<std::uint32_t>();
        const auto cols = r.scalar<std::uint32_t>();
        nn::Matrix<float> m(rows, cols);
        r.bytes(m.data(), sizeof(float) * static_cast<std::size_t>(rows) * cols);
        arrays.emplace(name, std::move(m));
    }

    // Shapes come from a freshly initialized model of the stored arch.
    TransceiverParams<float> shapes;
    try {
        shapes = init_params<float>(ckpt.meta.arch, 0);
    } catch (const ConfigError& e) {
        throw CheckpointError(std::string("checkpoint arch is invalid: ") + e.what());
    }
    ckpt.encoder = std::move(shapes.encoder);
    ckpt.decoder = std::move(shapes.decoder);
    auto take = [&](const NamedTensor<float>& t) {
        auto it = arrays.find(t.name);
        if (it == arrays.end()) {
            throw CheckpointError("checkpoint is missing array " + t.name);
        }
        if (it->second.rows() != t.tensor->rows() || it->second.cols() != t.tensor->cols()) {
            throw CheckpointError("array " + t.name + " has shape inconsistent with the stored arch");
        }
        *t.tensor = std::move(it->second);
        arrays.erase(it);
    };
    for (const auto& t : ckpt.encoder.tensors()) {
        take(t);
    }
    for (const auto& t : ckpt.decoder.tensors()) {
        take(t);
    }
    ckpt.aux = std::move(arrays);
    return ckpt;
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const ArchConfig& expected)
{
    auto ckpt = load_checkpoint(path);
    if (!(ckpt.meta.arch == expected)) {
        throw CheckpointError("checkpoint arch " + arch_to_json(ckpt.meta.arch).dump() +
                              " does not match expected " + arch_to_json(expected).dump());
    }
    return ckpt;
}

} // namespace sparsesbc

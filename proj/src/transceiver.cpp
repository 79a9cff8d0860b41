#include "sparsesbc/transceiver.hpp"

#include "sparsesbc/error.hpp"
#include "sparsesbc/rng.hpp"

#include <cmath>

namespace sparsesbc {

using nn::ConvGeometry;
using nn::FeatureMap;
using nn::Matrix;
using nn::Vector;

std::vector<ConvGeometry> encoder_geometry(const ArchConfig& arch)
{
    validate_shape(arch.image);
    if (arch.conv_channels.empty()) {
        throw ConfigError("arch needs at least one convolution layer");
    }
    if (arch.kernel <= 0 || arch.stride <= 0 || arch.padding < 0) {
        throw ConfigError("kernel and stride must be positive, padding non-negative");
    }
    std::vector<ConvGeometry> geometry;
    int channels = arch.image.channels;
    int h = arch.image.height;
    int w = arch.image.width;
    for (int out_channels : arch.conv_channels) {
        if (out_channels <= 0) {
            throw ConfigError("conv channel counts must be positive");
        }
        const int span_h = h + 2 * arch.padding - arch.kernel;
        const int span_w = w + 2 * arch.padding - arch.kernel;
        if (span_h < 0 || span_w < 0 || span_h % arch.stride != 0 || span_w % arch.stride != 0) {
            throw ConfigError("conv layer on " + std::to_string(h) + "x" + std::to_string(w) +
                              " input is not exactly invertible by the mirrored deconvolution");
        }
        ConvGeometry g;
        g.in_channels = channels;
        g.out_channels = out_channels;
        g.in_h = h;
        g.in_w = w;
        g.out_h = span_h / arch.stride + 1;
        g.out_w = span_w / arch.stride + 1;
        g.kernel = arch.kernel;
        g.stride = arch.stride;
        g.padding = arch.padding;
        geometry.push_back(g);
        channels = out_channels;
        h = g.out_h;
        w = g.out_w;
    }
    const int derived_m = channels * h * w;
    if (derived_m != arch.embedding_dim) {
        throw ConfigError("embedding length M=" + std::to_string(arch.embedding_dim) +
                          " does not match the conv stack output " + std::to_string(channels) + "x" +
                          std::to_string(h) + "x" + std::to_string(w) + "=" + std::to_string(derived_m));
    }
    if (arch.bit_length <= 0) {
        throw ConfigError("bit length N must be positive");
    }
    return geometry;
}

void validate_arch(const ArchConfig& arch)
{
    (void)encoder_geometry(arch);
}

nlohmann::json arch_to_json(const ArchConfig& arch)
{
    return {
        {"height", arch.image.height},
        {"width", arch.image.width},
        {"channels", arch.image.channels},
        {"conv_channels", arch.conv_channels},
        {"kernel", arch.kernel},
        {"stride", arch.stride},
        {"padding", arch.padding},
        {"leaky_slope", arch.leaky_slope},
        {"M", arch.embedding_dim},
        {"N", arch.bit_length},
    };
}

ArchConfig arch_from_json(const nlohmann::json& j)
{
    try {
        ArchConfig arch;
        arch.image = {j.at("height").get<int>(), j.at("width").get<int>(), j.at("channels").get<int>()};
        arch.conv_channels = j.at("conv_channels").get<std::vector<int>>();
        arch.kernel = j.at("kernel").get<int>();
        arch.stride = j.at("stride").get<int>();
        arch.padding = j.at("padding").get<int>();
        arch.leaky_slope = j.at("leaky_slope").get<double>();
        arch.embedding_dim = j.at("M").get<int>();
        arch.bit_length = j.at("N").get<int>();
        return arch;
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("malformed arch block: ") + e.what());
    }
}

// --- parameter containers --------------------------------------------------

template <typename S>
std::vector<NamedTensor<S>> EncoderParams<S>::tensors()
{
    std::vector<NamedTensor<S>> out;
    for (std::size_t i = 0; i < convs.size(); ++i) {
        const std::string prefix = "encoder.conv" + std::to_string(i);
        out.push_back({prefix + ".weight", &convs[i].weight});
        out.push_back({prefix + ".bias", &convs[i].bias});
    }
    out.push_back({"encoder.quantizer.weight", &quantizer.weight});
    out.push_back({"encoder.quantizer.bias", &quantizer.bias});
    return out;
}

template <typename S>
EncoderParams<S> EncoderParams<S>::zeros_like() const
{
    EncoderParams z = *this;
    for (auto& t : z.tensors()) {
        t.tensor->setZero();
    }
    return z;
}

template <typename S>
std::vector<NamedTensor<S>> DecoderParams<S>::tensors()
{
    std::vector<NamedTensor<S>> out;
    out.push_back({"decoder.dequantizer.weight", &dequantizer.weight});
    out.push_back({"decoder.dequantizer.bias", &dequantizer.bias});
    for (std::size_t i = 0; i < deconvs.size(); ++i) {
        const std::string prefix = "decoder.deconv" + std::to_string(i);
        out.push_back({prefix + ".weight", &deconvs[i].weight});
        out.push_back({prefix + ".bias", &deconvs[i].bias});
    }
    return out;
}

template <typename S>
DecoderParams<S> DecoderParams<S>::zeros_like() const
{
    DecoderParams z = *this;
    for (auto& t : z.tensors()) {
        t.tensor->setZero();
    }
    return z;
}

namespace {

template <typename S>
Matrix<S> uniform_matrix(int rows, int cols, double bound, RngStream& rng)
{
    Matrix<S> m(rows, cols);
    for (int c = 0; c < cols; ++c) {
        for (int r = 0; r < rows; ++r) {
            m(r, c) = static_cast<S>((2.0 * rng.uniform() - 1.0) * bound);
        }
    }
    return m;
}

} // namespace

template <typename S>
TransceiverParams<S> init_params(const ArchConfig& arch, std::uint64_t seed)
{
    const auto geometry = encoder_geometry(arch);
    RngStream rng(mix_seed(seed, "init"));
    const double leaky_gain = 1.0 + arch.leaky_slope * arch.leaky_slope;
    const int k2 = arch.kernel * arch.kernel;

    TransceiverParams<S> p;
    for (const auto& g : geometry) {
        const double bound = std::sqrt(6.0 / (leaky_gain * g.patch_size()));
        p.encoder.convs.push_back({uniform_matrix<S>(g.out_channels, g.patch_size(), bound, rng),
                                   Matrix<S>::Zero(g.out_channels, 1)});
    }
    const int m = arch.embedding_dim;
    const int n = arch.bit_length;
    p.encoder.quantizer = {uniform_matrix<S>(n, m, std::sqrt(3.0 / m), rng), Matrix<S>::Zero(n, 1)};

    p.decoder.dequantizer = {uniform_matrix<S>(m, n, std::sqrt(3.0 / n), rng), Matrix<S>::Zero(m, 1)};
    for (auto it = geometry.rbegin(); it != geometry.rend(); ++it) {
        // Each output pixel of a stride-s transposed conv sees k*k/s^2 taps per input channel.
        const double fan_in = static_cast<double>(it->out_channels) * k2 / (it->stride * it->stride);
        const double bound = std::sqrt(6.0 / (leaky_gain * fan_in));
        p.decoder.deconvs.push_back({uniform_matrix<S>(it->out_channels, it->in_channels * k2, bound, rng),
                                     Matrix<S>::Zero(it->in_channels, 1)});
    }
    return p;
}

template <typename To, typename From>
EncoderParams<To> cast_params(const EncoderParams<From>& p)
{
    EncoderParams<To> out;
    for (const auto& c : p.convs) {
        out.convs.push_back({c.weight.template cast<To>(), c.bias.template cast<To>()});
    }
    out.quantizer = {p.quantizer.weight.template cast<To>(), p.quantizer.bias.template cast<To>()};
    return out;
}

template <typename To, typename From>
DecoderParams<To> cast_params(const DecoderParams<From>& p)
{
    DecoderParams<To> out;
    out.dequantizer = {p.dequantizer.weight.template cast<To>(), p.dequantizer.bias.template cast<To>()};
    for (const auto& d : p.deconvs) {
        out.deconvs.push_back({d.weight.template cast<To>(), d.bias.template cast<To>()});
    }
    return out;
}

bool all_finite(const EncoderParams<float>& p)
{
    for (const auto& t : const_cast<EncoderParams<float>&>(p).tensors()) {
        if (!t.tensor->allFinite()) {
            return false;
        }
    }
    return true;
}

bool all_finite(const DecoderParams<float>& p)
{
    for (const auto& t : const_cast<DecoderParams<float>&>(p).tensors()) {
        if (!t.tensor->allFinite()) {
            return false;
        }
    }
    return true;
}

// --- forward / backward ----------------------------------------------------

template <typename S>
EncoderTrace<S> encoder_forward(const EncoderParams<S>& phi, const ArchConfig& arch,
                                const NormalizedImage& img)
{
    if (img.shape() != arch.image) {
        throw ContractError("encoder input shape " + to_string(img.shape()) + " != arch " +
                            to_string(arch.image));
    }
    const auto geometry = encoder_geometry(arch);
    if (phi.convs.size() != geometry.size()) {
        throw ContractError("encoder parameters do not match arch");
    }
    const S slope = static_cast<S>(arch.leaky_slope);

    EncoderTrace<S> trace;
    FeatureMap<S> x(arch.image.channels, arch.image.height * arch.image.width);
    for (std::size_t i = 0; i < img.size(); ++i) {
        x.data()[i] = static_cast<S>(img[i]);
    }
    for (std::size_t l = 0; l < geometry.size(); ++l) {
        trace.patches.push_back(nn::im2col<S>(x, geometry[l]));
        FeatureMap<S> pre = phi.convs[l].weight * trace.patches.back();
        pre.colwise() += phi.convs[l].bias.col(0);
        x = pre.unaryExpr([slope](S v) { return nn::leaky_relu(v, slope); });
        trace.pre.push_back(std::move(pre));
    }
    trace.embedding = flatten<S>(x);
    trace.activation = (phi.quantizer.weight * trace.embedding + phi.quantizer.bias.col(0)).array().tanh();
    return trace;
}

template <typename S>
void encoder_backward(const EncoderParams<S>& phi, const ArchConfig& arch,
                      const EncoderTrace<S>& trace, const Vector<S>& d_activation,
                      EncoderParams<S>& grad)
{
    const auto geometry = encoder_geometry(arch);
    const S slope = static_cast<S>(arch.leaky_slope);

    const Vector<S> d_pre_q =
        d_activation.array() * (S(1) - trace.activation.array().square());
    grad.quantizer.weight.noalias() += d_pre_q * trace.embedding.transpose();
    grad.quantizer.bias.col(0) += d_pre_q;

    const Vector<S> d_embedding = phi.quantizer.weight.transpose() * d_pre_q;
    const auto& last = geometry.back();
    FeatureMap<S> dx = Eigen::Map<const FeatureMap<S>>(d_embedding.data(), last.out_channels,
                                                       last.out_h * last.out_w);
    for (std::size_t l = geometry.size(); l-- > 0;) {
        const FeatureMap<S> d_pre =
            dx.array() * trace.pre[l].unaryExpr([slope](S v) { return nn::leaky_relu_grad(v, slope); }).array();
        grad.convs[l].weight.noalias() += d_pre * trace.patches[l].transpose();
        grad.convs[l].bias.col(0) += d_pre.rowwise().sum().transpose();
        if (l > 0) {
            const Matrix<S> d_patches = phi.convs[l].weight.transpose() * d_pre;
            dx = nn::col2im<S>(d_patches, geometry[l]);
        }
    }
}

template <typename S>
DecoderTrace<S> decoder_forward(const DecoderParams<S>& theta, const ArchConfig& arch,
                                const Vector<S>& received)
{
    if (received.size() != arch.bit_length) {
        throw ContractError("received vector length " + std::to_string(received.size()) +
                            " != N=" + std::to_string(arch.bit_length));
    }
    const auto geometry = encoder_geometry(arch);
    if (theta.deconvs.size() != geometry.size()) {
        throw ContractError("decoder parameters do not match arch");
    }
    const S slope = static_cast<S>(arch.leaky_slope);

    DecoderTrace<S> trace;
    trace.received = received;
    trace.embedding =
        (theta.dequantizer.weight * received + theta.dequantizer.bias.col(0)).array().tanh();
    const auto& last = geometry.back();
    FeatureMap<S> x = Eigen::Map<const FeatureMap<S>>(trace.embedding.data(), last.out_channels,
                                                      last.out_h * last.out_w);
    const std::size_t layers = geometry.size();
    for (std::size_t j = 0; j < layers; ++j) {
        const auto& g = geometry[layers - 1 - j];
        const Matrix<S> cols = theta.deconvs[j].weight.transpose() * x;
        FeatureMap<S> pre = nn::col2im<S>(cols, g);
        pre.colwise() += theta.deconvs[j].bias.col(0);
        trace.inputs.push_back(std::move(x));
        if (j + 1 < layers) {
            x = pre.unaryExpr([slope](S v) { return nn::leaky_relu(v, slope); });
        } else {
            x = pre.unaryExpr([](S v) { return nn::sigmoid(v); });
        }
        trace.pre.push_back(std::move(pre));
    }
    trace.output = std::move(x);
    return trace;
}

template <typename S>
void decoder_backward(const DecoderParams<S>& theta, const ArchConfig& arch,
                      const DecoderTrace<S>& trace, const Vector<S>& d_output,
                      DecoderParams<S>& grad)
{
    const auto geometry = encoder_geometry(arch);
    const S slope = static_cast<S>(arch.leaky_slope);
    const std::size_t layers = geometry.size();

    FeatureMap<S> dx = Eigen::Map<const FeatureMap<S>>(d_output.data(), trace.output.rows(),
                                                       trace.output.cols());
    for (std::size_t j = layers; j-- > 0;) {
        const auto& g = geometry[layers - 1 - j];
        FeatureMap<S> d_pre;
        if (j + 1 == layers) {
            d_pre = dx.array() * trace.output.array() * (S(1) - trace.output.array());
        } else {
            d_pre = dx.array() *
                    trace.pre[j].unaryExpr([slope](S v) { return nn::leaky_relu_grad(v, slope); }).array();
        }
        grad.deconvs[j].bias.col(0) += d_pre.rowwise().sum().transpose();
        const Matrix<S> d_cols = nn::im2col<S>(d_pre, g);
        grad.deconvs[j].weight.noalias() += trace.inputs[j] * d_cols.transpose();
        dx = theta.deconvs[j].weight * d_cols;
    }

    const Vector<S> d_embedding = flatten<S>(dx);
    const Vector<S> d_pre_r = d_embedding.array() * (S(1) - trace.embedding.array().square());
    grad.dequantizer.weight.noalias() += d_pre_r * trace.received.transpose();
    grad.dequantizer.bias.col(0) += d_pre_r;
}

template <typename S>
Vector<S> l1_loss_gradient(const Vector<S>& reconstruction, const NormalizedImage& target)
{
    if (static_cast<std::size_t>(reconstruction.size()) != target.size()) {
        throw ContractError("reconstruction length does not match target image");
    }
    const auto& shape = target.shape();
    const S scale = S(1) / static_cast<S>(2.0 * shape.height * shape.width * shape.channels);
    Vector<S> g(reconstruction.size());
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        const S diff = reconstruction[i] - static_cast<S>(target[static_cast<std::size_t>(i)]);
        g[i] = diff > S(0) ? scale : (diff < S(0) ? -scale : S(0));
    }
    return g;
}

template <typename S>
double decoder_l1_gradient(const DecoderParams<S>& theta, const ArchConfig& arch,
                           const Vector<S>& received, const NormalizedImage& target,
                           DecoderParams<S>& grad)
{
    const auto trace = decoder_forward(theta, arch, received);
    const Vector<S> out = flatten<S>(trace.output);
    const auto& shape = target.shape();
    double loss = 0.0;
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        loss += std::abs(static_cast<double>(out[i]) - target[static_cast<std::size_t>(i)]);
    }
    loss /= 2.0 * shape.height * shape.width * shape.channels;
    decoder_backward(theta, arch, trace, l1_loss_gradient<S>(out, target), grad);
    return loss;
}

// --- value-level interface -------------------------------------------------

template <typename S>
NormalizedImage to_image(const FeatureMap<S>& output, const ImageShape& shape)
{
    std::vector<double> values(static_cast<std::size_t>(output.size()));
    for (std::size_t i = 0; i < values.size(); ++i) {
        values[i] = static_cast<double>(output.data()[i]);
    }
    return NormalizedImage::clamped(shape, std::move(values));
}

template <typename S>
EncodeResult encode(const NormalizedImage& img, const EncoderParams<S>& phi, const ArchConfig& arch)
{
    const auto trace = encoder_forward(phi, arch, img);
    EncodeResult r;
    r.embedding.values.assign(trace.embedding.data(), trace.embedding.data() + trace.embedding.size());
    r.activation.values.assign(trace.activation.data(), trace.activation.data() + trace.activation.size());
    return r;
}

BitVector quantize(std::span<const double> a)
{
    BitVector bits(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        bits.set(i, a[i] > 0.0);
    }
    return bits;
}

BitVector quantize(const PreQuantActivation& a)
{
    return quantize(std::span<const double>(a.values));
}

namespace {

template <typename S>
Vector<S> to_eigen(const std::vector<double>& v)
{
    Vector<S> out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[static_cast<Eigen::Index>(i)] = static_cast<S>(v[i]);
    }
    return out;
}

} // namespace

template <typename S>
Embedding dequantize(const ReceivedVector& y, const DecoderParams<S>& theta, const ArchConfig& arch)
{
    if (y.size() != static_cast<std::size_t>(arch.bit_length)) {
        throw ContractError("received vector length " + std::to_string(y.size()) +
                            " != N=" + std::to_string(arch.bit_length));
    }
    const Vector<S> e =
        (theta.dequantizer.weight * to_eigen<S>(y.values) + theta.dequantizer.bias.col(0)).array().tanh();
    Embedding out;
    out.values.assign(e.data(), e.data() + e.size());
    return out;
}

template <typename S>
NormalizedImage decode(const Embedding& e, const DecoderParams<S>& theta, const ArchConfig& arch)
{
    if (e.values.size() != static_cast<std::size_t>(arch.embedding_dim)) {
        throw ContractError("embedding length " + std::to_string(e.values.size()) +
                            " != M=" + std::to_string(arch.embedding_dim));
    }
    const auto geometry = encoder_geometry(arch);
    const S slope = static_cast<S>(arch.leaky_slope);
    const auto& last = geometry.back();
    const Vector<S> ev = to_eigen<S>(e.values);
    FeatureMap<S> x = Eigen::Map<const FeatureMap<S>>(ev.data(), last.out_channels, last.out_h * last.out_w);
    const std::size_t layers = geometry.size();
    for (std::size_t j = 0; j < layers; ++j) {
        const Matrix<S> cols = theta.deconvs[j].weight.transpose() * x;
        FeatureMap<S> pre = nn::col2im<S>(cols, geometry[layers - 1 - j]);
        pre.colwise() += theta.deconvs[j].bias.col(0);
        if (j + 1 < layers) {
            x = pre.unaryExpr([slope](S v) { return nn::leaky_relu(v, slope); });
        } else {
            x = pre.unaryExpr([](S v) { return nn::sigmoid(v); });
        }
    }
    return to_image<S>(x, arch.image);
}

template <typename S>
NormalizedImage reconstruct(const ReceivedVector& y, const DecoderParams<S>& theta, const ArchConfig& arch)
{
    return decode(dequantize(y, theta, arch), theta, arch);
}

template <typename S>
BitVector transmit_bits(const NormalizedImage& img, const EncoderParams<S>& phi, const ArchConfig& arch)
{
    return quantize(encode(img, phi, arch).activation);
}

#define SPARSESBC_INSTANTIATE(S)                                                                    \
    template struct EncoderParams<S>;                                                              \
    template struct DecoderParams<S>;                                                              \
    template TransceiverParams<S> init_params<S>(const ArchConfig&, std::uint64_t);                \
    template EncoderTrace<S> encoder_forward<S>(const EncoderParams<S>&, const ArchConfig&,        \
                                                const NormalizedImage&);                           \
    template void encoder_backward<S>(const EncoderParams<S>&, const ArchConfig&,                  \
                                      const EncoderTrace<S>&, const Vector<S>&, EncoderParams<S>&); \
    template DecoderTrace<S> decoder_forward<S>(const DecoderParams<S>&, const ArchConfig&,        \
                                                const Vector<S>&);                                 \
    template void decoder_backward<S>(const DecoderParams<S>&, const ArchConfig&,                  \
                                      const DecoderTrace<S>&, const Vector<S>&, DecoderParams<S>&); \
    template Vector<S> l1_loss_gradient<S>(const Vector<S>&, const NormalizedImage&);              \
    template double decoder_l1_gradient<S>(const DecoderParams<S>&, const ArchConfig&,             \
                                           const Vector<S>&, const NormalizedImage&,               \
                                           DecoderParams<S>&);                                     \
    template NormalizedImage to_image<S>(const FeatureMap<S>&, const ImageShape&);                 \
    template EncodeResult encode<S>(const NormalizedImage&, const EncoderParams<S>&,               \
                                    const ArchConfig&);                                            \
    template Embedding dequantize<S>(const ReceivedVector&, const DecoderParams<S>&,               \
                                     const ArchConfig&);                                           \
    template NormalizedImage decode<S>(const Embedding&, const DecoderParams<S>&,                  \
                                       const ArchConfig&);                                         \
    template NormalizedImage reconstruct<S>(const ReceivedVector&, const DecoderParams<S>&,        \
                                            const ArchConfig&);                                    \
    template BitVector transmit_bits<S>(const NormalizedImage&, const EncoderParams<S>&,           \
                                        const ArchConfig&);

SPARSESBC_INSTANTIATE(float)
SPARSESBC_INSTANTIATE(double)

#undef SPARSESBC_INSTANTIATE

template EncoderParams<double> cast_params<double, float>(const EncoderParams<float>&);
template EncoderParams<float> cast_params<float, double>(const EncoderParams<double>&);
template DecoderParams<double> cast_params<double, float>(const DecoderParams<float>&);
template DecoderParams<float> cast_params<float, double>(const DecoderParams<double>&);

} // namespace sparsesbc

#pragma once

#include "sparsesbc/bits.hpp"
#include "sparsesbc/imaging.hpp"
#include "sparsesbc/layers.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace sparsesbc {

// Layer layout of the encoder/decoder pair. The encoder is a stack of strided
// convolutions (LeakyReLU after each) whose flattened output has length
// `embedding_dim` (M); the quantizer maps it to `bit_length` (N). The decoder
// mirrors the stack with transposed convolutions.
struct ArchConfig {
    ImageShape image{32, 32, 3};
    std::vector<int> conv_channels{32, 64, 144};
    int kernel = 4;
    int stride = 2;
    int padding = 1;
    double leaky_slope = 0.2;
    int embedding_dim = 2304;
    int bit_length = 5000;

    bool operator==(const ArchConfig&) const = default;
};

// Geometry of each encoder convolution; throws ConfigError when the layers do
// not chain, do not invert under the mirrored decoder, or disagree with M.
std::vector<nn::ConvGeometry> encoder_geometry(const ArchConfig& arch);
void validate_arch(const ArchConfig& arch);

nlohmann::json arch_to_json(const ArchConfig& arch);
ArchConfig arch_from_json(const nlohmann::json& j);

template <typename S>
struct DenseParams {
    nn::Matrix<S> weight; // out x in
    nn::Matrix<S> bias;   // out x 1
};

template <typename S>
struct ConvParams {
    nn::Matrix<S> weight; // out_channels x (in_channels*k*k)
    nn::Matrix<S> bias;   // out_channels x 1
};

template <typename S>
struct DeconvParams {
    nn::Matrix<S> weight; // in_channels x (out_channels*k*k)
    nn::Matrix<S> bias;   // out_channels x 1
};

template <typename S>
struct NamedTensor {
    std::string name;
    nn::Matrix<S>* tensor;
};

// phi: convolutional source/channel encoder plus quantizer FC layer.
template <typename S>
struct EncoderParams {
    std::vector<ConvParams<S>> convs;
    DenseParams<S> quantizer;

    std::vector<NamedTensor<S>> tensors();
    EncoderParams zeros_like() const;
};

// theta: dequantizer FC layer plus transposed-convolution decoder.
template <typename S>
struct DecoderParams {
    DenseParams<S> dequantizer;
    std::vector<DeconvParams<S>> deconvs;

    std::vector<NamedTensor<S>> tensors();
    DecoderParams zeros_like() const;
};

template <typename S>
struct TransceiverParams {
    EncoderParams<S> encoder;
    DecoderParams<S> decoder;
};

// Weights ~ U(-b, b) with b scaled by the layer fan-in; biases start at zero.
template <typename S>
TransceiverParams<S> init_params(const ArchConfig& arch, std::uint64_t seed);

template <typename To, typename From>
EncoderParams<To> cast_params(const EncoderParams<From>& p);
template <typename To, typename From>
DecoderParams<To> cast_params(const DecoderParams<From>& p);

bool all_finite(const EncoderParams<float>& p);
bool all_finite(const DecoderParams<float>& p);

// Intermediate values kept for the backward pass.
template <typename S>
struct EncoderTrace {
    std::vector<nn::Matrix<S>> patches;   // im2col of each conv input
    std::vector<nn::FeatureMap<S>> pre;   // conv outputs before LeakyReLU
    nn::Vector<S> embedding;              // x, length M
    nn::Vector<S> activation;             // tanh(FC(x)), length N
};

template <typename S>
struct DecoderTrace {
    nn::Vector<S> received;               // y, length N
    nn::Vector<S> embedding;              // tanh(FC(y)), length M
    std::vector<nn::FeatureMap<S>> inputs; // input of each deconv
    std::vector<nn::FeatureMap<S>> pre;    // deconv outputs before activation
    nn::FeatureMap<S> output;             // sigmoid output, channels x (h*w)
};

template <typename S>
EncoderTrace<S> encoder_forward(const EncoderParams<S>& phi, const ArchConfig& arch,
                                const NormalizedImage& img);

// Accumulates d(objective)/d(phi) into `grad` given the objective's gradient
// with respect to the tanh activation.
template <typename S>
void encoder_backward(const EncoderParams<S>& phi, const ArchConfig& arch,
                      const EncoderTrace<S>& trace, const nn::Vector<S>& d_activation,
                      EncoderParams<S>& grad);

template <typename S>
DecoderTrace<S> decoder_forward(const DecoderParams<S>& theta, const ArchConfig& arch,
                                const nn::Vector<S>& received);

// Accumulates d(objective)/d(theta) given the gradient with respect to the
// decoder's sigmoid output (planar CHW order, length h*w*c).
template <typename S>
void decoder_backward(const DecoderParams<S>& theta, const ArchConfig& arch,
                      const DecoderTrace<S>& trace, const nn::Vector<S>& d_output,
                      DecoderParams<S>& grad);

// Subgradient of the semantic L1 loss with respect to the reconstruction:
// sign(recon - target) / (2 h w c).
template <typename S>
nn::Vector<S> l1_loss_gradient(const nn::Vector<S>& reconstruction, const NormalizedImage& target);

// Direct backpropagation of L(I, R(y)) into theta. Returns the loss.
template <typename S>
double decoder_l1_gradient(const DecoderParams<S>& theta, const ArchConfig& arch,
                           const nn::Vector<S>& received, const NormalizedImage& target,
                           DecoderParams<S>& grad);

// --- value-level interface -------------------------------------------------

struct Embedding {
    std::vector<double> values;
};

// tanh output in (-1, 1); the Gaussian mean of the transmitter policy.
struct PreQuantActivation {
    std::vector<double> values;
};

struct EncodeResult {
    Embedding embedding;
    PreQuantActivation activation;
};

template <typename S>
EncodeResult encode(const NormalizedImage& img, const EncoderParams<S>& phi, const ArchConfig& arch);

// bit_i = 1 iff a_i > 0.
BitVector quantize(const PreQuantActivation& a);
BitVector quantize(std::span<const double> a);

// tanh(FC(y)); real-valued, no binarization.
template <typename S>
Embedding dequantize(const ReceivedVector& y, const DecoderParams<S>& theta, const ArchConfig& arch);

template <typename S>
NormalizedImage decode(const Embedding& e, const DecoderParams<S>& theta, const ArchConfig& arch);

// Receiver end to end: decode(dequantize(y)).
template <typename S>
NormalizedImage reconstruct(const ReceivedVector& y, const DecoderParams<S>& theta,
                            const ArchConfig& arch);

// Transmitter end to end: quantize(encode(img)).
template <typename S>
BitVector transmit_bits(const NormalizedImage& img, const EncoderParams<S>& phi,
                        const ArchConfig& arch);

// Planar decoder output -> clamped NormalizedImage.
template <typename S>
NormalizedImage to_image(const nn::FeatureMap<S>& output, const ImageShape& shape);

template <typename S>
nn::Vector<S> flatten(const nn::FeatureMap<S>& map)
{
    return Eigen::Map<const nn::Vector<S>>(map.data(), map.size());
}

template <typename S>
nn::Vector<S> to_vector(const NormalizedImage& img)
{
    nn::Vector<S> v(static_cast<Eigen::Index>(img.size()));
    for (std::size_t i = 0; i < img.size(); ++i) {
        v[static_cast<Eigen::Index>(i)] = static_cast<S>(img[i]);
    }
    return v;
}

} // namespace sparsesbc

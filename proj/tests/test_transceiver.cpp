#include "support.hpp"

#include "sparsesbc/error.hpp"
#include "sparsesbc/layers.hpp"
#include "sparsesbc/metrics.hpp"
#include "sparsesbc/transceiver.hpp"

#include <doctest.h>

#include <cmath>

using namespace sparsesbc;

namespace {

template <typename Params>
bool identical(Params a, Params b)
{
    auto ta = a.tensors();
    auto tb = b.tensors();
    if (ta.size() != tb.size()) {
        return false;
    }
    for (std::size_t i = 0; i < ta.size(); ++i) {
        if (ta[i].name != tb[i].name || *ta[i].tensor != *tb[i].tensor) {
            return false;
        }
    }
    return true;
}

double rel_error(double a, double b)
{
    const double scale = std::max({std::fabs(a), std::fabs(b), 1e-8});
    return std::fabs(a - b) / scale;
}

nn::Vector<double> random_vector(int n, RngStream& rng, double lo, double hi)
{
    nn::Vector<double> v(n);
    for (int i = 0; i < n; ++i) {
        v[i] = lo + (hi - lo) * rng.uniform();
    }
    return v;
}

// L1 loss of the decoder output against `target`, evaluated directly.
double decoder_loss(const DecoderParams<double>& theta, const ArchConfig& arch, const nn::Vector<double>& y,
                    const NormalizedImage& target)
{
    const auto out = flatten<double>(decoder_forward(theta, arch, y).output);
    double s = 0;
    for (int i = 0; i < out.size(); ++i) {
        s += std::fabs(out[i] - target[static_cast<std::size_t>(i)]);
    }
    return s / (2.0 * target.size());
}

} // namespace

TEST_CASE("default architecture matches the reference sizes")
{
    const ArchConfig arch;
    CHECK_NOTHROW(validate_arch(arch));
    const auto geometry = encoder_geometry(arch);
    REQUIRE(geometry.size() == 3);
    CHECK(geometry.back().out_h == 4);
    CHECK(geometry.back().out_w == 4);
    CHECK(geometry.back().out_channels == 144);

    const auto p = init_params<float>(arch, 1);
    CHECK(p.encoder.quantizer.weight.rows() == 5000);
    CHECK(p.encoder.quantizer.weight.cols() == 2304);
    CHECK(p.decoder.dequantizer.weight.rows() == 2304);
    CHECK(p.decoder.dequantizer.weight.cols() == 5000);

    RngStream rng(1);
    const auto img = normalize(testing::random_image(arch.image, rng));
    const auto enc = encode(img, p.encoder, arch);
    CHECK(enc.embedding.values.size() == 2304);
    CHECK(enc.activation.values.size() == 5000);
    const auto bits = quantize(enc.activation);
    CHECK(bits.size() == 5000);
    CHECK(payload_bytes(bits) == 625);
    const auto out = reconstruct(ReceivedVector{std::vector<double>(5000, 0.5)}, p.decoder, arch);
    CHECK(out.shape() == ImageShape{32, 32, 3});
    CHECK(dequantize(ReceivedVector{std::vector<double>(5000, 0.5)}, p.decoder, arch).values.size() == 2304);
}

TEST_CASE("architecture validation")
{
    ArchConfig arch;
    arch.embedding_dim = 2000;
    CHECK_THROWS_AS(validate_arch(arch), ConfigError);
    CHECK_THROWS_AS(init_params<float>(arch, 1), ConfigError);
    arch = ArchConfig{};
    arch.image = {30, 30, 3};
    CHECK_THROWS_AS(validate_arch(arch), ConfigError);
    arch = ArchConfig{};
    arch.bit_length = 0;
    CHECK_THROWS_AS(validate_arch(arch), ConfigError);
    CHECK_NOTHROW(validate_arch(testing::toy_arch()));

    const ArchConfig desk = [] {
        ArchConfig a;
        a.conv_channels = {16, 32, 36};
        a.embedding_dim = 576;
        a.bit_length = 1000;
        return a;
    }();
    CHECK_NOTHROW(validate_arch(desk));
    CHECK(arch_from_json(arch_to_json(desk)) == desk);
}

TEST_CASE("initialization is seeded")
{
    const auto arch = testing::small_arch();
    const auto a = init_params<float>(arch, 1);
    const auto b = init_params<float>(arch, 1);
    const auto c = init_params<float>(arch, 2);
    CHECK(identical(a.encoder, b.encoder));
    CHECK(identical(a.decoder, b.decoder));
    CHECK_FALSE(identical(a.encoder, c.encoder));
    CHECK_FALSE(identical(a.decoder, c.decoder));
    CHECK(a.encoder.quantizer.bias.isZero(0));
    CHECK(all_finite(a.encoder));
    CHECK(all_finite(a.decoder));
}

TEST_CASE("quantize thresholds at zero with ties to zero")
{
    const auto bits = quantize(std::vector<double>{0.3, -0.2, 0.0});
    const std::vector<std::uint8_t> expect{1, 0, 0};
    CHECK(std::equal(bits.bits().begin(), bits.bits().end(), expect.begin(), expect.end()));
    CHECK(quantize(std::vector<double>(7, -0.9)).popcount() == 0);

    RngStream rng(3);
    std::vector<double> a(100);
    for (auto& v : a) {
        v = 2 * rng.uniform() - 1;
    }
    const BitVector b = quantize(a);
    std::vector<double> recentred(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        recentred[i] = 2.0 * b[i] - 1.0;
    }
    CHECK(quantize(recentred) == b);
}

TEST_CASE("zero inputs with zero biases give zero activations")
{
    const auto arch = testing::small_arch();
    auto p = init_params<double>(arch, 4);
    const NormalizedImage black(arch.image, 0.0);
    const auto enc = encode(black, p.encoder, arch);
    for (double v : enc.activation.values) {
        CHECK(v == 0.0);
    }
    const auto e = dequantize(ReceivedVector{std::vector<double>(static_cast<std::size_t>(arch.bit_length), 0.0)},
                              p.decoder, arch);
    for (double v : e.values) {
        CHECK(v == 0.0);
    }
}

TEST_CASE("forward passes are deterministic and per-image")
{
    const auto arch = testing::small_arch();
    const auto p = init_params<float>(arch, 5);
    RngStream rng(6);
    std::vector<NormalizedImage> batch;
    for (int i = 0; i < 4; ++i) {
        batch.push_back(normalize(testing::random_image(arch.image, rng)));
    }
    const auto first = encode(batch[2], p.encoder, arch);
    for (const auto& img : batch) {
        (void)encode(img, p.encoder, arch);
    }
    CHECK(encode(batch[2], p.encoder, arch).activation.values == first.activation.values);
    for (double v : first.activation.values) {
        CHECK(v > -1.0);
        CHECK(v < 1.0);
    }
    const ReceivedVector y{std::vector<double>(static_cast<std::size_t>(arch.bit_length), 1.0)};
    CHECK(dequantize(y, p.decoder, arch).values == dequantize(y, p.decoder, arch).values);
    CHECK(reconstruct(y, p.decoder, arch) == reconstruct(y, p.decoder, arch));
}

TEST_CASE("shape contracts")
{
    const auto arch = testing::small_arch();
    const auto p = init_params<float>(arch, 5);
    CHECK_THROWS_AS(encode(NormalizedImage({4, 4, 3}), p.encoder, arch), ContractError);
    CHECK_THROWS_AS(dequantize(ReceivedVector{std::vector<double>(3, 0.0)}, p.decoder, arch), ContractError);
    CHECK_THROWS_AS(decode(Embedding{std::vector<double>(5, 0.0)}, p.decoder, arch), ContractError);
}

TEST_CASE("im2col and col2im are adjoint")
{
    nn::ConvGeometry g;
    g.in_channels = 2;
    g.out_channels = 3;
    g.in_h = 6;
    g.in_w = 6;
    g.kernel = 4;
    g.stride = 2;
    g.padding = 1;
    g.out_h = 3;
    g.out_w = 3;
    RngStream rng(8);
    nn::FeatureMap<double> x(2, 36);
    for (int i = 0; i < x.size(); ++i) {
        x.data()[i] = rng.normal();
    }
    const auto cols = nn::im2col<double>(x, g);
    nn::Matrix<double> c(cols.rows(), cols.cols());
    for (int i = 0; i < c.size(); ++i) {
        c.data()[i] = rng.normal();
    }
    const double lhs = (cols.array() * c.array()).sum();
    const double rhs = (x.array() * nn::col2im<double>(c, g).array()).sum();
    CHECK(std::fabs(lhs - rhs) < 1e-10);
}

TEST_CASE("decoder L1 gradient matches central differences on the 4x4 toy")
{
    const auto arch = testing::toy_arch(5);
    auto theta = init_params<double>(arch, 9).decoder;
    RngStream rng(10);
    // Non-zero biases so every parameter is exercised.
    for (auto& t : theta.tensors()) {
        if (t.name.find("bias") != std::string::npos) {
            for (int i = 0; i < t.tensor->size(); ++i) {
                t.tensor->data()[i] = 0.1 * rng.normal();
            }
        }
    }
    const auto y = random_vector(arch.bit_length, rng, -0.2, 1.2);
    const auto target = testing::random_normalized(arch.image, rng);

    auto grad = theta.zeros_like();
    const double loss = decoder_l1_gradient(theta, arch, y, target, grad);
    CHECK(loss == doctest::Approx(decoder_loss(theta, arch, y, target)).epsilon(1e-12));

    const double h = 1e-5;
    double worst = 0;
    auto params = theta.tensors();
    auto grads = grad.tensors();
    for (std::size_t t = 0; t < params.size(); ++t) {
        for (int i = 0; i < params[t].tensor->size(); ++i) {
            double& w = params[t].tensor->data()[i];
            const double saved = w;
            w = saved + h;
            const double up = decoder_loss(theta, arch, y, target);
            w = saved - h;
            const double down = decoder_loss(theta, arch, y, target);
            w = saved;
            const double numeric = (up - down) / (2 * h);
            worst = std::max(worst, rel_error(grads[t].tensor->data()[i], numeric));
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("encoder backward matches central differences on the 4x4 toy")
{
    const auto arch = testing::toy_arch(5);
    auto phi = init_params<double>(arch, 11).encoder;
    RngStream rng(12);
    for (auto& t : phi.tensors()) {
        if (t.name.find("bias") != std::string::npos) {
            for (int i = 0; i < t.tensor->size(); ++i) {
                t.tensor->data()[i] = 0.1 * rng.normal();
            }
        }
    }
    const auto img = testing::random_normalized(arch.image, rng);
    nn::Vector<double> w(arch.bit_length);
    for (int i = 0; i < w.size(); ++i) {
        w[i] = rng.normal();
    }
    // Linear objective w . tanh(...), so d/d(activation) = w.
    auto objective = [&] { return w.dot(encoder_forward(phi, arch, img).activation); };

    auto grad = phi.zeros_like();
    encoder_backward(phi, arch, encoder_forward(phi, arch, img), w, grad);

    const double h = 1e-5;
    double worst = 0;
    auto params = phi.tensors();
    auto grads = grad.tensors();
    for (std::size_t t = 0; t < params.size(); ++t) {
        for (int i = 0; i < params[t].tensor->size(); ++i) {
            double& p = params[t].tensor->data()[i];
            const double saved = p;
            p = saved + h;
            const double up = objective();
            p = saved - h;
            const double down = objective();
            p = saved;
            worst = std::max(worst, rel_error(grads[t].tensor->data()[i], (up - down) / (2 * h)));
        }
    }
    CHECK(worst < 1e-4);
}

#include "support.hpp"

#include "sparsesbc/error.hpp"
#include "sparsesbc/metrics.hpp"

#include <doctest.h>

#include <cmath>

using namespace sparsesbc;

namespace {

double psnr_oracle(const Image& a, const Image& b)
{
    long double sum = 0;
    for (std::size_t i = 0; i < a.pixels().size(); ++i) {
        const long double d = static_cast<long double>(a.pixels()[i]) - b.pixels()[i];
        sum += d * d;
    }
    const long double m = sum / a.pixels().size();
    return static_cast<double>(10.0L * std::log10(255.0L * 255.0L / m));
}

// Direct window-by-window statistics, no summed-area tables.
double ssim_oracle(const Image& a, const Image& b, int win)
{
    const double c1 = std::pow(0.01 * 255, 2);
    const double c2 = std::pow(0.03 * 255, 2);
    const double c3 = c2 / 2;
    double total = 0;
    int count = 0;
    for (int c = 0; c < a.channels(); ++c) {
        double chan = 0;
        int windows = 0;
        for (int y0 = 0; y0 + win <= a.height(); ++y0) {
            for (int x0 = 0; x0 + win <= a.width(); ++x0) {
                double mx = 0, my = 0;
                for (int y = y0; y < y0 + win; ++y) {
                    for (int x = x0; x < x0 + win; ++x) {
                        mx += a.at(c, y, x);
                        my += b.at(c, y, x);
                    }
                }
                const double n = win * win;
                mx /= n;
                my /= n;
                double vx = 0, vy = 0, cxy = 0;
                for (int y = y0; y < y0 + win; ++y) {
                    for (int x = x0; x < x0 + win; ++x) {
                        vx += (a.at(c, y, x) - mx) * (a.at(c, y, x) - mx);
                        vy += (b.at(c, y, x) - my) * (b.at(c, y, x) - my);
                        cxy += (a.at(c, y, x) - mx) * (b.at(c, y, x) - my);
                    }
                }
                vx /= n;
                vy /= n;
                cxy /= n;
                const double sx = std::sqrt(vx), sy = std::sqrt(vy);
                const double l = (2 * mx * my + c1) / (mx * mx + my * my + c1);
                const double con = (2 * sx * sy + c2) / (vx + vy + c2);
                const double s = (cxy + c3) / (sx * sy + c3);
                chan += l * con * s;
                ++windows;
            }
        }
        total += chan / windows;
        ++count;
    }
    return std::clamp(total / count, 0.0, 1.0);
}

} // namespace

TEST_CASE("l1 loss")
{
    const NormalizedImage ones({3, 5, 1}, 1.0);
    const NormalizedImage zeros({3, 5, 1}, 0.0);
    CHECK(l1_loss(ones, ones) == 0.0);
    CHECK(l1_loss(ones, zeros) == doctest::Approx(0.5));

    RngStream rng(1);
    const auto a = testing::random_normalized({4, 4, 3}, rng);
    const auto b = testing::random_normalized({4, 4, 3}, rng);
    double sum = 0;
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 4; ++x) {
            double pix = 0;
            for (int c = 0; c < 3; ++c) {
                pix += std::fabs(a.at(c, y, x) - b.at(c, y, x));
            }
            sum += pix / 3;
        }
    }
    CHECK(std::fabs(l1_loss(a, b) - sum / (2 * 16)) < 1e-12);
    CHECK_THROWS_AS(l1_loss(a, zeros), ContractError);
}

TEST_CASE("full loss adds the sparsity penalty")
{
    RngStream rng(2);
    const auto a = testing::random_normalized({4, 4, 1}, rng);
    const auto b = testing::random_normalized({4, 4, 1}, rng);
    const BitVector bits(std::vector<std::uint8_t>{1, 1, 0, 1, 1, 1, 0, 0});
    CHECK(full_loss(a, b, bits, 0.0) == l1_loss(a, b));
    CHECK(full_loss(a, a, bits, 0.1) == doctest::Approx(0.5));
    const BitVector more(std::vector<std::uint8_t>{1, 1, 1, 1, 1, 1, 0, 0});
    CHECK(full_loss(a, b, more, 0.1) >= full_loss(a, b, bits, 0.1));
}

TEST_CASE("PSNR")
{
    RngStream rng(3);
    const Image a = testing::random_image({8, 8, 3}, rng);
    CHECK(psnr(a, a) == kPsnrIdentical);
    CHECK(std::isinf(psnr(a, a)));

    for (int trial = 0; trial < 20; ++trial) {
        const Image x = testing::random_image({8, 8, 3}, rng);
        const Image y = testing::random_image({8, 8, 3}, rng);
        CHECK(std::fabs(psnr(x, y) - psnr_oracle(x, y)) < 1e-9);
    }

    Image base({8, 8, 1}, 100);
    Image off({8, 8, 1}, 101);
    CHECK(psnr(base, off) == doctest::Approx(48.1308).epsilon(1e-5));
    CHECK(std::fabs(psnr(base, off) - 10 * std::log10(65025.0)) < 1e-12);

    double last = kPsnrIdentical;
    for (int e = 1; e < 50; e += 7) {
        const double p = psnr(base, Image({8, 8, 1}, static_cast<std::uint8_t>(100 + e)));
        CHECK(p < last);
        last = p;
    }
}

TEST_CASE("PSNR is permutation invariant")
{
    RngStream rng(4);
    const Image a = testing::random_image({6, 6, 1}, rng);
    const Image b = testing::random_image({6, 6, 1}, rng);
    auto pa = std::vector<std::uint8_t>(a.pixels().begin(), a.pixels().end());
    auto pb = std::vector<std::uint8_t>(b.pixels().begin(), b.pixels().end());
    std::reverse(pa.begin(), pa.end());
    std::reverse(pb.begin(), pb.end());
    CHECK(psnr(Image(a.shape(), pa), Image(b.shape(), pb)) == doctest::Approx(psnr(a, b)).epsilon(1e-12));
}

TEST_CASE("SSIM")
{
    RngStream rng(5);

    SUBCASE("identical images")
    {
        const Image a = testing::random_image({16, 16, 3}, rng);
        CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    }

    SUBCASE("matches brute-force windows on random pairs")
    {
        for (int trial = 0; trial < 10; ++trial) {
            const Image a = testing::random_image({16, 16, trial % 2 ? 3 : 1}, rng);
            const Image b = testing::smooth_image({16, 16, trial % 2 ? 3 : 1}, rng);
            CHECK(std::fabs(ssim(a, b) - ssim_oracle(a, b, 8)) < 1e-6);
        }
        // Correlated pair so the clamp is not doing the work.
        const Image a = testing::smooth_image({16, 16, 3}, rng);
        Image b = a;
        for (auto& p : b.pixels()) {
            p = static_cast<std::uint8_t>(std::clamp<int>(p + static_cast<int>(rng.next_u64() % 21) - 10, 0, 255));
        }
        const double expected = ssim_oracle(a, b, 8);
        CHECK(expected > 0.1);
        CHECK(std::fabs(ssim(a, b) - expected) < 1e-6);
    }

    SUBCASE("constant white against constant black")
    {
        const Image w({8, 8, 1}, 255);
        const Image k({8, 8, 1}, 0);
        const double c1 = std::pow(0.01 * 255, 2);
        const double luminance = c1 / (255.0 * 255.0 + c1);
        // Zero variance on both sides: contrast and structure terms are 1.
        CHECK(ssim(w, k) == doctest::Approx(luminance).epsilon(1e-9));
        CHECK(ssim(w, k) < 2e-4);
    }

    SUBCASE("bounds and errors")
    {
        for (int trial = 0; trial < 10; ++trial) {
            const Image a = testing::random_image({9, 12, 3}, rng);
            const Image b = testing::random_image({9, 12, 3}, rng);
            const double s = ssim(a, b);
            CHECK(s >= 0.0);
            CHECK(s <= 1.0);
        }
        CHECK_THROWS_AS(ssim(Image({4, 4, 1}), Image({4, 4, 1})), ConfigError);
        CHECK_THROWS_AS(ssim(Image({8, 8, 1}), Image({8, 8, 3})), ContractError);
    }
}

TEST_CASE("sparsity and payload bytes")
{
    CHECK(payload_bytes(5000) == 625);
    CHECK(payload_bytes(2304) == 288);
    CHECK(payload_bytes(1001) == 126);
    CHECK(sparsity_fraction(BitVector(std::vector<std::uint8_t>(10, 0))) == 0.0);
    CHECK(sparsity_fraction(BitVector(std::vector<std::uint8_t>{1, 0, 1, 0, 0, 0, 1, 0, 0, 0})) == doctest::Approx(0.3));
    CHECK_THROWS_AS(BitVector(std::vector<std::uint8_t>{0, 2}), ContractError);
}

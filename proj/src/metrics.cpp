#include "sparsesbc/metrics.hpp"

#include "sparsesbc/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sparsesbc {

BitVector::BitVector(std::vector<std::uint8_t> bits) : bits_(std::move(bits))
{
    for (auto b : bits_) {
        if (b > 1) {
            throw ContractError("bit vector element is not 0/1");
        }
    }
}

std::size_t BitVector::popcount() const
{
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

namespace {

void require_same_shape(const ImageShape& a, const ImageShape& b)
{
    if (a != b) {
        throw ContractError("image shapes differ: " + to_string(a) + " vs " + to_string(b));
    }
}

} // namespace

double l1_loss(const NormalizedImage& reference, const NormalizedImage& reconstructed)
{
    require_same_shape(reference.shape(), reconstructed.shape());
    const auto& s = reference.shape();
    const auto a = reference.values();
    const auto b = reconstructed.values();
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sum += std::abs(a[i] - b[i]);
    }
    return sum / (2.0 * s.height * s.width * s.channels);
}

double full_loss(const NormalizedImage& reference, const NormalizedImage& reconstructed,
                 const BitVector& bits, double sparsity_weight)
{
    return l1_loss(reference, reconstructed) +
           sparsity_weight * static_cast<double>(bits.popcount());
}

double mse(const Image& reference, const Image& reconstructed)
{
    require_same_shape(reference.shape(), reconstructed.shape());
    const auto a = reference.pixels();
    const auto b = reconstructed.pixels();
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        sum += d * d;
    }
    return sum / static_cast<double>(a.size());
}

double psnr(const Image& reference, const Image& reconstructed)
{
    const double err = mse(reference, reconstructed);
    if (err == 0.0) {
        return kPsnrIdentical;
    }
    return 10.0 * std::log10(255.0 * 255.0 / err);
}

double ssim_from_stats(double mean_x, double mean_y, double var_x, double var_y, double cov_xy,
                       const SsimParams& params)
{
    constexpr double c1 = (0.01 * 255.0) * (0.01 * 255.0);
    constexpr double c2 = (0.03 * 255.0) * (0.03 * 255.0);
    constexpr double c3 = c2 / 2.0;
    const double sd_x = std::sqrt(std::max(var_x, 0.0));
    const double sd_y = std::sqrt(std::max(var_y, 0.0));

    const double luminance = (2.0 * mean_x * mean_y + c1) / (mean_x * mean_x + mean_y * mean_y + c1);
    const double contrast = (2.0 * sd_x * sd_y + c2) / (var_x + var_y + c2);
    const double structure = (cov_xy + c3) / (sd_x * sd_y + c3);

    // Only the structure term can be negative; a fractional power of it is
    // undefined, so it is clamped at zero in that case.
    auto power = [](double base, double exp) {
        if (exp == 1.0) {
            return base;
        }
        return std::pow(std::max(base, 0.0), exp);
    };
    return power(luminance, params.luminance_exp) * power(contrast, params.contrast_exp) *
           power(structure, params.structure_exp);
}

double ssim(const Image& reference, const Image& reconstructed, const SsimParams& params)
{
    require_same_shape(reference.shape(), reconstructed.shape());
    const int h = reference.height();
    const int w = reference.width();
    const int win = params.window;
    if (win <= 0 || win > h || win > w) {
        throw ConfigError("SSIM window " + std::to_string(win) + " does not fit image " +
                          to_string(reference.shape()));
    }

    // Summed-area tables of x, y, x^2, y^2, xy; one extra row/column of zeros.
    const int sw = w + 1;
    std::vector<double> sx((h + 1) * sw), sy(sx.size()), sxx(sx.size()), syy(sx.size()), sxy(sx.size());
    auto at = [sw](std::vector<double>& t, int y, int x) -> double& { return t[y * sw + x]; };

    const double n = static_cast<double>(win) * win;
    double total = 0.0;
    for (int c = 0; c < reference.channels(); ++c) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double a = reference.at(c, y, x);
                const double b = reconstructed.at(c, y, x);
                at(sx, y + 1, x + 1) = a + at(sx, y, x + 1) + at(sx, y + 1, x) - at(sx, y, x);
                at(sy, y + 1, x + 1) = b + at(sy, y, x + 1) + at(sy, y + 1, x) - at(sy, y, x);
                at(sxx, y + 1, x + 1) = a * a + at(sxx, y, x + 1) + at(sxx, y + 1, x) - at(sxx, y, x);
                at(syy, y + 1, x + 1) = b * b + at(syy, y, x + 1) + at(syy, y + 1, x) - at(syy, y, x);
                at(sxy, y + 1, x + 1) = a * b + at(sxy, y, x + 1) + at(sxy, y + 1, x) - at(sxy, y, x);
            }
        }
        auto box = [&](std::vector<double>& t, int y, int x) {
            return at(t, y + win, x + win) - at(t, y, x + win) - at(t, y + win, x) + at(t, y, x);
        };

        double channel_sum = 0.0;
        for (int y = 0; y + win <= h; ++y) {
            for (int x = 0; x + win <= w; ++x) {
                const double mx = box(sx, y, x) / n;
                const double my = box(sy, y, x) / n;
                const double vx = box(sxx, y, x) / n - mx * mx;
                const double vy = box(syy, y, x) / n - my * my;
                const double cxy = box(sxy, y, x) / n - mx * my;
                channel_sum += ssim_from_stats(mx, my, vx, vy, cxy, params);
            }
        }
        total += channel_sum / static_cast<double>((h - win + 1) * (w - win + 1));
    }
    return std::clamp(total / reference.channels(), 0.0, 1.0);
}

double sparsity_fraction(const BitVector& bits)
{
    if (bits.size() == 0) {
        return 0.0;
    }
    return static_cast<double>(bits.popcount()) / static_cast<double>(bits.size());
}

std::size_t payload_bytes(std::size_t bit_count)
{
    return (bit_count + 7) / 8;
}

MetricReport measure(const Image& reference, const NormalizedImage& reconstructed,
                     const BitVector& bits, double sparsity_weight)
{
    const NormalizedImage ref = normalize(reference);
    const Image recon = denormalize(reconstructed);
    MetricReport r;
    r.l1_loss = l1_loss(ref, reconstructed);
    r.full_loss = r.l1_loss + sparsity_weight * static_cast<double>(bits.popcount());
    r.psnr_db = psnr(reference, recon);
    r.ssim = ssim(reference, recon);
    r.sparsity_fraction = sparsity_fraction(bits);
    r.payload_bytes = payload_bytes(bits);
    return r;
}

} // namespace sparsesbc

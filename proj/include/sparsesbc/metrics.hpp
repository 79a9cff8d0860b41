#pragma once

#include "sparsesbc/bits.hpp"
#include "sparsesbc/imaging.hpp"

#include <cstddef>
#include <limits>

namespace sparsesbc {

inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

// Semantic L1 loss on normalized images:
//   L = 1/(2 d1 d2) * sum_{i,j} mean_c |I(c,i,j) - Î(c,i,j)|
double l1_loss(const NormalizedImage& reference, const NormalizedImage& reconstructed);

// l1_loss + eps * popcount(bits).
double full_loss(const NormalizedImage& reference, const NormalizedImage& reconstructed,
                 const BitVector& bits, double sparsity_weight);

double mse(const Image& reference, const Image& reconstructed);

// 10 log10(255^2 / MSE) over all pixels and channels; +inf when identical.
double psnr(const Image& reference, const Image& reconstructed);

struct SsimParams {
    double luminance_exp = 1.0;
    double contrast_exp = 1.0;
    double structure_exp = 1.0;
    int window = 8;
};

// Single-scale SSIM with a uniform window slid at stride 1. Each window uses
// population statistics; the result is averaged over windows and channels and
// clamped to [0, 1].
double ssim(const Image& reference, const Image& reconstructed, const SsimParams& params = {});

// Per-window SSIM from precomputed statistics (the three-factor product).
double ssim_from_stats(double mean_x, double mean_y, double var_x, double var_y, double cov_xy,
                       const SsimParams& params);

double sparsity_fraction(const BitVector& bits);
std::size_t payload_bytes(std::size_t bit_count);
inline std::size_t payload_bytes(const BitVector& bits) { return payload_bytes(bits.size()); }

struct MetricReport {
    double l1_loss = 0.0;
    double full_loss = 0.0;
    double psnr_db = 0.0;
    double ssim = 0.0;
    double sparsity_fraction = 0.0;
    std::size_t payload_bytes = 0;
};

MetricReport measure(const Image& reference, const NormalizedImage& reconstructed,
                     const BitVector& bits, double sparsity_weight);

} // namespace sparsesbc

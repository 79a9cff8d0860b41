#pragma once

#include "sparsesbc/bits.hpp"
#include "sparsesbc/rng.hpp"

#include <cstdint>
#include <string>

namespace sparsesbc {

enum class ChannelKind { Awgn, Pif };

// How the PIF gain h is drawn. Rayleigh magnitude with E[h^2] = 1 is the
// default; Fixed uses `fixed_gain` for every transmission.
enum class FadingModel { Rayleigh, Fixed };

struct ChannelConfig {
    ChannelKind kind = ChannelKind::Awgn;
    double snr_db = 10.0;
    std::uint64_t seed = 0;
    // Forces zero noise regardless of snr_db.
    bool noiseless = false;
    FadingModel fading = FadingModel::Rayleigh;
    double fixed_gain = 1.0;
};

struct ChannelRealization {
    double gain = 1.0;
    double noise_sigma = 0.0;
};

std::string to_string(ChannelKind kind);
ChannelKind channel_kind_from_string(const std::string& name);
std::string to_string(FadingModel model);
FadingModel fading_model_from_string(const std::string& name);

// sqrt(signal_power / 10^(snr_db/10)); +inf dB gives 0.
double noise_sigma_for_snr(double signal_power, double snr_db);

// Channel gain for one transmitted vector. AWGN returns 1 without touching
// the stream.
double sample_fading(const ChannelConfig& cfg, RngStream& rng);

// y_i = h * x_i + n_i with i.i.d. real Gaussian n_i. The noise level is
// calibrated against the empirical power mean(x_i^2) of this vector.
ReceivedVector transmit(const BitVector& bits, const ChannelConfig& cfg, RngStream& rng,
                        ChannelRealization* realization = nullptr);

} // namespace sparsesbc

#include "sparsesbc/channel.hpp"

#include "sparsesbc/error.hpp"

#include <cmath>

namespace sparsesbc {

std::string to_string(ChannelKind kind)
{
    return kind == ChannelKind::Awgn ? "AWGN" : "PIF";
}

ChannelKind channel_kind_from_string(const std::string& name)
{
    if (name == "AWGN" || name == "awgn") {
        return ChannelKind::Awgn;
    }
    if (name == "PIF" || name == "pif") {
        return ChannelKind::Pif;
    }
    throw ConfigError("unknown channel kind '" + name + "' (expected AWGN or PIF)");
}

std::string to_string(FadingModel model)
{
    return model == FadingModel::Rayleigh ? "rayleigh" : "fixed";
}

FadingModel fading_model_from_string(const std::string& name)
{
    if (name == "rayleigh") {
        return FadingModel::Rayleigh;
    }
    if (name == "fixed") {
        return FadingModel::Fixed;
    }
    throw ConfigError("unknown fading model '" + name + "' (expected rayleigh or fixed)");
}

double noise_sigma_for_snr(double signal_power, double snr_db)
{
    if (!(signal_power >= 0.0)) {
        throw ContractError("signal power must be non-negative");
    }
    if (std::isinf(snr_db) && snr_db > 0) {
        return 0.0;
    }
    return std::sqrt(signal_power / std::pow(10.0, snr_db / 10.0));
}

double sample_fading(const ChannelConfig& cfg, RngStream& rng)
{
    if (cfg.kind == ChannelKind::Awgn) {
        return 1.0;
    }
    if (cfg.fading == FadingModel::Fixed) {
        return cfg.fixed_gain;
    }
    // |g| with g complex standard normal scaled so E[h^2] = 1.
    const double re = rng.normal();
    const double im = rng.normal();
    return std::sqrt((re * re + im * im) / 2.0);
}

ReceivedVector transmit(const BitVector& bits, const ChannelConfig& cfg, RngStream& rng,
                        ChannelRealization* realization)
{
    const std::size_t n = bits.size();
    const double gain = sample_fading(cfg, rng);
    double sigma = 0.0;
    if (!cfg.noiseless && n > 0) {
        const double power = static_cast<double>(bits.popcount()) / static_cast<double>(n);
        sigma = noise_sigma_for_snr(power, cfg.snr_db);
    }

    ReceivedVector y;
    y.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        y.values[i] = gain * static_cast<double>(bits[i]);
    }
    if (sigma > 0.0) {
        for (auto& v : y.values) {
            v += sigma * rng.normal();
        }
    }
    if (realization != nullptr) {
        *realization = {gain, sigma};
    }
    return y;
}

} // namespace sparsesbc

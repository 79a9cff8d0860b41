#pragma once

#include "sparsesbc/bits.hpp"
#include "sparsesbc/channel.hpp"
#include "sparsesbc/checkpoint.hpp"
#include "sparsesbc/imaging.hpp"
#include "sparsesbc/optimizer.hpp"
#include "sparsesbc/rng.hpp"
#include "sparsesbc/transceiver.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sparsesbc {

enum class SigmaMode { Constant, Annealed, Learnable };
enum class RxMode { SelfCritic, DirectBackprop };

std::string to_string(SigmaMode mode);
SigmaMode sigma_mode_from_string(const std::string& name);
std::string to_string(RxMode mode);
RxMode rx_mode_from_string(const std::string& name);

struct TrainConfig {
    int batch_size = 64;
    double learning_rate = 1e-4;
    int samples = 5;
    int epochs = 200;
    double sparsity_weight = 0.1;
    SigmaMode sigma_mode = SigmaMode::Constant;
    double sigma0 = 0.1;
    RxMode rx_mode = RxMode::SelfCritic;
    OptimizerKind optimizer = OptimizerKind::Sgd;
    // Master seed; named streams (init, sampler, channel, shuffle, eval) derive
    // from it unless overridden in `stream_seeds`.
    std::uint64_t seed = 1;
    std::map<std::string, std::uint64_t> stream_seeds;
    // Number of leading training images scored for each RunRecord (0 = all).
    std::size_t eval_images = 0;

    // Throws ConfigError (m < 2, T < 1, alpha <= 0, sigma <= 0, eps < 0, E < 0).
    void validate() const;
    std::uint64_t stream_seed(const std::string& name) const;
};

struct SigmaSchedule {
    SigmaMode mode = SigmaMode::Constant;
    double sigma0 = 0.1;
    int epochs = 1;

    // Constant / annealed value for `epoch`; learnable mode reports sigma0.
    // Annealing is linear from sigma0 at epoch 1 to sigma0/10 at the last epoch.
    double scalar(int epoch) const;
};

// Per-component exploration scale; learnable mode uses sigmoid(a_i).
std::vector<double> sigma_value(const SigmaSchedule& schedule, int epoch, std::span<const double> activation);

// 1 - (L + eps * popcount(bits)).
double reward_tx(const NormalizedImage& reference, const NormalizedImage& reconstructed,
                 const BitVector& bits, double sparsity_weight);
// 1 - L.
double reward_rx(const NormalizedImage& reference, const NormalizedImage& reconstructed);

struct SampleBundle {
    std::vector<double> mean;
    std::vector<double> sigma;
    std::vector<std::vector<double>> perturbed;
    std::vector<BitVector> bits;
    std::vector<double> rewards;
    std::vector<double> advantages;
};

// m draws a_i = mean + sigma * z_i, each binarized for transmission.
SampleBundle sample_actions(std::span<const double> mean, std::span<const double> sigma, int samples,
                            RngStream& rng);

// adv_i = theta_i - avg_{k != i} theta_k, evaluated as the mean of pairwise
// differences so that equal rewards give exactly zero.
std::vector<double> leave_one_out_advantages(std::span<const double> rewards);

// d/d(mean) of the Gaussian log-density: (a - mean) / sigma^2 per component.
std::vector<double> log_prob_grad(std::span<const double> perturbed, std::span<const double> mean,
                                  std::span<const double> sigma);

// Self-critic policy-gradient estimate with respect to the mean for one
// image: (1 / (m T)) * sum_i adv_i * log_prob_grad_i. Requires rewards and
// advantages in `bundle`.
std::vector<double> policy_gradient_wrt_mean(const SampleBundle& bundle, int batch_size);

// --- frozen peer paths ------------------------------------------------------

struct PathOutput {
    NormalizedImage image;
    // Derivative information the path chooses to expose. The transmitter
    // update never reads it.
    std::shared_ptr<const DecoderTrace<float>> derivative;
};

// Everything after the transmitter: channel followed by the frozen receiver.
class ReceiverPath {
public:
    virtual ~ReceiverPath() = default;
    virtual PathOutput run(const BitVector& bits, RngStream& channel_rng) const = 0;
};

class ChannelDecoderPath final : public ReceiverPath {
public:
    ChannelDecoderPath(ChannelConfig channel, const DecoderParams<float>& theta, const ArchConfig& arch,
                       bool expose_derivative = false)
        : channel_(channel), theta_(theta), arch_(arch), expose_(expose_derivative)
    {
    }
    PathOutput run(const BitVector& bits, RngStream& channel_rng) const override;

private:
    ChannelConfig channel_;
    const DecoderParams<float>& theta_;
    const ArchConfig& arch_;
    bool expose_;
};

// Forwards values only; any derivative information from `inner` is dropped.
class NoGradBarrier final : public ReceiverPath {
public:
    explicit NoGradBarrier(const ReceiverPath& inner) : inner_(inner) {}
    PathOutput run(const BitVector& bits, RngStream& channel_rng) const override
    {
        return {inner_.run(bits, channel_rng).image, nullptr};
    }

private:
    const ReceiverPath& inner_;
};

// --- steps -----------------------------------------------------------------

struct TrainerStreams {
    RngStream sampler;
    RngStream channel;
    RngStream shuffle;

    static TrainerStreams from_config(const TrainConfig& config);
};

struct StepStats {
    std::size_t images = 0;
    double reward_sum = 0.0;
    double l1_sum = 0.0;
    double sparsity_sum = 0.0;
    double sigma_sum = 0.0;
    std::size_t sigma_count = 0;
    double sigma_min = 0.0;
    double sigma_max = 0.0;

    void merge(const StepStats& other);
};

using Batch = std::span<const NormalizedImage* const>;

// Ascent direction grad_phi J for one batch; theta is never differentiated.
EncoderParams<float> tx_policy_gradient(Batch batch, const EncoderParams<float>& phi, const ArchConfig& arch,
                                        const ReceiverPath& path, const TrainConfig& config,
                                        const SigmaSchedule& schedule, int epoch, TrainerStreams& streams,
                                        StepStats* stats = nullptr);

// Computes the policy gradient and applies phi <- phi + alpha * step.
// Throws TrainingAbort (phi untouched) on a non-finite gradient.
StepStats train_tx_step(Batch batch, EncoderParams<float>& phi, const ArchConfig& arch,
                        const ReceiverPath& path, const TrainConfig& config, const SigmaSchedule& schedule,
                        int epoch, Optimizer& optimizer, TrainerStreams& streams);

StepStats train_tx_step(Batch batch, EncoderParams<float>& phi, const DecoderParams<float>& theta,
                        const ArchConfig& arch, const ChannelConfig& channel, const TrainConfig& config,
                        const SigmaSchedule& schedule, int epoch, Optimizer& optimizer,
                        TrainerStreams& streams);

// Ascent direction grad_theta J for one batch with phi frozen.
DecoderParams<float> rx_gradient(Batch batch, const EncoderParams<float>& phi, const DecoderParams<float>& theta,
                                 const ArchConfig& arch, const ChannelConfig& channel, const TrainConfig& config,
                                 const SigmaSchedule& schedule, int epoch, TrainerStreams& streams,
                                 StepStats* stats = nullptr);

StepStats train_rx_step(Batch batch, const EncoderParams<float>& phi, DecoderParams<float>& theta,
                        const ArchConfig& arch, const ChannelConfig& channel, const TrainConfig& config,
                        const SigmaSchedule& schedule, int epoch, Optimizer& optimizer,
                        TrainerStreams& streams);

// --- alternate training ------------------------------------------------------

struct RunRecord {
    int epoch = 0;
    std::string sigma_mode;
    double reward_tx = 0.0;
    double reward_rx = 0.0;
    double l1_loss = 0.0;
    double psnr_db = 0.0;
    double ssim = 0.0;
    double sparsity_fraction = 0.0;
    double sigma_mean = 0.0;
    double sigma_min = 0.0;
    double sigma_max = 0.0;
    double wall_seconds = 0.0;
};

struct TrainerState {
    ArchConfig arch;
    EncoderParams<float> encoder;
    DecoderParams<float> decoder;
    Optimizer encoder_opt;
    Optimizer decoder_opt;
    TrainerStreams streams;
    int epoch = 0;

    static TrainerState fresh(const ArchConfig& arch, const TrainConfig& config);
    Checkpoint to_checkpoint(const nlohmann::json& extra = nlohmann::json::object()) const;
    static TrainerState from_checkpoint(const Checkpoint& ckpt);
};

struct TrainOptions {
    std::optional<std::filesystem::path> checkpoint_dir;
    int checkpoint_interval = 0; // 0 disables periodic checkpoints
    std::function<void(const RunRecord&)> on_record;
    nlohmann::json checkpoint_extra = nlohmann::json::object();
};

struct TrainResult {
    TrainerState state;
    std::vector<RunRecord> records;
};

// Per epoch: a TX pass over every batch with theta frozen, then an RX pass
// with phi frozen, then one RunRecord scored on the evaluation subset.
// Resumes from `start` when given (its epoch counter says where to continue).
TrainResult train_alternate(const Dataset& dataset, const ArchConfig& arch, const ChannelConfig& channel,
                            const TrainConfig& config, const TrainOptions& options = {},
                            std::optional<TrainerState> start = std::nullopt);

struct EvalSummary {
    double l1_loss = 0.0;
    double psnr_db = 0.0;
    double ssim = 0.0;
    double sparsity_fraction = 0.0;
    std::size_t images = 0;
};

// Deterministic transmission (no exploration noise) of each image through
// the channel and receiver; PSNR/SSIM on denormalized pixels.
EvalSummary evaluate(std::span<const Image> images, const EncoderParams<float>& phi,
                     const DecoderParams<float>& theta, const ArchConfig& arch, const ChannelConfig& channel,
                     RngStream& channel_rng);

} // namespace sparsesbc

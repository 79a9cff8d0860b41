#include "sparsesbc/trainer.hpp"

#include "sparsesbc/error.hpp"
#include "sparsesbc/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>

namespace sparsesbc {

std::string to_string(SigmaMode mode)
{
    switch (mode) {
    case SigmaMode::Constant: return "constant";
    case SigmaMode::Annealed: return "annealed";
    case SigmaMode::Learnable: return "learnable";
    }
    return "constant";
}

SigmaMode sigma_mode_from_string(const std::string& name)
{
    if (name == "constant") {
        return SigmaMode::Constant;
    }
    if (name == "annealed") {
        return SigmaMode::Annealed;
    }
    if (name == "learnable") {
        return SigmaMode::Learnable;
    }
    throw ConfigError("unknown sigma mode '" + name + "' (expected constant, annealed or learnable)");
}

std::string to_string(RxMode mode)
{
    return mode == RxMode::SelfCritic ? "self_critic" : "direct_backprop";
}

RxMode rx_mode_from_string(const std::string& name)
{
    if (name == "self_critic") {
        return RxMode::SelfCritic;
    }
    if (name == "direct_backprop") {
        return RxMode::DirectBackprop;
    }
    throw ConfigError("unknown rx mode '" + name + "' (expected self_critic or direct_backprop)");
}

void TrainConfig::validate() const
{
    if (samples < 2) {
        throw ConfigError("self-critic needs at least m = 2 samples (got " + std::to_string(samples) + ")");
    }
    if (batch_size < 1) {
        throw ConfigError("batch size must be at least 1");
    }
    if (!(learning_rate > 0.0)) {
        throw ConfigError("learning rate must be positive");
    }
    if (!(sigma0 > 0.0)) {
        throw ConfigError("sigma0 must be positive");
    }
    if (!(sparsity_weight >= 0.0)) {
        throw ConfigError("sparsity weight must be non-negative");
    }
    if (epochs < 0) {
        throw ConfigError("epoch count must be non-negative");
    }
}

double SigmaSchedule::scalar(int epoch) const
{
    if (mode != SigmaMode::Annealed || epochs <= 1) {
        return sigma0;
    }
    const double progress = std::clamp(static_cast<double>(epoch - 1) / (epochs - 1), 0.0, 1.0);
    return sigma0 * (1.0 - 0.9 * progress);
}

std::vector<double> sigma_value(const SigmaSchedule& schedule, int epoch, std::span<const double> activation)
{
    std::vector<double> sigma(activation.size());
    if (schedule.mode == SigmaMode::Learnable) {
        std::transform(activation.begin(), activation.end(), sigma.begin(),
                       [](double a) { return 1.0 / (1.0 + std::exp(-a)); });
    } else {
        std::fill(sigma.begin(), sigma.end(), schedule.scalar(epoch));
    }
    return sigma;
}

double reward_tx(const NormalizedImage& reference, const NormalizedImage& reconstructed,
                 const BitVector& bits, double sparsity_weight)
{
    return 1.0 - full_loss(reference, reconstructed, bits, sparsity_weight);
}

double reward_rx(const NormalizedImage& reference, const NormalizedImage& reconstructed)
{
    return 1.0 - l1_loss(reference, reconstructed);
}

SampleBundle sample_actions(std::span<const double> mean, std::span<const double> sigma, int samples,
                            RngStream& rng)
{
    if (samples < 2) {
        throw ContractError("sample_actions needs m >= 2");
    }
    if (sigma.size() != mean.size()) {
        throw ContractError("sigma and mean lengths differ");
    }
    SampleBundle b;
    b.mean.assign(mean.begin(), mean.end());
    b.sigma.assign(sigma.begin(), sigma.end());
    b.perturbed.resize(static_cast<std::size_t>(samples));
    for (auto& a : b.perturbed) {
        a.resize(mean.size());
        for (std::size_t j = 0; j < mean.size(); ++j) {
            a[j] = mean[j] + sigma[j] * rng.normal();
        }
        b.bits.push_back(quantize(a));
    }
    return b;
}

std::vector<double> leave_one_out_advantages(std::span<const double> rewards)
{
    const std::size_t m = rewards.size();
    if (m < 2) {
        throw ContractError("leave-one-out baseline needs at least two rewards");
    }
    std::vector<double> adv(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double sum = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            if (k != i) {
                sum += rewards[i] - rewards[k];
            }
        }
        adv[i] = sum / static_cast<double>(m - 1);
    }
    return adv;
}

std::vector<double> log_prob_grad(std::span<const double> perturbed, std::span<const double> mean,
                                  std::span<const double> sigma)
{
    if (perturbed.size() != mean.size() || sigma.size() != mean.size()) {
        throw ContractError("log_prob_grad length mismatch");
    }
    std::vector<double> g(mean.size());
    for (std::size_t j = 0; j < mean.size(); ++j) {
        if (!(sigma[j] > 0.0)) {
            throw ContractError("Gaussian policy needs sigma > 0");
        }
        g[j] = (perturbed[j] - mean[j]) / (sigma[j] * sigma[j]);
    }
    return g;
}

std::vector<double> policy_gradient_wrt_mean(const SampleBundle& bundle, int batch_size)
{
    const std::size_t m = bundle.perturbed.size();
    if (bundle.advantages.size() != m) {
        throw ContractError("bundle has no advantages for its samples");
    }
    std::vector<double> g(bundle.mean.size(), 0.0);
    const double scale = 1.0 / (static_cast<double>(m) * batch_size);
    for (std::size_t i = 0; i < m; ++i) {
        const double adv = bundle.advantages[i];
        if (adv == 0.0) {
            continue;
        }
        const auto lp = log_prob_grad(bundle.perturbed[i], bundle.mean, bundle.sigma);
        for (std::size_t j = 0; j < g.size(); ++j) {
            g[j] += scale * adv * lp[j];
        }
    }
    return g;
}

PathOutput ChannelDecoderPath::run(const BitVector& bits, RngStream& channel_rng) const
{
    const ReceivedVector y = transmit(bits, channel_, channel_rng);
    nn::Vector<float> received(static_cast<Eigen::Index>(y.size()));
    for (std::size_t i = 0; i < y.size(); ++i) {
        received[static_cast<Eigen::Index>(i)] = static_cast<float>(y.values[i]);
    }
    auto trace = std::make_shared<DecoderTrace<float>>(decoder_forward(theta_, arch_, received));
    PathOutput out{to_image<float>(trace->output, arch_.image), nullptr};
    if (expose_) {
        out.derivative = std::move(trace);
    }
    return out;
}

std::uint64_t TrainConfig::stream_seed(const std::string& name) const
{
    auto it = stream_seeds.find(name);
    return it != stream_seeds.end() ? it->second : mix_seed(seed, name);
}

TrainerStreams TrainerStreams::from_config(const TrainConfig& config)
{
    return {RngStream(config.stream_seed("sampler")), RngStream(config.stream_seed("channel")),
            RngStream(config.stream_seed("shuffle"))};
}

void StepStats::merge(const StepStats& other)
{
    if (other.sigma_count > 0) {
        sigma_min = sigma_count > 0 ? std::min(sigma_min, other.sigma_min) : other.sigma_min;
        sigma_max = sigma_count > 0 ? std::max(sigma_max, other.sigma_max) : other.sigma_max;
    }
    images += other.images;
    reward_sum += other.reward_sum;
    l1_sum += other.l1_sum;
    sparsity_sum += other.sparsity_sum;
    sigma_sum += other.sigma_sum;
    sigma_count += other.sigma_count;
}

namespace {

template <typename Params>
bool gradient_finite(Params& grad)
{
    for (const auto& t : grad.tensors()) {
        if (!t.tensor->allFinite()) {
            return false;
        }
    }
    return true;
}

nn::Vector<float> to_float(const std::vector<double>& v)
{
    nn::Vector<float> out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[static_cast<Eigen::Index>(i)] = static_cast<float>(v[i]);
    }
    return out;
}

void note_sigma(StepStats& stats, std::span<const double> sigma)
{
    for (double s : sigma) {
        if (stats.sigma_count == 0) {
            stats.sigma_min = stats.sigma_max = s;
        } else {
            stats.sigma_min = std::min(stats.sigma_min, s);
            stats.sigma_max = std::max(stats.sigma_max, s);
        }
        stats.sigma_sum += s;
        ++stats.sigma_count;
    }
}

} // namespace

EncoderParams<float> tx_policy_gradient(Batch batch, const EncoderParams<float>& phi, const ArchConfig& arch,
                                        const ReceiverPath& path, const TrainConfig& config,
                                        const SigmaSchedule& schedule, int epoch, TrainerStreams& streams,
                                        StepStats* stats)
{
    EncoderParams<float> grad = phi.zeros_like();
    const int batch_size = static_cast<int>(batch.size());
    for (const NormalizedImage* img : batch) {
        const auto trace = encoder_forward(phi, arch, *img);
        const std::vector<double> mean(trace.activation.data(), trace.activation.data() + trace.activation.size());
        const auto sigma = sigma_value(schedule, epoch, mean);

        SampleBundle bundle = sample_actions(mean, sigma, config.samples, streams.sampler);
        for (const auto& bits : bundle.bits) {
            const PathOutput out = path.run(bits, streams.channel);
            bundle.rewards.push_back(reward_tx(*img, out.image, bits, config.sparsity_weight));
            if (stats != nullptr) {
                stats->l1_sum += l1_loss(*img, out.image);
                stats->sparsity_sum += sparsity_fraction(bits);
            }
        }
        bundle.advantages = leave_one_out_advantages(bundle.rewards);
        const auto d_mean = policy_gradient_wrt_mean(bundle, batch_size);
        encoder_backward(phi, arch, trace, to_float(d_mean), grad);

        if (stats != nullptr) {
            stats->images += bundle.rewards.size();
            for (double r : bundle.rewards) {
                stats->reward_sum += r;
            }
            note_sigma(*stats, sigma);
        }
    }
    return grad;
}

StepStats train_tx_step(Batch batch, EncoderParams<float>& phi, const ArchConfig& arch,
                        const ReceiverPath& path, const TrainConfig& config, const SigmaSchedule& schedule,
                        int epoch, Optimizer& optimizer, TrainerStreams& streams)
{
    StepStats stats;
    auto grad = tx_policy_gradient(batch, phi, arch, path, config, schedule, epoch, streams, &stats);
    if (!gradient_finite(grad)) {
        throw TrainingAbort("non-finite transmitter gradient at epoch " + std::to_string(epoch));
    }
    optimizer.ascend(phi, grad);
    return stats;
}

StepStats train_tx_step(Batch batch, EncoderParams<float>& phi, const DecoderParams<float>& theta,
                        const ArchConfig& arch, const ChannelConfig& channel, const TrainConfig& config,
                        const SigmaSchedule& schedule, int epoch, Optimizer& optimizer,
                        TrainerStreams& streams)
{
    const ChannelDecoderPath path(channel, theta, arch);
    return train_tx_step(batch, phi, arch, path, config, schedule, epoch, optimizer, streams);
}

DecoderParams<float> rx_gradient(Batch batch, const EncoderParams<float>& phi, const DecoderParams<float>& theta,
                                 const ArchConfig& arch, const ChannelConfig& channel, const TrainConfig& config,
                                 const SigmaSchedule& schedule, int epoch, TrainerStreams& streams,
                                 StepStats* stats)
{
    DecoderParams<float> grad = theta.zeros_like();
    const double batch_size = static_cast<double>(batch.size());
    const double sigma = schedule.scalar(epoch);
    for (const NormalizedImage* img : batch) {
        const BitVector bits = transmit_bits(*img, phi, arch);
        const ReceivedVector y = transmit(bits, channel, streams.channel);
        const auto trace = decoder_forward(theta, arch, to_float(y.values));
        const nn::Vector<float> mean = flatten<float>(trace.output);
        const NormalizedImage recon = to_image<float>(trace.output, arch.image);

        nn::Vector<float> d_output;
        if (config.rx_mode == RxMode::DirectBackprop) {
            d_output = -l1_loss_gradient<float>(mean, *img) / static_cast<float>(batch_size);
        } else {
            // Gaussian policy over pixel space centred on the decoder output;
            // rewards score the clamped samples.
            const std::size_t m = static_cast<std::size_t>(config.samples);
            std::vector<std::vector<double>> noise(m, std::vector<double>(img->size()));
            std::vector<double> rewards(m);
            for (std::size_t i = 0; i < m; ++i) {
                std::vector<double> sample(img->size());
                for (std::size_t j = 0; j < sample.size(); ++j) {
                    noise[i][j] = sigma * streams.sampler.normal();
                    sample[j] = static_cast<double>(mean[static_cast<Eigen::Index>(j)]) + noise[i][j];
                }
                rewards[i] = reward_rx(*img, NormalizedImage::clamped(img->shape(), std::move(sample)));
            }
            const auto adv = leave_one_out_advantages(rewards);
            std::vector<double> d(img->size(), 0.0);
            const double scale = 1.0 / (static_cast<double>(m) * batch_size * sigma * sigma);
            for (std::size_t i = 0; i < m; ++i) {
                if (adv[i] == 0.0) {
                    continue;
                }
                for (std::size_t j = 0; j < d.size(); ++j) {
                    d[j] += scale * adv[i] * noise[i][j];
                }
            }
            d_output = to_float(d);
        }
        decoder_backward(theta, arch, trace, d_output, grad);

        if (stats != nullptr) {
            const double l1 = l1_loss(*img, recon);
            stats->images += 1;
            stats->reward_sum += 1.0 - l1;
            stats->l1_sum += l1;
            stats->sparsity_sum += sparsity_fraction(bits);
        }
    }
    return grad;
}

StepStats train_rx_step(Batch batch, const EncoderParams<float>& phi, DecoderParams<float>& theta,
                        const ArchConfig& arch, const ChannelConfig& channel, const TrainConfig& config,
                        const SigmaSchedule& schedule, int epoch, Optimizer& optimizer,
                        TrainerStreams& streams)
{
    StepStats stats;
    auto grad = rx_gradient(batch, phi, theta, arch, channel, config, schedule, epoch, streams, &stats);
    if (!gradient_finite(grad)) {
        throw TrainingAbort("non-finite receiver gradient at epoch " + std::to_string(epoch));
    }
    optimizer.ascend(theta, grad);
    return stats;
}

// --- state / checkpoints ---------------------------------------------------------

TrainerState TrainerState::fresh(const ArchConfig& arch, const TrainConfig& config)
{
    auto params = init_params<float>(arch, config.stream_seed("init"));
    return {arch,
            std::move(params.encoder),
            std::move(params.decoder),
            Optimizer(config.optimizer, config.learning_rate),
            Optimizer(config.optimizer, config.learning_rate),
            TrainerStreams::from_config(config),
            0};
}

Checkpoint TrainerState::to_checkpoint(const nlohmann::json& extra) const
{
    Checkpoint ckpt{encoder, decoder, {arch, epoch, extra}, {}};
    nlohmann::json enc_opt;
    nlohmann::json dec_opt;
    encoder_opt.export_state("optim.encoder.", ckpt.aux, enc_opt);
    decoder_opt.export_state("optim.decoder.", ckpt.aux, dec_opt);
    ckpt.meta.extra["optimizer"] = {{"encoder", enc_opt}, {"decoder", dec_opt}};
    ckpt.meta.extra["rng"] = {
        {"sampler", streams.sampler.save_state()},
        {"channel", streams.channel.save_state()},
        {"shuffle", streams.shuffle.save_state()},
    };
    return ckpt;
}

TrainerState TrainerState::from_checkpoint(const Checkpoint& ckpt)
{
    TrainerState s;
    s.arch = ckpt.meta.arch;
    s.encoder = ckpt.encoder;
    s.decoder = ckpt.decoder;
    s.epoch = ckpt.meta.epoch;
    const auto& extra = ckpt.meta.extra;
    if (!extra.contains("optimizer") || !extra.contains("rng")) {
        throw CheckpointError("checkpoint carries no trainer state (optimizer/rng)");
    }
    s.encoder_opt.import_state("optim.encoder.", ckpt.aux, extra["optimizer"]["encoder"]);
    s.decoder_opt.import_state("optim.decoder.", ckpt.aux, extra["optimizer"]["decoder"]);
    s.streams.sampler.restore_state(extra["rng"]["sampler"].get<std::string>());
    s.streams.channel.restore_state(extra["rng"]["channel"].get<std::string>());
    s.streams.shuffle.restore_state(extra["rng"]["shuffle"].get<std::string>());
    return s;
}

// --- evaluation / alternate loop -----------------------------------------------

EvalSummary evaluate(std::span<const Image> images, const EncoderParams<float>& phi,
                     const DecoderParams<float>& theta, const ArchConfig& arch, const ChannelConfig& channel,
                     RngStream& channel_rng)
{
    EvalSummary s;
    for (const Image& img : images) {
        const NormalizedImage input = normalize(img);
        const BitVector bits = transmit_bits(input, phi, arch);
        const ReceivedVector y = transmit(bits, channel, channel_rng);
        const NormalizedImage recon = reconstruct(y, theta, arch);
        const Image pixels = denormalize(recon);
        s.l1_loss += l1_loss(input, recon);
        s.psnr_db += psnr(img, pixels);
        s.ssim += ssim(img, pixels);
        s.sparsity_fraction += sparsity_fraction(bits);
        ++s.images;
    }
    if (s.images > 0) {
        const auto n = static_cast<double>(s.images);
        s.l1_loss /= n;
        s.psnr_db /= n;
        s.ssim /= n;
        s.sparsity_fraction /= n;
    }
    return s;
}

namespace {

void save_state(const TrainerState& state, const TrainOptions& options, const std::string& name)
{
    if (!options.checkpoint_dir) {
        return;
    }
    std::filesystem::create_directories(*options.checkpoint_dir);
    save_checkpoint(state.to_checkpoint(options.checkpoint_extra), *options.checkpoint_dir / name);
}

std::string epoch_checkpoint_name(int epoch)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "epoch_%04d.ckpt", epoch);
    return buf;
}

} // namespace

TrainResult train_alternate(const Dataset& dataset, const ArchConfig& arch, const ChannelConfig& channel,
                            const TrainConfig& config, const TrainOptions& options,
                            std::optional<TrainerState> start)
{
    config.validate();
    validate_arch(arch);
    if (dataset.size() == 0) {
        throw ContractError("training dataset is empty");
    }
    if (dataset.shape != arch.image) {
        throw ConfigError("dataset image shape " + to_string(dataset.shape) + " != arch " + to_string(arch.image));
    }

    TrainResult result{start ? std::move(*start) : TrainerState::fresh(arch, config), {}};
    TrainerState& state = result.state;
    if (!(state.arch == arch)) {
        throw CheckpointError("resume state arch does not match the configured arch");
    }

    std::vector<NormalizedImage> inputs;
    inputs.reserve(dataset.size());
    for (const auto& img : dataset.images) {
        inputs.push_back(normalize(img));
    }
    const std::size_t eval_count =
        config.eval_images == 0 ? dataset.size() : std::min(config.eval_images, dataset.size());
    const std::span<const Image> eval_set(dataset.images.data(), eval_count);

    const SigmaSchedule schedule{config.sigma_mode, config.sigma0, std::max(config.epochs, 1)};
    const std::size_t batch = static_cast<std::size_t>(config.batch_size);

    for (int epoch = state.epoch + 1; epoch <= config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto order = shuffled_order(inputs.size(), state.streams.shuffle);
        std::vector<const NormalizedImage*> ordered;
        ordered.reserve(order.size());
        for (auto idx : order) {
            ordered.push_back(&inputs[idx]);
        }

        StepStats tx;
        StepStats rx;
        try {
            const ChannelDecoderPath path(channel, state.decoder, arch);
            for (std::size_t b = 0; b < ordered.size(); b += batch) {
                const Batch slice(ordered.data() + b, std::min(batch, ordered.size() - b));
                tx.merge(train_tx_step(slice, state.encoder, arch, path, config, schedule, epoch,
                                       state.encoder_opt, state.streams));
            }
            for (std::size_t b = 0; b < ordered.size(); b += batch) {
                const Batch slice(ordered.data() + b, std::min(batch, ordered.size() - b));
                rx.merge(train_rx_step(slice, state.encoder, state.decoder, arch, channel, config, schedule,
                                       epoch, state.decoder_opt, state.streams));
            }
        } catch (const TrainingAbort&) {
            // Parameters are only written after a finite step, so this is the last good state.
            save_state(state, options, "abort.ckpt");
            throw;
        }

        // Same noise realization every epoch so records are comparable.
        RngStream eval_rng(config.stream_seed("eval"));
        const EvalSummary eval = evaluate(eval_set, state.encoder, state.decoder, arch, channel, eval_rng);
        state.epoch = epoch;

        RunRecord rec;
        rec.epoch = epoch;
        rec.sigma_mode = to_string(config.sigma_mode);
        rec.reward_tx = tx.images ? tx.reward_sum / static_cast<double>(tx.images) : 0.0;
        rec.reward_rx = rx.images ? rx.reward_sum / static_cast<double>(rx.images) : 0.0;
        rec.l1_loss = eval.l1_loss;
        rec.psnr_db = eval.psnr_db;
        rec.ssim = eval.ssim;
        rec.sparsity_fraction = eval.sparsity_fraction;
        rec.sigma_mean = tx.sigma_count ? tx.sigma_sum / static_cast<double>(tx.sigma_count) : 0.0;
        rec.sigma_min = tx.sigma_min;
        rec.sigma_max = tx.sigma_max;
        rec.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.records.push_back(rec);
        if (options.on_record) {
            options.on_record(rec);
        }
        if (options.checkpoint_interval > 0 &&
            (epoch % options.checkpoint_interval == 0 || epoch == config.epochs)) {
            save_state(state, options, epoch_checkpoint_name(epoch));
        }
    }
    return result;
}

} // namespace sparsesbc

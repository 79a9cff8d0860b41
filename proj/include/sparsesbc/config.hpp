#pragma once

#include "sparsesbc/channel.hpp"
#include "sparsesbc/trainer.hpp"
#include "sparsesbc/transceiver.hpp"
#include "sparsesbc/video.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace sparsesbc {

// Everything one experiment needs. Defaults reproduce the reference setup:
// T=64, alpha=1e-4, eps=0.1, N=5000, M=2304, m=5, sigma=0.1 on CIFAR-10.
struct ExperimentConfig {
    std::string data_kind = "cifar10"; // cifar10 | video
    std::filesystem::path data_path;
    std::string data_split = "train";
    std::size_t data_limit = 0;

    ArchConfig arch;
    ChannelConfig channel;
    TrainConfig train;
    int checkpoint_interval = 10;
    std::filesystem::path resume;

    int gop = kDefaultGop;
    DiffMode video_mode = DiffMode::Signed;

    std::vector<double> eval_snr_db{0.0, 5.0, 10.0, 15.0, 20.0};
    std::vector<ChannelKind> eval_kinds{ChannelKind::Awgn, ChannelKind::Pif};
    std::string eval_split = "test";
    std::size_t eval_limit = 0;

    std::filesystem::path out_dir;
};

// Every recognised key, in a stable order.
const std::vector<std::string>& config_keys();
std::string config_key_help(const std::string& key);

// Sets one dotted key from its text form; unknown keys and unparsable values
// throw ConfigError.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);
std::string get_setting(const ExperimentConfig& config, const std::string& key);

// `key = value` lines; '#' starts a comment.
std::map<std::string, std::string> parse_config_text(const std::string& text);
void apply_config_file(ExperimentConfig& config, const std::filesystem::path& path);

// Fully resolved config, one `key = value` per line, re-parseable.
std::string resolved_config_text(const ExperimentConfig& config);

// Paths exist, arch chains, training parameters are sane.
void validate_experiment(const ExperimentConfig& config, bool needs_dataset);

// Default output root: $SPARSESBC_OUT_ROOT, else ./runs.
std::filesystem::path default_output_root();

} // namespace sparsesbc

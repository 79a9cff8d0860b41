#include "sparsesbc/config.hpp"

#include "sparsesbc/error.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

namespace sparsesbc {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

std::uint64_t parse_seed(const std::string& key, const std::string& v)
{
    std::uint64_t out = 0;
    const auto* end = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end) {
        throw ConfigError(key + ": expected an unsigned 64-bit seed, got '" + v + "'");
    }
    return out;
}

long long parse_int(const std::string& key, const std::string& v)
{
    long long out = 0;
    const auto* end = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end) {
        throw ConfigError(key + ": expected an integer, got '" + v + "'");
    }
    return out;
}

std::size_t parse_count(const std::string& key, const std::string& v)
{
    const auto n = parse_int(key, v);
    if (n < 0) {
        throw ConfigError(key + ": must be non-negative");
    }
    return static_cast<std::size_t>(n);
}

double parse_double(const std::string& key, const std::string& v)
{
    if (v == "inf" || v == "+inf") {
        return std::numeric_limits<double>::infinity();
    }
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) {
            throw ConfigError(key + ": trailing characters in '" + v + "'");
        }
        return d;
    } catch (const std::logic_error&) {
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1" || v == "yes") {
        return true;
    }
    if (v == "false" || v == "0" || v == "no") {
        return false;
    }
    throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

std::string format_double(double d)
{
    if (d == std::numeric_limits<double>::infinity()) {
        return "inf";
    }
    std::ostringstream out;
    out.precision(17);
    out << d;
    return out.str();
}

template <typename T, typename F>
std::string join(const std::vector<T>& items, F&& fmt)
{
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) {
            out += ",";
        }
        out += fmt(items[i]);
    }
    return out;
}

struct KeySpec {
    std::string key;
    std::string help;
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

const std::vector<KeySpec>& key_table()
{
    static const std::vector<KeySpec> table = {
        {"data.kind", "dataset kind: cifar10 or video (frame directory)",
         [](auto& c, const auto& v) {
             if (v != "cifar10" && v != "video") {
                 throw ConfigError("data.kind must be cifar10 or video");
             }
             c.data_kind = v;
         },
         [](const auto& c) { return c.data_kind; }},
        {"data.path", "CIFAR-10 batch directory/file, or frame directory",
         [](auto& c, const auto& v) { c.data_path = v; }, [](const auto& c) { return c.data_path.string(); }},
        {"data.split", "training split (train|test)",
         [](auto& c, const auto& v) { c.data_split = v; }, [](const auto& c) { return c.data_split; }},
        {"data.limit", "use only the first N records (0 = all)",
         [](auto& c, const auto& v) { c.data_limit = parse_count("data.limit", v); },
         [](const auto& c) { return std::to_string(c.data_limit); }},

        {"arch.height", "image height", [](auto& c, const auto& v) { c.arch.image.height = static_cast<int>(parse_int("arch.height", v)); },
         [](const auto& c) { return std::to_string(c.arch.image.height); }},
        {"arch.width", "image width", [](auto& c, const auto& v) { c.arch.image.width = static_cast<int>(parse_int("arch.width", v)); },
         [](const auto& c) { return std::to_string(c.arch.image.width); }},
        {"arch.channels", "image channels (1 or 3)",
         [](auto& c, const auto& v) { c.arch.image.channels = static_cast<int>(parse_int("arch.channels", v)); },
         [](const auto& c) { return std::to_string(c.arch.image.channels); }},
        {"arch.conv_channels", "comma-separated output channels of each stride-2 conv",
         [](auto& c, const auto& v) {
             c.arch.conv_channels.clear();
             for (const auto& item : split_list(v)) {
                 c.arch.conv_channels.push_back(static_cast<int>(parse_int("arch.conv_channels", item)));
             }
         },
         [](const auto& c) { return join(c.arch.conv_channels, [](int x) { return std::to_string(x); }); }},
        {"arch.kernel", "conv kernel size", [](auto& c, const auto& v) { c.arch.kernel = static_cast<int>(parse_int("arch.kernel", v)); },
         [](const auto& c) { return std::to_string(c.arch.kernel); }},
        {"arch.stride", "conv stride", [](auto& c, const auto& v) { c.arch.stride = static_cast<int>(parse_int("arch.stride", v)); },
         [](const auto& c) { return std::to_string(c.arch.stride); }},
        {"arch.padding", "conv padding", [](auto& c, const auto& v) { c.arch.padding = static_cast<int>(parse_int("arch.padding", v)); },
         [](const auto& c) { return std::to_string(c.arch.padding); }},
        {"arch.leaky_slope", "LeakyReLU negative slope",
         [](auto& c, const auto& v) { c.arch.leaky_slope = parse_double("arch.leaky_slope", v); },
         [](const auto& c) { return format_double(c.arch.leaky_slope); }},
        {"arch.M", "embedding length M (must equal the conv stack output)",
         [](auto& c, const auto& v) { c.arch.embedding_dim = static_cast<int>(parse_int("arch.M", v)); },
         [](const auto& c) { return std::to_string(c.arch.embedding_dim); }},
        {"arch.N", "transmitted bit length N",
         [](auto& c, const auto& v) { c.arch.bit_length = static_cast<int>(parse_int("arch.N", v)); },
         [](const auto& c) { return std::to_string(c.arch.bit_length); }},

        {"channel.kind", "AWGN or PIF", [](auto& c, const auto& v) { c.channel.kind = channel_kind_from_string(v); },
         [](const auto& c) { return to_string(c.channel.kind); }},
        {"channel.snr_db", "target SNR in dB (signal power = mean of x^2 per vector)",
         [](auto& c, const auto& v) { c.channel.snr_db = parse_double("channel.snr_db", v); },
         [](const auto& c) { return format_double(c.channel.snr_db); }},
        {"channel.noiseless", "disable channel noise",
         [](auto& c, const auto& v) { c.channel.noiseless = parse_bool("channel.noiseless", v); },
         [](const auto& c) { return std::string(c.channel.noiseless ? "true" : "false"); }},
        {"channel.fading", "PIF gain model: rayleigh (E[h^2]=1) or fixed",
         [](auto& c, const auto& v) { c.channel.fading = fading_model_from_string(v); },
         [](const auto& c) { return to_string(c.channel.fading); }},
        {"channel.fixed_gain", "PIF gain when channel.fading = fixed",
         [](auto& c, const auto& v) { c.channel.fixed_gain = parse_double("channel.fixed_gain", v); },
         [](const auto& c) { return format_double(c.channel.fixed_gain); }},

        {"train.batch_size", "batch size T",
         [](auto& c, const auto& v) { c.train.batch_size = static_cast<int>(parse_int("train.batch_size", v)); },
         [](const auto& c) { return std::to_string(c.train.batch_size); }},
        {"train.learning_rate", "learning rate alpha",
         [](auto& c, const auto& v) { c.train.learning_rate = parse_double("train.learning_rate", v); },
         [](const auto& c) { return format_double(c.train.learning_rate); }},
        {"train.samples", "self-critic samples m (>= 2)",
         [](auto& c, const auto& v) { c.train.samples = static_cast<int>(parse_int("train.samples", v)); },
         [](const auto& c) { return std::to_string(c.train.samples); }},
        {"train.epochs", "epochs E", [](auto& c, const auto& v) { c.train.epochs = static_cast<int>(parse_int("train.epochs", v)); },
         [](const auto& c) { return std::to_string(c.train.epochs); }},
        {"train.sparsity_weight", "sparsity weight eps (per transmitted 1-bit)",
         [](auto& c, const auto& v) { c.train.sparsity_weight = parse_double("train.sparsity_weight", v); },
         [](const auto& c) { return format_double(c.train.sparsity_weight); }},
        {"train.sigma_mode", "constant, annealed or learnable",
         [](auto& c, const auto& v) { c.train.sigma_mode = sigma_mode_from_string(v); },
         [](const auto& c) { return to_string(c.train.sigma_mode); }},
        {"train.sigma0", "exploration scale sigma",
         [](auto& c, const auto& v) { c.train.sigma0 = parse_double("train.sigma0", v); },
         [](const auto& c) { return format_double(c.train.sigma0); }},
        {"train.rx_mode", "self_critic or direct_backprop",
         [](auto& c, const auto& v) { c.train.rx_mode = rx_mode_from_string(v); },
         [](const auto& c) { return to_string(c.train.rx_mode); }},
        {"train.optimizer", "sgd or adam", [](auto& c, const auto& v) { c.train.optimizer = optimizer_kind_from_string(v); },
         [](const auto& c) { return to_string(c.train.optimizer); }},
        {"train.eval_images", "training images scored per epoch record (0 = all)",
         [](auto& c, const auto& v) { c.train.eval_images = parse_count("train.eval_images", v); },
         [](const auto& c) { return std::to_string(c.train.eval_images); }},
        {"train.checkpoint_interval", "save a checkpoint every K epochs (0 = final only)",
         [](auto& c, const auto& v) { c.checkpoint_interval = static_cast<int>(parse_int("train.checkpoint_interval", v)); },
         [](const auto& c) { return std::to_string(c.checkpoint_interval); }},
        {"train.resume", "checkpoint to resume training from",
         [](auto& c, const auto& v) { c.resume = v; }, [](const auto& c) { return c.resume.string(); }},

        {"seed", "master seed for all named streams",
         [](auto& c, const auto& v) { c.train.seed = parse_seed("seed", v); },
         [](const auto& c) { return std::to_string(c.train.seed); }},
        {"seed.init", "override: parameter initialization stream",
         [](auto& c, const auto& v) { c.train.stream_seeds["init"] = parse_seed("seed.init", v); },
         [](const auto& c) { return std::to_string(c.train.stream_seed("init")); }},
        {"seed.sampler", "override: exploration sampling stream",
         [](auto& c, const auto& v) { c.train.stream_seeds["sampler"] = parse_seed("seed.sampler", v); },
         [](const auto& c) { return std::to_string(c.train.stream_seed("sampler")); }},
        {"seed.channel", "override: channel noise/fading stream",
         [](auto& c, const auto& v) { c.train.stream_seeds["channel"] = parse_seed("seed.channel", v); },
         [](const auto& c) { return std::to_string(c.train.stream_seed("channel")); }},
        {"seed.shuffle", "override: dataset shuffling stream",
         [](auto& c, const auto& v) { c.train.stream_seeds["shuffle"] = parse_seed("seed.shuffle", v); },
         [](const auto& c) { return std::to_string(c.train.stream_seed("shuffle")); }},
        {"seed.eval", "override: evaluation channel stream",
         [](auto& c, const auto& v) { c.train.stream_seeds["eval"] = parse_seed("seed.eval", v); },
         [](const auto& c) { return std::to_string(c.train.stream_seed("eval")); }},

        {"video.gop", "frames per base frame", [](auto& c, const auto& v) { c.gop = static_cast<int>(parse_int("video.gop", v)); },
         [](const auto& c) { return std::to_string(c.gop); }},
        {"video.mode", "signed or absolute differencing",
         [](auto& c, const auto& v) { c.video_mode = diff_mode_from_string(v); },
         [](const auto& c) { return to_string(c.video_mode); }},

        {"eval.snr_db", "comma-separated SNR sweep in dB",
         [](auto& c, const auto& v) {
             c.eval_snr_db.clear();
             for (const auto& item : split_list(v)) {
                 c.eval_snr_db.push_back(parse_double("eval.snr_db", item));
             }
         },
         [](const auto& c) { return join(c.eval_snr_db, format_double); }},
        {"eval.kinds", "comma-separated channel kinds to sweep",
         [](auto& c, const auto& v) {
             c.eval_kinds.clear();
             for (const auto& item : split_list(v)) {
                 c.eval_kinds.push_back(channel_kind_from_string(item));
             }
         },
         [](const auto& c) { return join(c.eval_kinds, [](ChannelKind k) { return to_string(k); }); }},
        {"eval.split", "evaluation split (train|test)",
         [](auto& c, const auto& v) { c.eval_split = v; }, [](const auto& c) { return c.eval_split; }},
        {"eval.limit", "evaluate only the first N records (0 = all)",
         [](auto& c, const auto& v) { c.eval_limit = parse_count("eval.limit", v); },
         [](const auto& c) { return std::to_string(c.eval_limit); }},

        {"out", "output directory", [](auto& c, const auto& v) { c.out_dir = v; },
         [](const auto& c) { return c.out_dir.string(); }},
    };
    return table;
}

const KeySpec& find_key(const std::string& key)
{
    for (const auto& entry : key_table()) {
        if (entry.key == key) {
            return entry;
        }
    }
    throw ConfigError("unknown config key '" + key + "'");
}

} // namespace

const std::vector<std::string>& config_keys()
{
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> out;
        for (const auto& entry : key_table()) {
            out.push_back(entry.key);
        }
        return out;
    }();
    return keys;
}

std::string config_key_help(const std::string& key)
{
    return find_key(key).help;
}

void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value)
{
    find_key(key).set(config, trim(value));
}

std::string get_setting(const ExperimentConfig& config, const std::string& key)
{
    return find_key(key).get(config);
}

std::map<std::string, std::string> parse_config_text(const std::string& text)
{
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        (void)find_key(key);
        out[key] = trim(line.substr(eq + 1));
    }
    return out;
}

void apply_config_file(ExperimentConfig& config, const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config file " + path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    for (const auto& [key, value] : parse_config_text(buf.str())) {
        apply_setting(config, key, value);
    }
}

std::string resolved_config_text(const ExperimentConfig& config)
{
    std::string out;
    out += "# resolved configuration\n";
    out += "# SNR convention: noise sigma = sqrt(mean(x^2) / 10^(snr_db/10)) per transmitted vector\n";
    for (const auto& entry : key_table()) {
        out += entry.key + " = " + entry.get(config) + "\n";
    }
    return out;
}

void validate_experiment(const ExperimentConfig& config, bool needs_dataset)
{
    validate_arch(config.arch);
    config.train.validate();
    if (needs_dataset) {
        if (config.data_path.empty()) {
            throw ConfigError("data.path is not set");
        }
        if (!std::filesystem::exists(config.data_path)) {
            throw ConfigError("data.path does not exist: " + config.data_path.string());
        }
    }
    if (!config.resume.empty() && !std::filesystem::exists(config.resume)) {
        throw ConfigError("train.resume checkpoint does not exist: " + config.resume.string());
    }
    if (config.gop < 2) {
        throw ConfigError("video.gop must be at least 2");
    }
    if (config.checkpoint_interval < 0) {
        throw ConfigError("train.checkpoint_interval must be non-negative");
    }
}

std::filesystem::path default_output_root()
{
    if (const char* root = std::getenv("SPARSESBC_OUT_ROOT"); root != nullptr && *root != '\0') {
        return root;
    }
    return "runs";
}

} // namespace sparsesbc

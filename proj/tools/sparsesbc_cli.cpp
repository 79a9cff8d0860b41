#include "sparsesbc/config.hpp"
#include "sparsesbc/error.hpp"
#include "sparsesbc/runner.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace {

struct CommonArgs {
    std::string config_file;
    std::vector<std::string> sets;
    std::map<std::string, std::string> keyed;
    bool noiseless = false;
    long long seed = -1;
    std::string out;
};

void add_common(CLI::App* cmd, CommonArgs& args)
{
    cmd->add_option("--config", args.config_file, "key = value configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--set", args.sets, "override, as key=value (repeatable)");
    for (const auto& key : sparsesbc::config_keys()) {
        if (key == "seed" || key == "out") {
            continue; // dedicated flags below
        }
        cmd->add_option("--" + key, args.keyed[key], sparsesbc::config_key_help(key));
    }
    cmd->add_flag("--noiseless", args.noiseless, "disable channel noise");
    cmd->add_option("--seed", args.seed, "master seed");
    cmd->add_option("--out", args.out, "output directory");
}

sparsesbc::ExperimentConfig resolve(const CommonArgs& args, const std::string& command)
{
    sparsesbc::ExperimentConfig config;
    if (!args.config_file.empty()) {
        sparsesbc::apply_config_file(config, args.config_file);
    }
    for (const auto& kv : args.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw sparsesbc::ConfigError("--set expects key=value, got '" + kv + "'");
        }
        sparsesbc::apply_setting(config, kv.substr(0, eq), kv.substr(eq + 1));
    }
    for (const auto& [key, value] : args.keyed) {
        if (!value.empty()) {
            sparsesbc::apply_setting(config, key, value);
        }
    }
    if (args.noiseless) {
        config.channel.noiseless = true;
    }
    if (args.seed >= 0) {
        config.train.seed = static_cast<std::uint64_t>(args.seed);
    }
    if (!args.out.empty()) {
        config.out_dir = args.out;
    }
    if (config.out_dir.empty()) {
        config.out_dir = sparsesbc::default_output_root() / command;
    }
    return config;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Sparse binary semantic communication: train, evaluate, and run video experiments"};
    app.require_subcommand(1);

    CommonArgs train_args;
    auto* train = app.add_subcommand("train", "alternate-learning training run");
    add_common(train, train_args);

    CommonArgs eval_args;
    std::string eval_ckpt;
    auto* eval = app.add_subcommand("eval", "SNR sweep of a checkpoint over the evaluation split");
    add_common(eval, eval_args);
    eval->add_option("--checkpoint", eval_ckpt, "checkpoint to evaluate")->required();

    CommonArgs video_args;
    std::string video_ckpt;
    bool identity = false;
    auto* video = app.add_subcommand("video", "temporal-difference transmission of a frame directory");
    add_common(video, video_args);
    video->add_option("--checkpoint", video_ckpt, "checkpoint used as the frame codec");
    video->add_flag("--identity", identity, "use a noiseless identity link instead of a model");

    std::string plot_input;
    std::string plot_kind;
    std::string plot_out;
    auto* plot = app.add_subcommand("plot", "emit plot-ready data files from a CSV log");
    plot->add_option("--input", plot_input, "epochs.csv, eval.csv, sparsity.csv or frames.csv")->required();
    plot->add_option("--kind", plot_kind, "snr, sparsity or sigma")->required();
    plot->add_option("--out", plot_out, "output directory (default: next to the input)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) {
            sparsesbc::cmd_train(resolve(train_args, "train"), std::cout);
        } else if (*eval) {
            sparsesbc::cmd_eval(resolve(eval_args, "eval"), eval_ckpt, std::cout);
        } else if (*video) {
            sparsesbc::cmd_video(resolve(video_args, "video"), video_ckpt, identity, std::cout);
        } else if (*plot) {
            const std::filesystem::path input(plot_input);
            const std::filesystem::path out = plot_out.empty() ? input.parent_path() / "plots" : std::filesystem::path(plot_out);
            for (const auto& path : sparsesbc::emit_plot_data(input, sparsesbc::plot_kind_from_string(plot_kind), out)) {
                std::cout << path.string() << "\n";
            }
        }
    } catch (const sparsesbc::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

#pragma once

#include "sparsesbc/config.hpp"
#include "sparsesbc/trainer.hpp"

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace sparsesbc {

inline constexpr const char* kEpochSchema = "sparsesbc.epochs/1";
inline constexpr const char* kEvalSchema = "sparsesbc.eval/1";
inline constexpr const char* kFrameSchema = "sparsesbc.frames/1";

// Minimal CSV: comma separated, no quoting, '#' lines are metadata.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Index of `name`; FormatError when absent.
    std::size_t column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

std::string format_number(double v);
std::string epoch_csv_header();
std::string epoch_csv_row(const RunRecord& rec);

// Loads the configured dataset (CIFAR-10 batches or a frame directory turned
// into Base/Diff frames), honouring `limit`.
Dataset load_experiment_dataset(const ExperimentConfig& config, const std::string& split, std::size_t limit);

// Each command writes into config.out_dir and throws sparsesbc::Error on failure.
void cmd_train(const ExperimentConfig& config, std::ostream& log);
void cmd_eval(const ExperimentConfig& config, const std::filesystem::path& checkpoint, std::ostream& log);
// With `identity` the frames bypass the model over a noiseless identity link.
void cmd_video(const ExperimentConfig& config, const std::filesystem::path& checkpoint, bool identity,
               std::ostream& log);

enum class PlotKind { Snr, Sparsity, Sigma };
PlotKind plot_kind_from_string(const std::string& name);

// Writes .dat series plus a gnuplot script into `out_dir`; returns the files written.
std::vector<std::filesystem::path> emit_plot_data(const std::filesystem::path& csv, PlotKind kind,
                                                  const std::filesystem::path& out_dir);

// Location of bundled data files (reference tables).
std::filesystem::path data_directory();

} // namespace sparsesbc

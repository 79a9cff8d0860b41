#include "sparsesbc/runner.hpp"

#include "sparsesbc/checkpoint.hpp"
#include "sparsesbc/error.hpp"
#include "sparsesbc/metrics.hpp"
#include "sparsesbc/video.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace sparsesbc {

namespace fs = std::filesystem;

namespace {

std::ofstream open_output(const fs::path& path, std::ios::openmode mode = std::ios::trunc)
{
    std::ofstream out(path, std::ios::out | mode);
    if (!out) {
        throw IngestionError("cannot write " + path.string());
    }
    return out;
}

void write_text(const fs::path& path, const std::string& text)
{
    auto out = open_output(path);
    out << text;
}

std::vector<std::string> split_fields(const std::string& line)
{
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) {
        out.push_back(field);
    }
    if (!line.empty() && line.back() == ',') {
        out.emplace_back();
    }
    return out;
}

double parse_field(const std::string& text)
{
    if (text == "inf") {
        return kPsnrIdentical;
    }
    if (text == "-inf") {
        return -kPsnrIdentical;
    }
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (text.empty() || end != text.c_str() + text.size()) {
        return std::nan("");
    }
    return v;
}

std::string arch_summary(const ArchConfig& arch)
{
    std::string convs;
    for (std::size_t i = 0; i < arch.conv_channels.size(); ++i) {
        convs += (i ? "," : "") + std::to_string(arch.conv_channels[i]);
    }
    return "image=" + to_string(arch.image) + " conv=[" + convs + "] M=" + std::to_string(arch.embedding_dim) +
           " N=" + std::to_string(arch.bit_length);
}

std::string channel_label(const ChannelConfig& channel)
{
    return to_string(channel.kind) + "@" + (channel.noiseless ? std::string("noiseless") : format_number(channel.snr_db) + "dB");
}

struct PointResult {
    EvalSummary summary;
    std::vector<double> sparsity;
    std::vector<double> psnr;
    std::vector<double> ssim;
};

PointResult evaluate_point(const Dataset& data, const EncoderParams<float>& phi, const DecoderParams<float>& theta,
                           const ArchConfig& arch, const ChannelConfig& channel, RngStream rng)
{
    PointResult r;
    for (const Image& img : data.images) {
        const NormalizedImage input = normalize(img);
        const BitVector bits = transmit_bits(input, phi, arch);
        const NormalizedImage recon = reconstruct(transmit(bits, channel, rng), theta, arch);
        const Image pixels = denormalize(recon);
        r.psnr.push_back(psnr(img, pixels));
        r.ssim.push_back(ssim(img, pixels));
        r.sparsity.push_back(sparsity_fraction(bits));
        r.summary.l1_loss += l1_loss(input, recon);
        r.summary.psnr_db += r.psnr.back();
        r.summary.ssim += r.ssim.back();
        r.summary.sparsity_fraction += r.sparsity.back();
        ++r.summary.images;
    }
    if (r.summary.images > 0) {
        const auto n = static_cast<double>(r.summary.images);
        r.summary.l1_loss /= n;
        r.summary.psnr_db /= n;
        r.summary.ssim /= n;
        r.summary.sparsity_fraction /= n;
    }
    return r;
}

} // namespace

std::size_t CsvTable::column(const std::string& name) const
{
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
        throw FormatError("CSV is missing required column '" + name + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
}

CsvTable read_csv(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw IngestionError("cannot read CSV " + path.string());
    }
    CsvTable table;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line.front() == '#') {
            continue;
        }
        auto fields = split_fields(line);
        if (table.header.empty()) {
            table.header = std::move(fields);
            continue;
        }
        if (fields.size() != table.header.size()) {
            throw FormatError(path.string() + ": row has " + std::to_string(fields.size()) + " fields, header has " +
                              std::to_string(table.header.size()));
        }
        table.rows.push_back(std::move(fields));
    }
    if (table.header.empty()) {
        throw FormatError(path.string() + ": empty CSV");
    }
    return table;
}

std::string format_number(double v)
{
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    if (std::isnan(v)) {
        return "nan";
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string epoch_csv_header()
{
    return "epoch,sigma_mode,reward_tx,reward_rx,l1_loss,psnr_db,ssim,sparsity_fraction,sigma_mean,sigma_min,sigma_max";
}

std::string epoch_csv_row(const RunRecord& rec)
{
    std::string row = std::to_string(rec.epoch) + "," + rec.sigma_mode;
    for (double v : {rec.reward_tx, rec.reward_rx, rec.l1_loss, rec.psnr_db, rec.ssim, rec.sparsity_fraction,
                     rec.sigma_mean, rec.sigma_min, rec.sigma_max}) {
        row += "," + format_number(v);
    }
    return row;
}

Dataset load_experiment_dataset(const ExperimentConfig& config, const std::string& split, std::size_t limit)
{
    Dataset ds;
    if (config.data_kind == "video") {
        const FrameSequence frames = read_frame_directory(config.data_path);
        ds = stream_dataset(temporal_difference(frames, config.gop, config.video_mode));
        ds.split = split;
    } else {
        ds = load_cifar10(config.data_path, split);
    }
    if (limit > 0) {
        ds.truncate(limit);
    }
    if (ds.size() == 0) {
        throw IngestionError("no images found under " + config.data_path.string());
    }
    return ds;
}

void cmd_train(const ExperimentConfig& config, std::ostream& log)
{
    validate_experiment(config, true);
    if (config.out_dir.empty()) {
        throw ConfigError("no output directory (out)");
    }
    fs::create_directories(config.out_dir);
    write_text(config.out_dir / "config.txt", resolved_config_text(config));

    const TrainConfig& t = config.train;
    log << "SparseSBC train: T=" << t.batch_size << " alpha=" << format_number(t.learning_rate)
        << " eps=" << format_number(t.sparsity_weight) << " N=" << config.arch.bit_length
        << " M=" << config.arch.embedding_dim << " m=" << t.samples << " sigma=" << format_number(t.sigma0) << " ("
        << to_string(t.sigma_mode) << ") E=" << t.epochs << " optimizer=" << to_string(t.optimizer)
        << " rx=" << to_string(t.rx_mode) << "\n";
    log << "  " << arch_summary(config.arch) << " channel=" << channel_label(config.channel) << "\n";

    const Dataset train = load_experiment_dataset(config, config.data_split, config.data_limit);
    log << "  training images: " << train.size() << " (" << train.name << "/" << train.split << ")\n";

    std::optional<TrainerState> start;
    if (!config.resume.empty()) {
        start = TrainerState::from_checkpoint(load_checkpoint(config.resume, config.arch));
        log << "  resuming after epoch " << start->epoch << " from " << config.resume.string() << "\n";
    }

    const fs::path epochs_path = config.out_dir / "epochs.csv";
    const fs::path timing_path = config.out_dir / "timing.csv";
    const bool append = start.has_value() && fs::exists(epochs_path);
    auto epochs = open_output(epochs_path, append ? std::ios::app : std::ios::trunc);
    auto timing = open_output(timing_path, append && fs::exists(timing_path) ? std::ios::app : std::ios::trunc);
    if (!append) {
        epochs << "#schema=" << kEpochSchema << "\n" << epoch_csv_header() << "\n";
        timing << "epoch,wall_seconds\n";
    }

    TrainOptions options;
    options.checkpoint_dir = config.out_dir / "checkpoints";
    options.checkpoint_interval = config.checkpoint_interval;
    options.checkpoint_extra = {{"sigma_mode", to_string(t.sigma_mode)},
                                {"sparsity_weight", t.sparsity_weight},
                                {"seed", t.seed}};
    options.on_record = [&](const RunRecord& rec) {
        epochs << epoch_csv_row(rec) << "\n" << std::flush;
        timing << rec.epoch << "," << format_number(rec.wall_seconds) << "\n" << std::flush;
        log << "  epoch " << rec.epoch << ": reward_tx=" << format_number(rec.reward_tx)
            << " reward_rx=" << format_number(rec.reward_rx) << " psnr=" << format_number(rec.psnr_db)
            << " ssim=" << format_number(rec.ssim) << " sparsity=" << format_number(rec.sparsity_fraction)
            << " sigma=" << format_number(rec.sigma_mean) << " (" << format_number(rec.wall_seconds) << "s)\n"
            << std::flush;
    };

    const TrainResult result = train_alternate(train, config.arch, config.channel, t, options, std::move(start));
    save_checkpoint(result.state.to_checkpoint(options.checkpoint_extra), config.out_dir / "final.ckpt");

    Dataset test;
    try {
        test = load_experiment_dataset(config, config.eval_split, config.eval_limit);
    } catch (const IngestionError& e) {
        log << "  " << config.eval_split << " split unavailable (" << e.what() << "); reporting on the training set\n";
        test = train;
        test.split = train.split;
    }
    const PointResult final_eval = evaluate_point(test, result.state.encoder, result.state.decoder, config.arch,
                                                  config.channel, RngStream::named(t.stream_seed("eval"), "final"));
    auto report = open_output(config.out_dir / "report.csv");
    report << "#schema=" << kEvalSchema << "\n"
           << "split,kind,snr_db,images,l1_loss,psnr_db,ssim,sparsity_fraction,payload_bytes\n"
           << test.split << "," << to_string(config.channel.kind) << ","
           << (config.channel.noiseless ? std::string("inf") : format_number(config.channel.snr_db)) << ","
           << final_eval.summary.images << "," << format_number(final_eval.summary.l1_loss) << ","
           << format_number(final_eval.summary.psnr_db) << "," << format_number(final_eval.summary.ssim) << ","
           << format_number(final_eval.summary.sparsity_fraction) << ","
           << payload_bytes(static_cast<std::size_t>(config.arch.bit_length)) << "\n";
    log << "  final " << test.split << " evaluation: psnr=" << format_number(final_eval.summary.psnr_db)
        << " ssim=" << format_number(final_eval.summary.ssim)
        << " sparsity=" << format_number(final_eval.summary.sparsity_fraction) << "\n";
}

void cmd_eval(const ExperimentConfig& config, const fs::path& checkpoint, std::ostream& log)
{
    validate_experiment(config, true);
    if (config.out_dir.empty()) {
        throw ConfigError("no output directory (out)");
    }
    const Checkpoint ckpt = load_checkpoint(checkpoint, config.arch);
    fs::create_directories(config.out_dir);
    write_text(config.out_dir / "config.txt", resolved_config_text(config));

    const Dataset data = load_experiment_dataset(config, config.eval_split, config.eval_limit);
    const std::size_t bytes = payload_bytes(static_cast<std::size_t>(config.arch.bit_length));
    log << "SparseSBC eval: " << checkpoint.string() << " (epoch " << ckpt.meta.epoch << ") on " << data.size()
        << " " << data.split << " images\n";

    auto eval = open_output(config.out_dir / "eval.csv");
    eval << "#schema=" << kEvalSchema << "\n"
         << "kind,snr_db,psnr_db,ssim,sparsity_fraction,l1_loss,payload_bytes,images\n";
    auto per_image = open_output(config.out_dir / "sparsity.csv");
    per_image << "kind,snr_db,image,sparsity_fraction,psnr_db,ssim\n";

    std::optional<EvalSummary> at_ten;
    for (ChannelKind kind : config.eval_kinds) {
        std::vector<double> snrs = config.eval_snr_db;
        if (config.channel.noiseless) {
            snrs = {kPsnrIdentical};
        }
        for (double snr : snrs) {
            ChannelConfig channel = config.channel;
            channel.kind = kind;
            channel.snr_db = snr;
            const std::string snr_text = format_number(snr);
            // One stream per sweep point so points do not share noise draws.
            const PointResult point =
                evaluate_point(data, ckpt.encoder, ckpt.decoder, config.arch, channel,
                               RngStream::named(config.train.stream_seed("eval"), to_string(kind) + "@" + snr_text));
            eval << to_string(kind) << "," << snr_text << "," << format_number(point.summary.psnr_db) << ","
                 << format_number(point.summary.ssim) << "," << format_number(point.summary.sparsity_fraction) << ","
                 << format_number(point.summary.l1_loss) << "," << bytes << "," << point.summary.images << "\n";
            for (std::size_t i = 0; i < point.sparsity.size(); ++i) {
                per_image << to_string(kind) << "," << snr_text << "," << i << "," << format_number(point.sparsity[i])
                          << "," << format_number(point.psnr[i]) << "," << format_number(point.ssim[i]) << "\n";
            }
            log << "  " << to_string(kind) << " " << snr_text << " dB: psnr=" << format_number(point.summary.psnr_db)
                << " ssim=" << format_number(point.summary.ssim)
                << " sparsity=" << format_number(point.summary.sparsity_fraction) << " bytes=" << bytes << "\n";
            if (kind == ChannelKind::Awgn && snr == 10.0) {
                at_ten = point.summary;
            }
        }
    }

    auto cmp = open_output(config.out_dir / "comparison.csv");
    cmp << "system,resolution_bits,payload_bytes,psnr_db,ssim_percent,source\n";
    if (at_ten) {
        cmp << "SparseSBC (this run),1," << bytes << "," << format_number(at_ten->psnr_db) << ","
            << format_number(100.0 * at_ten->ssim) << ",measured\n";
    }
    const fs::path ref_path = data_directory() / "reference_results.csv";
    if (fs::exists(ref_path)) {
        const CsvTable ref = read_csv(ref_path);
        for (const auto& row : ref.rows) {
            for (const auto& field : row) {
                cmp << field << ",";
            }
            cmp << "reference\n";
        }
    } else {
        log << "  reference table not found at " << ref_path.string() << "; comparison.csv has measured rows only\n";
    }
}

void cmd_video(const ExperimentConfig& config, const fs::path& checkpoint, bool identity, std::ostream& log)
{
    validate_experiment(config, false);
    if (config.out_dir.empty()) {
        throw ConfigError("no output directory (out)");
    }
    const FrameSequence frames = read_frame_directory(config.data_path);
    if (frames.size() == 0) {
        throw IngestionError("no frames in " + config.data_path.string());
    }
    fs::create_directories(config.out_dir);
    write_text(config.out_dir / "config.txt", resolved_config_text(config));

    const DiffStream stream = temporal_difference(frames, config.gop, config.video_mode);
    std::string bases;
    for (std::size_t i = 0; i < stream.frames.size(); ++i) {
        if (stream.frames[i].kind == FrameKind::Base) {
            bases += (bases.empty() ? "" : ", ") + std::to_string(i + 1);
        }
    }
    log << "SparseSBC video: " << frames.size() << " frames, gop=" << config.gop << ", mode=" << to_string(config.video_mode)
        << "\n  base frames: " << bases << "\n";

    std::optional<Checkpoint> ckpt;
    std::unique_ptr<FrameCodec> codec;
    if (identity) {
        codec = std::make_unique<IdentityCodec>();
        log << "  codec: noiseless identity\n";
    } else {
        if (checkpoint.empty()) {
            throw ConfigError("video needs --checkpoint unless --identity is given");
        }
        ckpt = load_checkpoint(checkpoint, config.arch);
        if (!(frames.frames.front().shape() == config.arch.image)) {
            throw ConfigError("frame shape " + to_string(frames.frames.front().shape()) + " does not match arch " +
                              to_string(config.arch.image));
        }
        codec = std::make_unique<ModelCodec>(ckpt->encoder, ckpt->decoder, config.arch, config.channel,
                                             RngStream::named(config.train.stream_seed("eval"), "video"));
        log << "  codec: " << checkpoint.string() << " over " << channel_label(config.channel) << "\n";
    }

    std::vector<std::optional<BitVector>> payloads;
    const DiffStream received = transmit_stream(stream, *codec, &payloads);
    const FrameSequence recon = reconstruct_sequence(received, config.video_mode);

    const fs::path decomposition = config.out_dir / "decomposition";
    const fs::path reconstructed = config.out_dir / "reconstructed";
    fs::create_directories(decomposition);
    fs::create_directories(reconstructed);

    auto csv = open_output(config.out_dir / "frames.csv");
    csv << "#schema=" << kFrameSchema << "\n" << "frame,kind,psnr_db,ssim,sparsity_fraction\n";
    for (std::size_t i = 0; i < stream.frames.size(); ++i) {
        const bool base = stream.frames[i].kind == FrameKind::Base;
        write_frame(denormalize(stream.frames[i].image), decomposition, base ? "base" : "diff", i + 1);
        write_frame(recon.frames[i], reconstructed, "frame", i + 1);
        const double sp = payloads[i] ? sparsity_fraction(*payloads[i]) : std::nan("");
        csv << i + 1 << "," << (base ? "base" : "diff") << "," << format_number(psnr(frames.frames[i], recon.frames[i]))
            << "," << format_number(ssim(frames.frames[i], recon.frames[i])) << "," << format_number(sp) << "\n";
    }
}

PlotKind plot_kind_from_string(const std::string& name)
{
    if (name == "snr") {
        return PlotKind::Snr;
    }
    if (name == "sparsity") {
        return PlotKind::Sparsity;
    }
    if (name == "sigma") {
        return PlotKind::Sigma;
    }
    throw ConfigError("unknown plot kind '" + name + "' (snr, sparsity, sigma)");
}

std::vector<fs::path> emit_plot_data(const fs::path& csv, PlotKind kind, const fs::path& out_dir)
{
    const CsvTable table = read_csv(csv);
    if (table.rows.empty()) {
        throw FormatError(csv.string() + ": no data rows");
    }
    fs::create_directories(out_dir);
    std::vector<fs::path> written;

    // Ordered by group name so the output does not depend on row order.
    std::map<std::string, std::vector<std::string>> series;
    std::string script;

    if (kind == PlotKind::Snr) {
        const auto c_kind = table.column("kind");
        const auto c_snr = table.column("snr_db");
        const auto c_psnr = table.column("psnr_db");
        const auto c_ssim = table.column("ssim");
        for (const auto& row : table.rows) {
            series[row[c_kind]].push_back(row[c_snr] + " " + row[c_psnr] + " " + row[c_ssim]);
        }
        script = "set xlabel 'SNR (dB)'\nset ylabel 'PSNR (dB)'\nset key bottom right\nplot ";
        std::size_t i = 0;
        for (const auto& [name, _] : series) {
            script += (i++ ? ", " : "") + std::string("'snr_") + name + ".dat' using 1:2 with linespoints title '" + name + "'";
        }
        script += "\n";
        for (auto& [name, lines] : series) {
            std::sort(lines.begin(), lines.end(), [](const std::string& a, const std::string& b) {
                return parse_field(a.substr(0, a.find(' '))) < parse_field(b.substr(0, b.find(' ')));
            });
        }
    } else if (kind == PlotKind::Sparsity) {
        const auto c_sp = table.column("sparsity_fraction");
        const auto it_kind = std::find(table.header.begin(), table.header.end(), "kind");
        const auto it_snr = std::find(table.header.begin(), table.header.end(), "snr_db");
        constexpr int kBins = 20;
        std::map<std::string, std::vector<int>> hist;
        for (const auto& row : table.rows) {
            const double v = parse_field(row[c_sp]);
            if (std::isnan(v)) {
                continue;
            }
            std::string group = it_kind == table.header.end() ? "all" : row[static_cast<std::size_t>(it_kind - table.header.begin())];
            if (it_snr != table.header.end()) {
                group += "_" + row[static_cast<std::size_t>(it_snr - table.header.begin())];
            }
            auto& h = hist[group];
            h.resize(kBins, 0);
            ++h[std::clamp(static_cast<int>(v * kBins), 0, kBins - 1)];
        }
        if (hist.empty()) {
            throw FormatError(csv.string() + ": no numeric sparsity_fraction values");
        }
        for (const auto& [name, h] : hist) {
            for (int b = 0; b < kBins; ++b) {
                series[name].push_back(format_number((b + 0.5) / kBins) + " " + std::to_string(h[static_cast<std::size_t>(b)]));
            }
        }
        script = "set xlabel 'fraction of 1-bits'\nset ylabel 'count'\nset style fill solid 0.5\nplot ";
        std::size_t i = 0;
        for (const auto& [name, _] : series) {
            script += (i++ ? ", " : "") + std::string("'sparsity_") + name + ".dat' using 1:2 with boxes title '" + name + "'";
        }
        script += "\n";
    } else {
        const auto c_epoch = table.column("epoch");
        const auto c_mode = table.column("sigma_mode");
        const auto c_rtx = table.column("reward_tx");
        const auto c_rrx = table.column("reward_rx");
        const auto c_psnr = table.column("psnr_db");
        const auto c_ssim = table.column("ssim");
        const auto c_sigma = table.column("sigma_mean");
        for (const auto& row : table.rows) {
            series[row[c_mode]].push_back(row[c_epoch] + " " + row[c_rtx] + " " + row[c_rrx] + " " + row[c_psnr] + " " +
                                          row[c_ssim] + " " + row[c_sigma]);
        }
        script = "set xlabel 'epoch'\nset ylabel 'PSNR (dB)'\nplot ";
        std::size_t i = 0;
        for (const auto& [name, _] : series) {
            script += (i++ ? ", " : "") + std::string("'sigma_") + name + ".dat' using 1:4 with lines title '" + name + "'";
        }
        script += "\n";
    }

    const std::string prefix = kind == PlotKind::Snr ? "snr" : kind == PlotKind::Sparsity ? "sparsity" : "sigma";
    for (const auto& [name, lines] : series) {
        const fs::path path = out_dir / (prefix + "_" + name + ".dat");
        auto out = open_output(path);
        out << "# " << name << "\n";
        for (const auto& line : lines) {
            out << line << "\n";
        }
        written.push_back(path);
    }
    const fs::path gp = out_dir / (prefix + ".gp");
    write_text(gp, script);
    written.push_back(gp);
    return written;
}

fs::path data_directory()
{
    if (const char* dir = std::getenv("SPARSESBC_DATA_DIR"); dir != nullptr && *dir != '\0') {
        return dir;
    }
    return SPARSESBC_DEFAULT_DATA_DIR;
}

} // namespace sparsesbc

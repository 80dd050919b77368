#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "prunekit/datamap.hpp"
#include "prunekit/errors.hpp"
#include "prunekit/parallel.hpp"
#include "prunekit/scoring.hpp"
#include "prunekit/selection.hpp"
#include "prunekit/trainer.hpp"

namespace fs = std::filesystem;
using namespace prunekit;

namespace {

// Writes go to <path>.tmp and land under the final name only on commit, so a
// failed run never leaves a partial output file behind.
class AtomicOutput {
  public:
    explicit AtomicOutput(fs::path final_path)
        : final_(std::move(final_path)), tmp_(final_.string() + ".tmp") {}
    ~AtomicOutput() {
        if (!committed_) {
            std::error_code ec;
            fs::remove(tmp_, ec);
        }
    }
    const fs::path& tmp() const { return tmp_; }
    void commit() {
        fs::rename(tmp_, final_);
        committed_ = true;
    }

  private:
    fs::path final_;
    fs::path tmp_;
    bool committed_ = false;
};

struct TrainArgs {
    std::string spec_path, config_path, out_trace, out_dataset, out_labels;
    std::string log_mode = "batch";
    DatasetSpec spec_override;
    TrainConfig config_override;
};

struct ScoreArgs {
    std::vector<std::string> traces;
    std::string method, out;
    uint64_t window = kDefaultWindow;
    int64_t epoch = -1;
    uint64_t first_m = kDefaultFirstM;
    uint64_t seed = 0;
    bool include_final_window = false;
};

struct PruneArgs {
    std::string scores_path, labels_path, out;
    double ratio = 0.0;
    bool balanced = false;
};

struct DatamapArgs {
    std::string trace, out_csv, out_svg, manifest;
    int buckets = kDefaultColorBuckets;
};

int run_train(const TrainArgs& args, const CLI::App* cmd) {
    DatasetSpec spec = parse_dataset_spec(args.spec_path);
    TrainConfig config = parse_train_config(args.config_path);
    auto overridden = [cmd](const std::string& flag) { return cmd->count(flag) > 0; };
    if (overridden("--n-easy")) spec.n_easy = args.spec_override.n_easy;
    if (overridden("--n-boundary")) spec.n_boundary = args.spec_override.n_boundary;
    if (overridden("--n-mislabeled")) spec.n_mislabeled = args.spec_override.n_mislabeled;
    if (overridden("--n-classes")) spec.n_classes = args.spec_override.n_classes;
    if (overridden("--dim")) spec.dim = args.spec_override.dim;
    if (overridden("--class-sep")) spec.class_sep = args.spec_override.class_sep;
    if (overridden("--boundary-scale"))
        spec.boundary_scale = args.spec_override.boundary_scale;
    if (overridden("--flip-rate")) spec.flip_rate = args.spec_override.flip_rate;
    if (overridden("--data-seed")) spec.seed = args.spec_override.seed;
    if (overridden("--epochs")) config.epochs = args.config_override.epochs;
    if (overridden("--batch-size")) config.batch_size = args.config_override.batch_size;
    if (overridden("--learning-rate"))
        config.learning_rate = args.config_override.learning_rate;
    if (overridden("--hidden-units")) config.hidden_units = args.config_override.hidden_units;
    if (overridden("--weight-decay")) config.weight_decay = args.config_override.weight_decay;
    if (overridden("--seed")) config.seed = args.config_override.seed;
    spec.check();

    LogMode mode;
    if (args.log_mode == "batch")
        mode = LogMode::kBatch;
    else if (args.log_mode == "epoch")
        mode = LogMode::kEpoch;
    else
        throw std::invalid_argument("log mode must be batch or epoch");

    std::cerr << "prunekit train spec=" << args.spec_path << " config=" << args.config_path
              << " data_seed=" << spec.seed << " train_seed=" << config.seed
              << " epochs=" << config.epochs << " log_mode=" << args.log_mode
              << " out=" << args.out_trace << "\n";

    LabeledDataset data = generate_synthetic(spec);
    AtomicOutput trace_out{fs::path(args.out_trace)};
    Model model = train_and_log(data, config, trace_out.tmp(), mode);
    trace_out.commit();
    if (!args.out_dataset.empty()) {
        AtomicOutput out{fs::path(args.out_dataset)};
        export_dataset_csv(data, out.tmp());
        out.commit();
    }
    if (!args.out_labels.empty()) {
        AtomicOutput out{fs::path(args.out_labels)};
        write_labels(data.labels, out.tmp());
        out.commit();
    }
    std::printf("train accuracy %.4f\n", evaluate(model, data));
    std::printf("trace written: %s (n=%zu, epochs=%llu)\n", args.out_trace.c_str(), data.size(),
                static_cast<unsigned long long>(config.epochs));
    return 0;
}

int run_score(const ScoreArgs& args) {
    Method method = method_from_name(args.method);
    if (args.traces.size() > 1 && method != Method::kEl2n)
        throw std::invalid_argument("multiple --trace only valid for el2n");
    if ((method == Method::kEl2n || method == Method::kEntropy) && args.epoch < 0)
        throw std::invalid_argument("--epoch is required for " + args.method);

    std::cerr << "prunekit score method=" << method_name(method)
              << " traces=" << args.traces.size() << " threads=" << thread_count()
              << " out=" << args.out << "\n";

    ScoreTable table;
    switch (method) {
        case Method::kDynUnc: {
            TraceReader reader(args.traces[0]);
            table = dyn_unc_scores(reader, args.window, args.include_final_window);
            break;
        }
        case Method::kForgetting: {
            TraceReader reader(args.traces[0]);
            table = forgetting_scores(reader);
            break;
        }
        case Method::kEl2n: {
            std::vector<TraceReader> readers;
            readers.reserve(args.traces.size());
            for (const std::string& path : args.traces) readers.emplace_back(path);
            table = el2n_scores(readers, static_cast<uint64_t>(args.epoch));
            break;
        }
        case Method::kEntropy: {
            TraceReader reader(args.traces[0]);
            table = entropy_scores(reader, static_cast<uint64_t>(args.epoch));
            break;
        }
        case Method::kStaticVariance: {
            TraceReader reader(args.traces[0]);
            table = static_variance_scores(reader, args.first_m);
            break;
        }
        case Method::kRandom: {
            TraceReader reader(args.traces[0]);
            table = random_scores(reader.header().n_samples, args.seed);
            table.trace = args.traces[0];
            break;
        }
    }

    AtomicOutput out{fs::path(args.out)};
    write_scores(table, out.tmp());
    out.commit();
    std::printf("scored %zu samples with %s\n", table.size(), method_name(table.method));
    return 0;
}

int run_prune(const PruneArgs& args) {
    if (!(args.ratio >= 0.0 && args.ratio < 1.0))
        throw std::invalid_argument("pruning ratio must be in [0,1)");
    std::cerr << "prunekit prune scores=" << args.scores_path << " ratio=" << args.ratio
              << " balanced=" << (args.balanced ? 1 : 0) << " out=" << args.out << "\n";

    ScoreTable table = read_scores(args.scores_path);
    PruneManifest manifest;
    if (args.balanced) {
        std::vector<uint32_t> labels = read_labels(args.labels_path);
        manifest = prune_class_balanced(table, labels, args.ratio);
    } else {
        manifest = prune(table, args.ratio);
    }
    AtomicOutput out{fs::path(args.out)};
    write_manifest(manifest, out.tmp());
    out.commit();
    std::printf("kept %zu / %llu\n", manifest.kept_ids.size(),
                static_cast<unsigned long long>(manifest.n_total));
    return 0;
}

int run_datamap(const DatamapArgs& args) {
    std::cerr << "prunekit datamap trace=" << args.trace << " out_csv=" << args.out_csv
              << " buckets=" << args.buckets << " threads=" << thread_count() << "\n";
    TraceReader reader(args.trace);
    DataMapStats stats = aggregate(reader);

    PruneManifest manifest;
    bool have_manifest = !args.manifest.empty();
    if (have_manifest) manifest = read_manifest(args.manifest);

    AtomicOutput csv_out{fs::path(args.out_csv)};
    emit_csv(stats, csv_out.tmp());
    csv_out.commit();
    if (!args.out_svg.empty()) {
        AtomicOutput svg_out{fs::path(args.out_svg)};
        emit_svg(stats, svg_out.tmp(), args.buckets, have_manifest ? &manifest : nullptr);
        svg_out.commit();
    }
    std::printf("data map over %zu samples, %llu epochs\n", stats.size(),
                static_cast<unsigned long long>(stats.n_epochs));
    return 0;
}

int run_inspect(const std::string& trace_path) {
    std::cerr << "prunekit inspect trace=" << trace_path << "\n";
    ValidationReport report = validate(trace_path);
    try {
        TraceReader reader(trace_path);
        const TraceHeader& h = reader.header();
        std::printf("n_samples   %llu\n", static_cast<unsigned long long>(h.n_samples));
        std::printf("n_epochs    %llu\n", static_cast<unsigned long long>(h.n_epochs));
        std::printf("n_classes   %u\n", h.n_classes);
        std::printf("channels    true_prob,correct%s%s\n", h.has_el2n() ? ",el2n" : "",
                    h.has_entropy() ? ",entropy" : "");
        std::printf("record_size %zu bytes\n", h.record_size());
        std::printf("file_size   %llu bytes\n", static_cast<unsigned long long>(h.file_size()));
    } catch (const std::exception& e) {
        std::printf("header unreadable: %s\n", e.what());
    }
    if (report.ok) {
        std::printf("validation  ok\n");
        return 0;
    }
    std::printf("validation  %llu violation(s)\n",
                static_cast<unsigned long long>(report.total_violations));
    std::fputs(report.to_text().c_str(), stdout);
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"prunekit: dataset pruning from training-dynamics traces"};
    app.require_subcommand(1);
    app.footer("Environment: PRUNEKIT_THREADS caps worker threads (default: all cores).");

    TrainArgs train_args;
    CLI::App* train_cmd =
        app.add_subcommand("train", "Generate a synthetic dataset, train, log a trace");
    train_cmd->add_option("--spec", train_args.spec_path, "Dataset spec file (key = value)")
        ->required();
    train_cmd->add_option("--config", train_args.config_path, "Train config file (key = value)")
        ->required();
    train_cmd->add_option("--out-trace", train_args.out_trace, "Output trace path")->required();
    train_cmd->add_option("--log-mode", train_args.log_mode,
                          "batch: log at batch time pre-update; epoch: full post-epoch pass");
    train_cmd->add_option("--out-dataset", train_args.out_dataset, "Export the dataset as CSV");
    train_cmd->add_option("--out-labels", train_args.out_labels,
                          "Export sample_id,label CSV for balanced pruning");
    train_cmd->add_option("--n-easy", train_args.spec_override.n_easy, "Override spec n_easy");
    train_cmd->add_option("--n-boundary", train_args.spec_override.n_boundary,
                          "Override spec n_boundary");
    train_cmd->add_option("--n-mislabeled", train_args.spec_override.n_mislabeled,
                          "Override spec n_mislabeled");
    train_cmd->add_option("--n-classes", train_args.spec_override.n_classes,
                          "Override spec n_classes");
    train_cmd->add_option("--dim", train_args.spec_override.dim, "Override spec dim");
    train_cmd->add_option("--class-sep", train_args.spec_override.class_sep,
                          "Override spec class_sep");
    train_cmd->add_option("--boundary-scale", train_args.spec_override.boundary_scale,
                          "Override spec boundary_scale");
    train_cmd->add_option("--flip-rate", train_args.spec_override.flip_rate,
                          "Override spec flip_rate");
    train_cmd->add_option("--data-seed", train_args.spec_override.seed, "Override dataset seed");
    train_cmd->add_option("--epochs", train_args.config_override.epochs, "Override epochs");
    train_cmd->add_option("--batch-size", train_args.config_override.batch_size,
                          "Override batch size");
    train_cmd->add_option("--learning-rate", train_args.config_override.learning_rate,
                          "Override learning rate");
    train_cmd->add_option("--hidden-units", train_args.config_override.hidden_units,
                          "Override hidden units");
    train_cmd->add_option("--weight-decay", train_args.config_override.weight_decay,
                          "Override weight decay");
    train_cmd->add_option("--seed", train_args.config_override.seed, "Override training seed");

    ScoreArgs score_args;
    CLI::App* score_cmd = app.add_subcommand("score", "Compute per-sample importance scores");
    score_cmd->add_option("--trace", score_args.traces, "Input trace (repeatable for el2n)")
        ->required();
    score_cmd
        ->add_option("--method", score_args.method,
                     "dyn_unc | forgetting | el2n | entropy | static_variance | random")
        ->required();
    score_cmd->add_option("--window", score_args.window, "Sliding window length J (dyn_unc)");
    score_cmd->add_option("--epoch", score_args.epoch, "Epoch index (el2n, entropy)");
    score_cmd->add_option("--first-m", score_args.first_m,
                          "Leading epoch count (static_variance)");
    score_cmd->add_option("--seed", score_args.seed, "Seed (random)");
    score_cmd->add_flag("--include-final-window", score_args.include_final_window,
                        "Also count the window ending at the final epoch (dyn_unc)");
    score_cmd->add_option("--out", score_args.out, "Output score CSV")->required();

    PruneArgs prune_args;
    CLI::App* prune_cmd = app.add_subcommand("prune", "Cut a score table into a kept manifest");
    prune_cmd->add_option("--scores", prune_args.scores_path, "Score CSV from `score`")
        ->required();
    prune_cmd->add_option("--ratio", prune_args.ratio, "Pruning ratio r in [0,1)")->required();
    CLI::Option* labels_opt =
        prune_cmd->add_option("--labels", prune_args.labels_path, "sample_id,label CSV");
    prune_cmd->add_flag("--balanced", prune_args.balanced, "Keep floor((1-r)*n_c) per class")
        ->needs(labels_opt);
    prune_cmd->add_option("--out", prune_args.out, "Output manifest path")->required();

    DatamapArgs datamap_args;
    CLI::App* datamap_cmd =
        app.add_subcommand("datamap", "Per-sample mean/std/correct summary and scatter plot");
    datamap_cmd->add_option("--trace", datamap_args.trace, "Input trace")->required();
    datamap_cmd->add_option("--out-csv", datamap_args.out_csv, "Output CSV path")->required();
    datamap_cmd->add_option("--out-svg", datamap_args.out_svg, "Optional SVG scatter path");
    datamap_cmd->add_option("--manifest", datamap_args.manifest,
                            "Overlay manifest; removed samples get a black outline");
    datamap_cmd->add_option("--buckets", datamap_args.buckets, "Color buckets for correct_count");

    std::string inspect_trace;
    CLI::App* inspect_cmd = app.add_subcommand("inspect", "Print header fields and validate");
    inspect_cmd->add_option("--trace", inspect_trace, "Trace to validate")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }

    try {
        if (app.got_subcommand(train_cmd)) return run_train(train_args, train_cmd);
        if (app.got_subcommand(score_cmd)) {
            if (score_args.window < 2) {
                std::cerr << "window must be >= 2\n";
                return 1;
            }
            return run_score(score_args);
        }
        if (app.got_subcommand(prune_cmd)) return run_prune(prune_args);
        if (app.got_subcommand(datamap_cmd)) return run_datamap(datamap_args);
        if (app.got_subcommand(inspect_cmd)) return run_inspect(inspect_trace);
    } catch (const io_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const data_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "prunekit/datamap.hpp"
#include "prunekit/errors.hpp"
#include "prunekit/scoring.hpp"
#include "prunekit/selection.hpp"
#include "prunekit/trace.hpp"
#include "prunekit/trainer.hpp"

namespace py = pybind11;
using namespace prunekit;

namespace {

LogMode log_mode_from_name(const std::string& name) {
    if (name == "batch") return LogMode::kBatch;
    if (name == "epoch") return LogMode::kEpoch;
    throw std::invalid_argument("unknown log mode: " + name);
}

const char* schedule_name(LrSchedule s) {
    return s == LrSchedule::kCosine ? "cosine" : "constant";
}

LrSchedule schedule_from_name(const std::string& name) {
    if (name == "constant") return LrSchedule::kConstant;
    if (name == "cosine") return LrSchedule::kCosine;
    throw std::invalid_argument("unknown lr schedule: " + name);
}

std::vector<std::string> archetype_names(const LabeledDataset& data) {
    std::vector<std::string> out;
    out.reserve(data.archetypes.size());
    for (Archetype a : data.archetypes) out.emplace_back(archetype_name(a));
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Dataset pruning toolkit: trace scoring, coreset selection, data maps";

    py::register_exception<data_error>(m, "DataError", PyExc_ValueError);
    py::register_exception<io_error>(m, "IoError", PyExc_OSError);

    py::class_<TraceHeader>(m, "TraceHeader")
        .def(py::init<>())
        .def_readwrite("version", &TraceHeader::version)
        .def_readwrite("channel_flags", &TraceHeader::channel_flags)
        .def_readwrite("n_samples", &TraceHeader::n_samples)
        .def_readwrite("n_epochs", &TraceHeader::n_epochs)
        .def_readwrite("n_classes", &TraceHeader::n_classes)
        .def_property_readonly("has_el2n", &TraceHeader::has_el2n)
        .def_property_readonly("has_entropy", &TraceHeader::has_entropy)
        .def_property_readonly("record_size", &TraceHeader::record_size)
        .def_property_readonly("file_size", &TraceHeader::file_size);

    py::class_<ValidationFinding>(m, "ValidationFinding")
        .def_readonly("level", &ValidationFinding::level)
        .def_readonly("sample", &ValidationFinding::sample)
        .def_readonly("epoch", &ValidationFinding::epoch)
        .def_readonly("field", &ValidationFinding::field)
        .def_readonly("msg", &ValidationFinding::msg)
        .def("to_line", &ValidationFinding::to_line)
        .def("__repr__", &ValidationFinding::to_line);

    py::class_<ValidationReport>(m, "ValidationReport")
        .def_readonly("ok", &ValidationReport::ok)
        .def_readonly("total_violations", &ValidationReport::total_violations)
        .def_readonly("findings", &ValidationReport::findings)
        .def_readonly("expected_bytes", &ValidationReport::expected_bytes)
        .def_readonly("actual_bytes", &ValidationReport::actual_bytes)
        .def("to_text", &ValidationReport::to_text);

    py::class_<ScoreTable>(m, "ScoreTable")
        .def(py::init([](const std::string& method, std::vector<double> scores,
                         std::vector<std::pair<std::string, std::string>> params,
                         std::string trace) {
                 ScoreTable t;
                 t.method = method_from_name(method);
                 t.scores = std::move(scores);
                 t.params = std::move(params);
                 t.trace = std::move(trace);
                 return t;
             }),
             py::arg("method"), py::arg("scores"),
             py::arg("params") = std::vector<std::pair<std::string, std::string>>{},
             py::arg("trace") = std::string{})
        .def_property(
            "method", [](const ScoreTable& t) { return std::string(method_name(t.method)); },
            [](ScoreTable& t, const std::string& name) { t.method = method_from_name(name); })
        .def_readwrite("params", &ScoreTable::params)
        .def_readwrite("trace", &ScoreTable::trace)
        .def_readwrite("scores", &ScoreTable::scores)
        .def("__len__", &ScoreTable::size);

    py::class_<PruneManifest>(m, "PruneManifest")
        .def(py::init<>())
        .def_readwrite("version", &PruneManifest::version)
        .def_readwrite("method", &PruneManifest::method)
        .def_readwrite("params", &PruneManifest::params)
        .def_readwrite("pruning_ratio", &PruneManifest::pruning_ratio)
        .def_readwrite("n_total", &PruneManifest::n_total)
        .def_readwrite("balanced", &PruneManifest::balanced)
        .def_readwrite("created", &PruneManifest::created)
        .def_readwrite("kept_ids", &PruneManifest::kept_ids)
        .def("__len__", [](const PruneManifest& p) { return p.kept_ids.size(); });

    py::class_<DataMapStats>(m, "DataMapStats")
        .def_readonly("n_epochs", &DataMapStats::n_epochs)
        .def_readonly("mean_prob", &DataMapStats::mean_prob)
        .def_readonly("std_prob", &DataMapStats::std_prob)
        .def_readonly("correct_count", &DataMapStats::correct_count)
        .def("__len__", &DataMapStats::size);

    py::class_<DatasetSpec>(m, "DatasetSpec")
        .def(py::init<>())
        .def_readwrite("n_easy", &DatasetSpec::n_easy)
        .def_readwrite("n_boundary", &DatasetSpec::n_boundary)
        .def_readwrite("n_mislabeled", &DatasetSpec::n_mislabeled)
        .def_readwrite("n_classes", &DatasetSpec::n_classes)
        .def_readwrite("dim", &DatasetSpec::dim)
        .def_readwrite("class_sep", &DatasetSpec::class_sep)
        .def_readwrite("boundary_scale", &DatasetSpec::boundary_scale)
        .def_readwrite("flip_rate", &DatasetSpec::flip_rate)
        .def_readwrite("seed", &DatasetSpec::seed)
        .def("total", &DatasetSpec::total)
        .def("check", &DatasetSpec::check);

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("epochs", &TrainConfig::epochs)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("learning_rate", &TrainConfig::learning_rate)
        .def_property(
            "lr_schedule",
            [](const TrainConfig& c) { return std::string(schedule_name(c.lr_schedule)); },
            [](TrainConfig& c, const std::string& name) { c.lr_schedule = schedule_from_name(name); })
        .def_readwrite("hidden_units", &TrainConfig::hidden_units)
        .def_readwrite("weight_decay", &TrainConfig::weight_decay)
        .def_readwrite("seed", &TrainConfig::seed)
        .def("check", &TrainConfig::check);

    py::class_<LabeledDataset>(m, "LabeledDataset")
        .def_readonly("n_classes", &LabeledDataset::n_classes)
        .def_readonly("dim", &LabeledDataset::dim)
        .def_readonly("features", &LabeledDataset::features)
        .def_readonly("labels", &LabeledDataset::labels)
        .def_readonly("gen_class", &LabeledDataset::gen_class)
        .def_property_readonly("archetypes", &archetype_names)
        .def("row",
             [](const LabeledDataset& d, size_t i) {
                 if (i >= d.size()) throw py::index_error();
                 auto r = d.row(i);
                 return std::vector<double>(r.begin(), r.end());
             })
        .def("__len__", &LabeledDataset::size);

    py::class_<Model>(m, "Model")
        .def_readonly("n_classes", &Model::n_classes)
        .def_readonly("dim", &Model::dim)
        .def_readonly("hidden_units", &Model::hidden_units)
        .def_readonly("w1", &Model::w1)
        .def_readonly("b1", &Model::b1)
        .def_readonly("w2", &Model::w2)
        .def_readonly("b2", &Model::b2)
        .def("predict", [](const Model& model, const std::vector<double>& x) {
            if (x.size() != model.dim)
                throw std::invalid_argument("feature row has wrong dimensionality");
            return model.predict(x);
        });

    m.def("window_std",
          [](const std::vector<double>& values) { return window_std(values); });

    m.def(
        "dyn_unc_scores",
        [](const std::filesystem::path& trace, uint64_t window, bool include_final_window,
           unsigned threads) {
            TraceReader reader(trace);
            return dyn_unc_scores(reader, window, include_final_window, threads);
        },
        py::arg("trace"), py::arg("window") = kDefaultWindow,
        py::arg("include_final_window") = false, py::arg("threads") = 0,
        py::call_guard<py::gil_scoped_release>());

    m.def(
        "forgetting_scores",
        [](const std::filesystem::path& trace, unsigned threads) {
            TraceReader reader(trace);
            return forgetting_scores(reader, threads);
        },
        py::arg("trace"), py::arg("threads") = 0, py::call_guard<py::gil_scoped_release>());

    m.def(
        "el2n_scores",
        [](const std::vector<std::filesystem::path>& traces, uint64_t epoch) {
            std::vector<TraceReader> readers;
            readers.reserve(traces.size());
            for (const auto& p : traces) readers.emplace_back(p);
            return el2n_scores(readers, epoch);
        },
        py::arg("traces"), py::arg("epoch"), py::call_guard<py::gil_scoped_release>());

    m.def(
        "entropy_scores",
        [](const std::filesystem::path& trace, uint64_t epoch) {
            TraceReader reader(trace);
            return entropy_scores(reader, epoch);
        },
        py::arg("trace"), py::arg("epoch"), py::call_guard<py::gil_scoped_release>());

    m.def(
        "static_variance_scores",
        [](const std::filesystem::path& trace, uint64_t first_m_epochs, unsigned threads) {
            TraceReader reader(trace);
            return static_variance_scores(reader, first_m_epochs, threads);
        },
        py::arg("trace"), py::arg("first_m_epochs") = kDefaultFirstM, py::arg("threads") = 0,
        py::call_guard<py::gil_scoped_release>());

    m.def("random_scores", &random_scores, py::arg("n_samples"), py::arg("seed"));

    m.def("write_scores", &write_scores, py::arg("table"), py::arg("path"));
    m.def("read_scores", &read_scores, py::arg("path"));

    m.def("rank", &rank, py::arg("table"));
    m.def("keep_count", &keep_count, py::arg("n"), py::arg("ratio"));
    m.def("prune", &prune, py::arg("table"), py::arg("ratio"));
    m.def("prune_class_balanced", &prune_class_balanced, py::arg("table"), py::arg("labels"),
          py::arg("ratio"), py::arg("n_classes") = 0);
    m.def("write_manifest", &write_manifest, py::arg("manifest"), py::arg("path"));
    m.def("read_manifest", &read_manifest, py::arg("path"));
    m.def("write_labels", &write_labels, py::arg("labels"), py::arg("path"));
    m.def("read_labels", &read_labels, py::arg("path"));

    m.def(
        "aggregate",
        [](const std::filesystem::path& trace, unsigned threads) {
            TraceReader reader(trace);
            return aggregate(reader, threads);
        },
        py::arg("trace"), py::arg("threads") = 0, py::call_guard<py::gil_scoped_release>());

    m.def("emit_csv", &emit_csv, py::arg("stats"), py::arg("path"));
    m.def(
        "emit_svg",
        [](const DataMapStats& stats, const std::filesystem::path& path, int color_buckets,
           const std::optional<PruneManifest>& overlay) {
            emit_svg(stats, path, color_buckets, overlay ? &*overlay : nullptr);
        },
        py::arg("stats"), py::arg("path"), py::arg("color_buckets") = kDefaultColorBuckets,
        py::arg("overlay") = std::nullopt);

    m.def("validate", &validate, py::arg("path"));
    m.def("trace_header", [](const std::filesystem::path& path) {
        return TraceReader(path).header();
    });

    m.def("generate_synthetic", &generate_synthetic, py::arg("spec"));
    m.def(
        "train_and_log",
        [](const LabeledDataset& data, const TrainConfig& config,
           const std::filesystem::path& trace_path, const std::string& log_mode) {
            return train_and_log(data, config, trace_path, log_mode_from_name(log_mode));
        },
        py::arg("data"), py::arg("config"), py::arg("trace_path"),
        py::arg("log_mode") = std::string("batch"), py::call_guard<py::gil_scoped_release>());
    m.def("train_on_subset", &train_on_subset, py::arg("data"), py::arg("manifest"),
          py::arg("config"), py::call_guard<py::gil_scoped_release>());
    m.def("evaluate", &evaluate, py::arg("model"), py::arg("data"));

    m.def("el2n_value", [](const std::vector<double>& probs, uint32_t label) {
        return el2n_value(probs, label);
    });
    m.def("entropy_value",
          [](const std::vector<double>& probs) { return entropy_value(probs); });

    m.def("parse_dataset_spec", &parse_dataset_spec, py::arg("path"));
    m.def("parse_train_config", &parse_train_config, py::arg("path"));
    m.def("export_dataset_csv", &export_dataset_csv, py::arg("data"), py::arg("path"));
}

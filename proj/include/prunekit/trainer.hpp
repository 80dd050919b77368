#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "prunekit/selection.hpp"

namespace prunekit {

enum class Archetype : uint8_t { kEasy, kBoundary, kMislabeled };
const char* archetype_name(Archetype a);

// Synthetic-dataset recipe: per-class Gaussian clusters with three sample
// archetypes. Easy samples sit on their class center, boundary samples sit
// between two centers at boundary_scale from the midpoint, mislabeled samples
// have easy geometry with the label reassigned to a wrong class.
struct DatasetSpec {
    uint64_t n_easy = 0;
    uint64_t n_boundary = 0;
    uint64_t n_mislabeled = 0;
    uint32_t n_classes = 2;
    uint32_t dim = 10;
    double class_sep = 4.0;
    double boundary_scale = 0.1;
    double flip_rate = 1.0;
    uint64_t seed = 0;

    uint64_t total() const { return n_easy + n_boundary + n_mislabeled; }
    void check() const;
};

struct LabeledDataset {
    uint32_t n_classes = 2;
    uint32_t dim = 0;
    std::vector<double> features;  // n rows of dim, row-major
    std::vector<uint32_t> labels;
    std::vector<uint32_t> gen_class;  // class whose cluster produced the geometry
    std::vector<Archetype> archetypes;

    size_t size() const { return labels.size(); }
    std::span<const double> row(size_t i) const {
        return std::span<const double>(features.data() + i * dim, dim);
    }
};

enum class LrSchedule { kConstant, kCosine };

struct TrainConfig {
    uint64_t epochs = 60;
    uint64_t batch_size = 32;
    double learning_rate = 0.5;
    LrSchedule lr_schedule = LrSchedule::kConstant;
    uint32_t hidden_units = 0;  // 0 = softmax regression, else one tanh hidden layer
    double weight_decay = 0.0;
    uint64_t seed = 0;

    void check() const;
};

// All parameters in 64-bit floats. hidden_units = 0 leaves w1/b1 empty and
// w2/b2 hold the linear map (n_classes x dim).
struct Model {
    uint32_t n_classes = 0;
    uint32_t dim = 0;
    uint32_t hidden_units = 0;
    std::vector<double> w1, b1;  // hidden_units x dim, hidden_units
    std::vector<double> w2, b2;  // n_classes x (dim or hidden_units), n_classes

    // Softmax probabilities over classes for one feature row.
    std::vector<double> predict(std::span<const double> x) const;
};

// When to log each sample's prediction record: at its batch with the current
// pre-update parameters, or in a full post-epoch pass in id order.
enum class LogMode { kBatch, kEpoch };

// Deterministic for a fixed spec: same seed gives identical features, labels
// and archetype tags. Ids are contiguous per archetype: easy block first,
// then boundary, then mislabeled.
LabeledDataset generate_synthetic(const DatasetSpec& spec);

// Mini-batch SGD with cross-entropy loss and seeded shuffling. Appends one
// epoch block per epoch with true_prob/correct/el2n/entropy channels; trace
// bytes are fully determined by (dataset, config).
Model train_and_log(const LabeledDataset& data, const TrainConfig& config,
                    const std::filesystem::path& trace_path, LogMode mode = LogMode::kBatch);

// The same loop restricted to the manifest's kept ids (ascending), without
// trace logging. A manifest keeping every id reproduces train_and_log's model
// bit for bit under the same config.
Model train_on_subset(const LabeledDataset& data, const PruneManifest& manifest,
                      const TrainConfig& config);

// Top-1 accuracy.
double evaluate(const Model& model, const LabeledDataset& data);

// The logged-channel formulas, exposed for direct checking. el2n_value is the
// L2 distance between the probability vector and the label's one-hot vector;
// entropy_value is -sum p ln p, clamped into [0, ln C] before narrowing so the
// stored float never exceeds the bound.
float el2n_value(std::span<const double> probs, uint32_t label);
float entropy_value(std::span<const double> probs);

// key = value files, # comments. Unknown keys are rejected.
DatasetSpec parse_dataset_spec(const std::filesystem::path& path);
TrainConfig parse_train_config(const std::filesystem::path& path);

// Header `id,label,archetype,f0..f{dim-1}`; features at 17 significant digits.
void export_dataset_csv(const LabeledDataset& data, const std::filesystem::path& path);

}  // namespace prunekit

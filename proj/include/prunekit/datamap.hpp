#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "prunekit/selection.hpp"
#include "prunekit/trace.hpp"

namespace prunekit {

constexpr int kDefaultColorBuckets = 10;

// Per-sample training-dynamics summary over all K epochs: mean and standard
// deviation (divisor K-1) of true_prob, plus the correct-prediction count.
struct DataMapStats {
    uint64_t n_epochs = 0;
    std::vector<double> mean_prob;
    std::vector<double> std_prob;
    std::vector<uint64_t> correct_count;

    size_t size() const { return mean_prob.size(); }
};

// One streaming pass with per-sample sum / sum-of-squares / correct
// accumulators in 64-bit. Requires K >= 2. threads = 0 uses thread_count().
DataMapStats aggregate(TraceReader& reader, unsigned threads = 0);

// Header `sample_id,mean_prob,std_prob,correct_count`, one row per sample in
// ascending id, 9 significant digits.
void emit_csv(const DataMapStats& stats, const std::filesystem::path& path);

// Scatter of std_prob (x) against mean_prob (y), one circle per sample,
// colored by correct_count quantized into color_buckets levels. When overlay
// is given, samples absent from its kept set are drawn with a black outline.
void emit_svg(const DataMapStats& stats, const std::filesystem::path& path,
              int color_buckets = kDefaultColorBuckets, const PruneManifest* overlay = nullptr);

}  // namespace prunekit

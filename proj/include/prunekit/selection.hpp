#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "prunekit/scoring.hpp"

namespace prunekit {

constexpr int kManifestVersion = 1;

// Coreset description: ids kept after the cut, in descending-score order with
// ties broken by ascending id.
struct PruneManifest {
    int version = kManifestVersion;
    std::string method;
    std::string params;  // k=v pairs joined by commas, copied from the ScoreTable
    double pruning_ratio = 0.0;
    uint64_t n_total = 0;
    bool balanced = false;
    std::string created;  // ISO 8601 UTC
    std::vector<uint64_t> kept_ids;
};

// Total order over sample ids: score descending, ties by ascending id.
// Rejects non-finite scores, naming the offending sample.
std::vector<uint64_t> rank(const ScoreTable& table);

// floor((1-r)*n)
uint64_t keep_count(uint64_t n, double ratio);

// Keeps the first keep_count(n, r) ids of rank(table).
PruneManifest prune(const ScoreTable& table, double ratio);

// Keeps the top keep_count(n_c, r) per class under the same comparator.
// n_classes = 0 derives the class count from the labels.
PruneManifest prune_class_balanced(const ScoreTable& table, const std::vector<uint32_t>& labels,
                                   double ratio, uint32_t n_classes = 0);

// Line 1 is a JSON header {version, method, params, pruning_ratio, n_total,
// balanced, created}; each following line is one kept id in kept order.
void write_manifest(const PruneManifest& manifest, const std::filesystem::path& path);
PruneManifest read_manifest(const std::filesystem::path& path);

// Labels CSV: header `sample_id,label`, one row per sample in ascending id.
void write_labels(const std::vector<uint32_t>& labels, const std::filesystem::path& path);
std::vector<uint32_t> read_labels(const std::filesystem::path& path);

}  // namespace prunekit

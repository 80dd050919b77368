#include "prunekit/selection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

#include "json.hpp"
#include "prunekit/errors.hpp"

namespace prunekit {

namespace {

std::string now_iso8601() {
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string join_params(const std::vector<std::pair<std::string, std::string>>& params) {
    std::string out;
    for (const auto& [k, v] : params) {
        if (!out.empty()) out += ',';
        out += k;
        out += '=';
        out += v;
    }
    return out;
}

void check_ratio(double ratio) {
    if (!(ratio >= 0.0 && ratio < 1.0))
        throw std::invalid_argument("pruning ratio must be in [0,1), got " +
                                    std::to_string(ratio));
}

}  // namespace

std::vector<uint64_t> rank(const ScoreTable& table) {
    const size_t n = table.scores.size();
    if (n == 0) throw std::invalid_argument("score table is empty");
    for (size_t i = 0; i < n; ++i)
        if (!std::isfinite(table.scores[i]))
            throw data_error("sample " + std::to_string(i) + " has non-finite score");

    std::vector<uint64_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](uint64_t a, uint64_t b) {
        if (table.scores[a] != table.scores[b]) return table.scores[a] > table.scores[b];
        return a < b;
    });
    return order;
}

uint64_t keep_count(uint64_t n, double ratio) {
    return static_cast<uint64_t>(std::floor((1.0 - ratio) * static_cast<double>(n)));
}

PruneManifest prune(const ScoreTable& table, double ratio) {
    check_ratio(ratio);
    std::vector<uint64_t> order = rank(table);
    const uint64_t keep = keep_count(order.size(), ratio);

    PruneManifest manifest;
    manifest.method = method_name(table.method);
    manifest.params = join_params(table.params);
    manifest.pruning_ratio = ratio;
    manifest.n_total = order.size();
    manifest.balanced = false;
    manifest.created = now_iso8601();
    manifest.kept_ids.assign(order.begin(), order.begin() + keep);
    return manifest;
}

PruneManifest prune_class_balanced(const ScoreTable& table, const std::vector<uint32_t>& labels,
                                   double ratio, uint32_t n_classes) {
    check_ratio(ratio);
    const size_t n = table.scores.size();
    if (labels.size() != n)
        throw data_error("labels length " + std::to_string(labels.size()) +
                         " does not match score table length " + std::to_string(n));
    uint32_t n_c = n_classes;
    if (n_c == 0) {
        for (uint32_t label : labels) n_c = std::max(n_c, label + 1);
    } else {
        for (uint32_t label : labels)
            if (label >= n_c)
                throw data_error("label " + std::to_string(label) + " out of [0, " +
                                 std::to_string(n_c) + ")");
    }

    std::vector<uint64_t> class_sizes(n_c, 0);
    for (uint32_t label : labels) ++class_sizes[label];
    std::vector<uint64_t> quota(n_c);
    for (uint32_t c = 0; c < n_c; ++c) quota[c] = keep_count(class_sizes[c], ratio);

    PruneManifest manifest;
    manifest.method = method_name(table.method);
    manifest.params = join_params(table.params);
    manifest.pruning_ratio = ratio;
    manifest.n_total = n;
    manifest.balanced = true;
    manifest.created = now_iso8601();

    std::vector<uint64_t> taken(n_c, 0);
    for (uint64_t id : rank(table)) {
        uint32_t c = labels[id];
        if (taken[c] < quota[c]) {
            ++taken[c];
            manifest.kept_ids.push_back(id);
        }
    }
    return manifest;
}

void write_manifest(const PruneManifest& manifest, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error("cannot open " + path.string() + " for writing");
    nlohmann::ordered_json header;
    header["version"] = manifest.version;
    header["method"] = manifest.method;
    header["params"] = manifest.params;
    header["pruning_ratio"] = manifest.pruning_ratio;
    header["n_total"] = manifest.n_total;
    header["balanced"] = manifest.balanced;
    header["created"] = manifest.created;
    out << header.dump() << '\n';
    for (uint64_t id : manifest.kept_ids) out << id << '\n';
    if (!out) throw io_error("write failed on " + path.string());
}

PruneManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw data_error("empty manifest: " + path.string());

    PruneManifest manifest;
    try {
        nlohmann::json header = nlohmann::json::parse(line);
        manifest.version = header.at("version").get<int>();
        if (manifest.version != kManifestVersion)
            throw data_error("unsupported manifest version " +
                             std::to_string(manifest.version));
        manifest.method = header.at("method").get<std::string>();
        manifest.params = header.at("params").get<std::string>();
        manifest.pruning_ratio = header.at("pruning_ratio").get<double>();
        manifest.n_total = header.at("n_total").get<uint64_t>();
        manifest.balanced = header.at("balanced").get<bool>();
        manifest.created = header.at("created").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw data_error("malformed manifest header: " + std::string(e.what()));
    }

    std::unordered_set<uint64_t> seen;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        char* end = nullptr;
        unsigned long long id = std::strtoull(line.c_str(), &end, 10);
        if (end != line.c_str() + line.size())
            throw data_error("malformed id line: " + line);
        if (id >= manifest.n_total)
            throw data_error("sample id " + std::to_string(id) + " out of range (n_total=" +
                             std::to_string(manifest.n_total) + ")");
        if (!seen.insert(id).second)
            throw data_error("duplicate sample id " + std::to_string(id));
        manifest.kept_ids.push_back(id);
    }
    return manifest;
}

void write_labels(const std::vector<uint32_t>& labels, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error("cannot open " + path.string() + " for writing");
    out << "sample_id,label\n";
    for (size_t i = 0; i < labels.size(); ++i) out << i << ',' << labels[i] << '\n';
    if (!out) throw io_error("write failed on " + path.string());
}

std::vector<uint32_t> read_labels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "sample_id,label")
        throw data_error("missing sample_id,label header in " + path.string());
    std::vector<uint32_t> labels;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        size_t comma = line.find(',');
        if (comma == std::string::npos) throw data_error("malformed label row: " + line);
        char* end = nullptr;
        unsigned long long id = std::strtoull(line.c_str(), &end, 10);
        if (end != line.c_str() + comma || id != labels.size())
            throw data_error("malformed label row: " + line);
        unsigned long long label = std::strtoull(line.c_str() + comma + 1, &end, 10);
        if (end != line.c_str() + line.size()) throw data_error("malformed label row: " + line);
        labels.push_back(static_cast<uint32_t>(label));
    }
    if (labels.empty()) throw data_error("label table is empty: " + path.string());
    return labels;
}

}  // namespace prunekit

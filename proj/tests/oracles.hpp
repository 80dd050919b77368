#pragma once

// Brute-force reference implementations and trace builders shared by the test
// suites. Everything here is written directly from the definitions, kept
// independent of the streaming code paths it checks: traces are materialized
// per sample, statistics are computed two-pass, serialization packs bytes by
// hand.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "prunekit/trace.hpp"

namespace testutil {

// Row-major per-epoch values plus the header facts needed to serialize.
struct SeriesTrace {
    uint64_t n = 0;
    uint64_t k = 0;
    uint32_t n_classes = 2;
    bool with_el2n = false;
    bool with_entropy = false;
    std::vector<std::vector<float>> true_prob;  // [epoch][sample]
    std::vector<std::vector<uint8_t>> correct;
    std::vector<std::vector<float>> el2n;
    std::vector<std::vector<float>> entropy;
};

inline SeriesTrace random_trace(uint64_t n, uint64_t k, uint32_t seed, bool with_el2n = false,
                                bool with_entropy = false, uint32_t n_classes = 2) {
    std::mt19937 gen(seed);
    std::uniform_real_distribution<float> prob(0.0f, 1.0f);
    std::uniform_real_distribution<float> el2n_dist(0.0f, 1.41421f);
    std::uniform_real_distribution<float> ent_dist(
        0.0f, 0.999f * static_cast<float>(std::log(static_cast<double>(n_classes))));
    std::bernoulli_distribution flip(0.5);

    SeriesTrace t;
    t.n = n;
    t.k = k;
    t.n_classes = n_classes;
    t.with_el2n = with_el2n;
    t.with_entropy = with_entropy;
    t.true_prob.resize(k);
    t.correct.resize(k);
    if (with_el2n) t.el2n.resize(k);
    if (with_entropy) t.entropy.resize(k);
    for (uint64_t e = 0; e < k; ++e) {
        t.true_prob[e].resize(n);
        t.correct[e].resize(n);
        if (with_el2n) t.el2n[e].resize(n);
        if (with_entropy) t.entropy[e].resize(n);
        for (uint64_t i = 0; i < n; ++i) {
            t.true_prob[e][i] = prob(gen);
            t.correct[e][i] = flip(gen) ? 1 : 0;
            if (with_el2n) t.el2n[e][i] = el2n_dist(gen);
            if (with_entropy) t.entropy[e][i] = ent_dist(gen);
        }
    }
    return t;
}

// A trace defined by explicit per-sample series (handy for hand fixtures).
inline SeriesTrace from_series(const std::vector<std::vector<float>>& per_sample_probs,
                               const std::vector<std::vector<uint8_t>>& per_sample_correct = {}) {
    SeriesTrace t;
    t.n = per_sample_probs.size();
    t.k = per_sample_probs.front().size();
    t.true_prob.assign(t.k, std::vector<float>(t.n));
    t.correct.assign(t.k, std::vector<uint8_t>(t.n, 1));
    for (uint64_t i = 0; i < t.n; ++i)
        for (uint64_t e = 0; e < t.k; ++e) {
            t.true_prob[e][i] = per_sample_probs[i][e];
            if (!per_sample_correct.empty()) t.correct[e][i] = per_sample_correct[i][e];
        }
    return t;
}

inline uint16_t trace_flags(const SeriesTrace& t) {
    uint16_t flags = prunekit::kMandatoryChannels;
    if (t.with_el2n) flags |= prunekit::kChannelEl2n;
    if (t.with_entropy) flags |= prunekit::kChannelEntropy;
    return flags;
}

// Hand-rolled little-endian serialization of the documented layout.
inline std::vector<char> serialize_trace_bytes(const SeriesTrace& t) {
    std::vector<char> out;
    auto put_u16 = [&out](uint16_t v) {
        out.push_back(static_cast<char>(v & 0xff));
        out.push_back(static_cast<char>(v >> 8));
    };
    auto put_u32 = [&out](uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    };
    auto put_u64 = [&out](uint64_t v) {
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    };
    auto put_f32 = [&](float v) {
        uint32_t bits;
        std::memcpy(&bits, &v, 4);
        put_u32(bits);
    };

    out.push_back('D');
    out.push_back('U');
    out.push_back('T');
    out.push_back('R');
    put_u16(1);
    put_u16(trace_flags(t));
    put_u64(t.n);
    put_u64(t.k);
    put_u32(t.n_classes);
    for (int i = 0; i < 12; ++i) out.push_back(0);

    for (uint64_t e = 0; e < t.k; ++e) {
        put_u64(e);
        for (uint64_t i = 0; i < t.n; ++i) {
            put_f32(t.true_prob[e][i]);
            out.push_back(static_cast<char>(t.correct[e][i]));
            if (t.with_el2n) put_f32(t.el2n[e][i]);
            if (t.with_entropy) put_f32(t.entropy[e][i]);
        }
    }
    return out;
}

inline void write_bytes(const std::filesystem::path& path, const std::vector<char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline std::vector<char> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::vector<char>((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
}

// Writes the trace through the independent serializer.
inline void write_trace_file(const SeriesTrace& t, const std::filesystem::path& path) {
    write_bytes(path, serialize_trace_bytes(t));
}

inline std::vector<double> sample_series(const SeriesTrace& t, uint64_t i) {
    std::vector<double> s(t.k);
    for (uint64_t e = 0; e < t.k; ++e) s[e] = t.true_prob[e][i];
    return s;
}

inline std::vector<uint8_t> sample_correct(const SeriesTrace& t, uint64_t i) {
    std::vector<uint8_t> s(t.k);
    for (uint64_t e = 0; e < t.k; ++e) s[e] = t.correct[e][i];
    return s;
}

// Mean with divisor J, variance with divisor J-1, straight from the formula.
inline double oracle_window_std(const std::vector<double>& w) {
    const double j = static_cast<double>(w.size());
    double mean = 0.0;
    for (double v : w) mean += v;
    mean /= j;
    double var = 0.0;
    for (double v : w) var += (v - mean) * (v - mean);
    var /= (j - 1.0);
    return std::sqrt(var);
}

// Materializes every window of the series and averages their deviations.
inline double oracle_dyn_unc(const std::vector<double>& series, uint64_t window,
                             bool include_final_window = false) {
    const uint64_t k = series.size();
    const uint64_t n_windows = k - window + (include_final_window ? 1 : 0);
    double sum = 0.0;
    for (uint64_t start = 0; start < n_windows; ++start) {
        std::vector<double> w(series.begin() + start, series.begin() + start + window);
        sum += oracle_window_std(w);
    }
    return sum / static_cast<double>(n_windows);
}

inline double oracle_forgetting(const std::vector<uint8_t>& correct) {
    bool ever = false;
    uint64_t events = 0;
    for (size_t e = 0; e < correct.size(); ++e) {
        if (correct[e]) ever = true;
        if (e > 0 && correct[e - 1] == 1 && correct[e] == 0) ++events;
    }
    if (!ever) return static_cast<double>(correct.size() + 1);
    return static_cast<double>(events);
}

struct OracleMapRow {
    double mean_prob;
    double std_prob;
    uint64_t correct_count;
};

// Two-pass mean and deviation over all K epochs, divisor K-1.
inline OracleMapRow oracle_datamap(const std::vector<double>& series,
                                   const std::vector<uint8_t>& correct) {
    const double k = static_cast<double>(series.size());
    double mean = 0.0;
    for (double v : series) mean += v;
    mean /= k;
    double var = 0.0;
    for (double v : series) var += (v - mean) * (v - mean);
    var /= (k - 1.0);
    uint64_t hits = 0;
    for (uint8_t c : correct) hits += c;
    return {mean, std::sqrt(var), hits};
}

inline std::filesystem::path temp_dir(const std::string& tag) {
    std::filesystem::path dir = std::filesystem::temp_directory_path() / ("prunekit_" + tag);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testutil

#include "prunekit/scoring.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

#include "prunekit/errors.hpp"
#include "prunekit/parallel.hpp"
#include "prunekit/rng.hpp"

namespace prunekit {

namespace {

unsigned resolve_threads(unsigned threads) { return threads == 0 ? thread_count() : threads; }

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

}  // namespace

const char* method_name(Method m) {
    switch (m) {
        case Method::kDynUnc: return "dyn_unc";
        case Method::kForgetting: return "forgetting";
        case Method::kEl2n: return "el2n";
        case Method::kEntropy: return "entropy";
        case Method::kStaticVariance: return "static_variance";
        case Method::kRandom: return "random";
    }
    return "unknown";
}

Method method_from_name(const std::string& name) {
    if (name == "dyn_unc" || name == "dyn-unc") return Method::kDynUnc;
    if (name == "forgetting") return Method::kForgetting;
    if (name == "el2n") return Method::kEl2n;
    if (name == "entropy") return Method::kEntropy;
    if (name == "static_variance" || name == "static-variance") return Method::kStaticVariance;
    if (name == "random") return Method::kRandom;
    throw std::invalid_argument("unknown method " + name);
}

void write_scores(const ScoreTable& table, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error("cannot open " + path.string() + " for writing");
    out << "# method=" << method_name(table.method) << " params=" << join_params(table.params)
        << " trace=" << table.trace << '\n';
    out << "sample_id,score\n";
    char buf[64];
    for (size_t i = 0; i < table.scores.size(); ++i) {
        int len = std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, table.scores[i]);
        out.write(buf, len);
    }
    if (!out) throw io_error("write failed on " + path.string());
}

ScoreTable read_scores(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path.string());

    std::string line;
    if (!std::getline(in, line) || line.rfind("# method=", 0) != 0)
        throw data_error("missing provenance header in " + path.string());
    size_t params_at = line.find(" params=");
    size_t trace_at = line.find(" trace=");
    if (params_at == std::string::npos || trace_at == std::string::npos || trace_at < params_at)
        throw data_error("malformed provenance header in " + path.string());

    ScoreTable table;
    table.method = method_from_name(line.substr(9, params_at - 9));
    table.trace = line.substr(trace_at + 7);
    std::string params = line.substr(params_at + 8, trace_at - params_at - 8);
    size_t pos = 0;
    while (pos < params.size()) {
        size_t comma = params.find(',', pos);
        if (comma == std::string::npos) comma = params.size();
        std::string pair = params.substr(pos, comma - pos);
        size_t eq = pair.find('=');
        if (eq == std::string::npos) throw data_error("malformed params in " + path.string());
        table.params.emplace_back(pair.substr(0, eq), pair.substr(eq + 1));
        pos = comma + 1;
    }

    if (!std::getline(in, line) || line != "sample_id,score")
        throw data_error("missing sample_id,score header in " + path.string());
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        size_t comma = line.find(',');
        if (comma == std::string::npos) throw data_error("malformed score row: " + line);
        char* end = nullptr;
        unsigned long long id = std::strtoull(line.c_str(), &end, 10);
        if (end != line.c_str() + comma) throw data_error("malformed score row: " + line);
        if (id != table.scores.size())
            throw data_error("sample ids must be dense and ascending, got " +
                             std::to_string(id) + " at row " +
                             std::to_string(table.scores.size()));
        double score = std::strtod(line.c_str() + comma + 1, &end);
        if (end != line.c_str() + line.size()) throw data_error("malformed score row: " + line);
        table.scores.push_back(score);
    }
    if (table.scores.empty()) throw data_error("score table is empty: " + path.string());
    return table;
}

double window_std(std::span<const double> values) {
    const size_t j = values.size();
    if (j < 2) throw std::invalid_argument("window length must be >= 2");
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / static_cast<double>(j);
    double ss = 0.0;
    for (double v : values) {
        double d = v - mean;
        ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(j - 1));
}

DynUncAccumulator::DynUncAccumulator(uint64_t n_samples, uint64_t n_epochs, uint64_t window,
                                     bool include_final_window, unsigned threads)
    : n_(n_samples),
      k_epochs_(n_epochs),
      window_(window),
      threads_(resolve_threads(threads)) {
    if (window_ < 2) throw std::invalid_argument("window length must be >= 2");
    if (n_ < 1) throw std::invalid_argument("n_samples must be >= 1");
    if (k_epochs_ < window_ + 1)
        throw data_error("need at least J+1 epochs (n_epochs=" + std::to_string(k_epochs_) +
                         ", J=" + std::to_string(window_) + ")");
    n_windows_ = k_epochs_ - window_ + (include_final_window ? 1 : 0);
    ring_.assign(n_ * window_, 0.0);
    acc_.assign(n_, 0.0);
}

void DynUncAccumulator::add_epoch(std::span<const float> true_prob) {
    if (true_prob.size() != n_)
        throw std::invalid_argument("epoch block has " + std::to_string(true_prob.size()) +
                                    " samples, expected " + std::to_string(n_));
    if (epochs_seen_ >= k_epochs_)
        throw data_error("more epochs than declared (n_epochs=" + std::to_string(k_epochs_) +
                         ")");
    const uint64_t slot = epochs_seen_ % window_;
    const bool counted =
        epochs_seen_ + 1 >= window_ && epochs_seen_ + 1 - window_ < n_windows_;
    const uint64_t j = window_;
    parallel_for(n_, threads_, [&](size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i) {
            double* row = &ring_[i * j];
            row[slot] = true_prob[i];
            if (counted) acc_[i] += window_std(std::span<const double>(row, j));
        }
    });
    if (counted) ++windows_done_;
    ++epochs_seen_;
}

std::vector<double> DynUncAccumulator::finalize() const {
    if (epochs_seen_ != k_epochs_)
        throw data_error("trace incomplete: saw " + std::to_string(epochs_seen_) + " of " +
                         std::to_string(k_epochs_) + " epochs");
    std::vector<double> scores(n_);
    const double div = static_cast<double>(n_windows_);
    for (uint64_t i = 0; i < n_; ++i) scores[i] = acc_[i] / div;
    return scores;
}

ScoreTable dyn_unc_scores(TraceReader& reader, uint64_t window, bool include_final_window,
                          unsigned threads) {
    const TraceHeader& h = reader.header();
    DynUncAccumulator acc(h.n_samples, h.n_epochs, window, include_final_window, threads);
    EpochBlock block;
    while (reader.next(block)) acc.add_epoch(block);

    ScoreTable table;
    table.method = Method::kDynUnc;
    table.params.emplace_back("J", std::to_string(window));
    if (include_final_window) table.params.emplace_back("include_final_window", "1");
    table.trace = reader.path().string();
    table.scores = acc.finalize();
    return table;
}

ScoreTable forgetting_scores(TraceReader& reader, unsigned threads) {
    const TraceHeader& h = reader.header();
    const uint64_t n = h.n_samples;
    const unsigned nthreads = resolve_threads(threads);
    std::vector<uint8_t> prev(n, 0), ever(n, 0);
    std::vector<uint32_t> events(n, 0);

    EpochBlock block;
    bool first = true;
    while (reader.next(block)) {
        parallel_for(n, nthreads, [&](size_t begin, size_t end) {
            for (size_t i = begin; i < end; ++i) {
                uint8_t cur = block.correct[i];
                if (!first && prev[i] == 1 && cur == 0) ++events[i];
                ever[i] |= cur;
                prev[i] = cur;
            }
        });
        first = false;
    }

    ScoreTable table;
    table.method = Method::kForgetting;
    table.trace = reader.path().string();
    table.scores.resize(n);
    const double sentinel = static_cast<double>(h.n_epochs + 1);
    for (uint64_t i = 0; i < n; ++i)
        table.scores[i] = ever[i] ? static_cast<double>(events[i]) : sentinel;
    return table;
}

ScoreTable el2n_scores(std::vector<TraceReader>& readers, uint64_t epoch) {
    if (readers.empty()) throw std::invalid_argument("need at least one trace");
    const uint64_t n = readers.front().header().n_samples;
    std::vector<double> sum(n, 0.0);
    std::string traces;
    for (TraceReader& reader : readers) {
        const TraceHeader& h = reader.header();
        if (!h.has_el2n())
            throw data_error("trace " + reader.path().string() + " has no el2n channel");
        if (epoch >= h.n_epochs)
            throw data_error("epoch " + std::to_string(epoch) + " out of range (n_epochs=" +
                             std::to_string(h.n_epochs) + ")");
        if (h.n_samples != n)
            throw data_error("sample counts differ across traces: " + std::to_string(n) +
                             " vs " + std::to_string(h.n_samples));
        reader.skip(epoch);
        EpochBlock block;
        reader.next(block);
        for (uint64_t i = 0; i < n; ++i) sum[i] += block.el2n[i];
        if (!traces.empty()) traces += ',';
        traces += reader.path().string();
    }

    ScoreTable table;
    table.method = Method::kEl2n;
    table.params.emplace_back("epoch", std::to_string(epoch));
    table.params.emplace_back("runs", std::to_string(readers.size()));
    table.trace = traces;
    table.scores.resize(n);
    const double runs = static_cast<double>(readers.size());
    for (uint64_t i = 0; i < n; ++i) table.scores[i] = sum[i] / runs;
    return table;
}

ScoreTable entropy_scores(TraceReader& reader, uint64_t epoch) {
    const TraceHeader& h = reader.header();
    if (!h.has_entropy())
        throw data_error("trace " + reader.path().string() + " has no entropy channel");
    if (epoch >= h.n_epochs)
        throw data_error("epoch " + std::to_string(epoch) + " out of range (n_epochs=" +
                         std::to_string(h.n_epochs) + ")");
    reader.skip(epoch);
    EpochBlock block;
    reader.next(block);

    ScoreTable table;
    table.method = Method::kEntropy;
    table.params.emplace_back("epoch", std::to_string(epoch));
    table.trace = reader.path().string();
    table.scores.assign(block.entropy.begin(), block.entropy.end());
    return table;
}

ScoreTable static_variance_scores(TraceReader& reader, uint64_t first_m_epochs,
                                  unsigned threads) {
    const TraceHeader& h = reader.header();
    const uint64_t n = h.n_samples;
    const uint64_t m = first_m_epochs;
    if (m < 2 || m > h.n_epochs)
        throw data_error("first-m must be in [2, n_epochs], got " + std::to_string(m));
    const unsigned nthreads = resolve_threads(threads);

    std::vector<double> mean(n, 0.0), m2(n, 0.0);
    EpochBlock block;
    for (uint64_t e = 0; e < m; ++e) {
        if (!reader.next(block)) throw data_error("trace ended before epoch " + std::to_string(e));
        const double count = static_cast<double>(e + 1);
        parallel_for(n, nthreads, [&](size_t begin, size_t end) {
            for (size_t i = begin; i < end; ++i) {
                double p = block.true_prob[i];
                double delta = p - mean[i];
                mean[i] += delta / count;
                m2[i] += delta * (p - mean[i]);
            }
        });
    }

    ScoreTable table;
    table.method = Method::kStaticVariance;
    table.params.emplace_back("m", std::to_string(m));
    table.trace = reader.path().string();
    table.scores.resize(n);
    const double div = static_cast<double>(m - 1);
    for (uint64_t i = 0; i < n; ++i) table.scores[i] = std::sqrt(m2[i] / div);
    return table;
}

ScoreTable random_scores(uint64_t n_samples, uint64_t seed) {
    if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
    Rng rng(seed);
    ScoreTable table;
    table.method = Method::kRandom;
    table.params.emplace_back("seed", std::to_string(seed));
    table.scores.resize(n_samples);
    for (uint64_t i = 0; i < n_samples; ++i) table.scores[i] = rng.uniform01();
    return table;
}

}  // namespace prunekit

#include "prunekit/datamap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "prunekit/errors.hpp"
#include "prunekit/parallel.hpp"

namespace prunekit {

DataMapStats aggregate(TraceReader& reader, unsigned threads) {
    const TraceHeader& h = reader.header();
    if (h.n_epochs < 2) throw data_error("data map needs at least 2 epochs");
    const uint64_t n = h.n_samples;
    const unsigned nthreads = threads == 0 ? thread_count() : threads;

    std::vector<double> sum(n, 0.0), sumsq(n, 0.0);
    std::vector<uint64_t> correct(n, 0);
    EpochBlock block;
    while (reader.next(block)) {
        parallel_for(n, nthreads, [&](size_t begin, size_t end) {
            for (size_t i = begin; i < end; ++i) {
                double p = block.true_prob[i];
                sum[i] += p;
                sumsq[i] += p * p;
                correct[i] += block.correct[i];
            }
        });
    }

    DataMapStats stats;
    stats.n_epochs = h.n_epochs;
    stats.mean_prob.resize(n);
    stats.std_prob.resize(n);
    stats.correct_count = std::move(correct);
    const double k = static_cast<double>(h.n_epochs);
    for (uint64_t i = 0; i < n; ++i) {
        stats.mean_prob[i] = sum[i] / k;
        // cancellation can push the numerator epsilon-negative on constant series
        double var = std::max(0.0, (sumsq[i] - sum[i] * sum[i] / k) / (k - 1.0));
        stats.std_prob[i] = std::sqrt(var);
    }
    return stats;
}

void emit_csv(const DataMapStats& stats, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error("cannot open " + path.string() + " for writing");
    out << "sample_id,mean_prob,std_prob,correct_count\n";
    char buf[96];
    for (size_t i = 0; i < stats.size(); ++i) {
        int len = std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g,%llu\n", i, stats.mean_prob[i],
                                stats.std_prob[i],
                                static_cast<unsigned long long>(stats.correct_count[i]));
        out.write(buf, len);
    }
    if (!out) throw io_error("write failed on " + path.string());
}

namespace {

struct Rgb {
    int r, g, b;
};

constexpr Rgb kLowColor = {0x31, 0x36, 0x95};   // few correct predictions
constexpr Rgb kHighColor = {0xa5, 0x00, 0x26};  // many correct predictions

Rgb lerp_color(double t) {
    auto mix = [t](int a, int b) { return static_cast<int>(std::lround(a + t * (b - a))); };
    return {mix(kLowColor.r, kHighColor.r), mix(kLowColor.g, kHighColor.g),
            mix(kLowColor.b, kHighColor.b)};
}

std::string hex_color(const Rgb& c) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", c.r, c.g, c.b);
    return buf;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace

void emit_svg(const DataMapStats& stats, const std::filesystem::path& path, int color_buckets,
              const PruneManifest* overlay) {
    if (color_buckets < 2) throw std::invalid_argument("color buckets must be >= 2");
    const size_t n = stats.size();
    std::vector<uint8_t> removed;
    if (overlay) {
        if (overlay->n_total != n)
            throw data_error("manifest covers " + std::to_string(overlay->n_total) +
                             " samples, data map has " + std::to_string(n));
        removed.assign(n, 1);
        for (uint64_t id : overlay->kept_ids) removed[id] = 0;
    }

    // Fixed plot box; x spans the largest std reachable for this K.
    const double x0 = 80.0, y0 = 40.0, plot_w = 480.0, plot_h = 480.0;
    const double k = static_cast<double>(stats.n_epochs);
    const double x_max = 1.02 * 0.5 * std::sqrt(k / (k - 1.0));
    const double width = 780.0, height = 600.0;

    auto px = [&](double std_prob) { return x0 + plot_w * std::min(std_prob, x_max) / x_max; };
    auto py = [&](double mean_prob) {
        return y0 + plot_h * (1.0 - std::clamp(mean_prob, 0.0, 1.0));
    };

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error("cannot open " + path.string() + " for writing");
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    out << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
        << "\" fill=\"white\"/>\n";
    out << "<text x=\"" << x0 + plot_w / 2 << "\" y=\"24\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"16\">training data map</text>\n";

    // axes with five ticks each
    out << "<rect x=\"" << x0 << "\" y=\"" << y0 << "\" width=\"" << plot_w << "\" height=\""
        << plot_h << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        double fx = x0 + plot_w * t / 4.0;
        double fy = y0 + plot_h - plot_h * t / 4.0;
        out << "<line x1=\"" << fx << "\" y1=\"" << y0 + plot_h << "\" x2=\"" << fx << "\" y2=\""
            << y0 + plot_h + 6 << "\" stroke=\"#444\"/>\n";
        out << "<text x=\"" << fx << "\" y=\"" << y0 + plot_h + 22
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
            << fmt(x_max * t / 4.0) << "</text>\n";
        out << "<line x1=\"" << x0 - 6 << "\" y1=\"" << fy << "\" x2=\"" << x0 << "\" y2=\"" << fy
            << "\" stroke=\"#444\"/>\n";
        out << "<text x=\"" << x0 - 10 << "\" y=\"" << fy + 4
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">"
            << fmt(t / 4.0) << "</text>\n";
    }
    out << "<text x=\"" << x0 + plot_w / 2 << "\" y=\"" << y0 + plot_h + 44
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
        << "std of true-class probability</text>\n";
    out << "<text x=\"22\" y=\"" << y0 + plot_h / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\" "
        << "transform=\"rotate(-90 22 " << y0 + plot_h / 2 << ")\">"
        << "mean true-class probability</text>\n";

    // correct_count in [0, K] quantized into color_buckets levels
    const double buckets = static_cast<double>(color_buckets);
    for (size_t i = 0; i < n; ++i) {
        int bucket = static_cast<int>(static_cast<double>(stats.correct_count[i]) * buckets /
                                      (k + 1.0));
        bucket = std::min(bucket, color_buckets - 1);
        double t = static_cast<double>(bucket) / (buckets - 1.0);
        std::string style = " fill=\"" + hex_color(lerp_color(t)) + "\" fill-opacity=\"0.75\"";
        if (!removed.empty() && removed[i])
            style += " stroke=\"black\" stroke-width=\"1.2\"";
        out << "<circle cx=\"" << fmt(px(stats.std_prob[i])) << "\" cy=\""
            << fmt(py(stats.mean_prob[i])) << "\" r=\"3\"" << style << "/>\n";
    }

    // legend: one swatch per bucket, low correct-count at the bottom
    const double lx = x0 + plot_w + 40.0;
    const double swatch = plot_h / buckets;
    out << "<text x=\"" << lx << "\" y=\"" << y0 - 10
        << "\" font-family=\"sans-serif\" font-size=\"12\">correct epochs</text>\n";
    for (int b = 0; b < color_buckets; ++b) {
        double t = static_cast<double>(b) / (buckets - 1.0);
        double sy = y0 + plot_h - (b + 1) * swatch;
        out << "<rect x=\"" << lx << "\" y=\"" << fmt(sy) << "\" width=\"18\" height=\""
            << fmt(swatch) << "\" fill=\"" << hex_color(lerp_color(t)) << "\"/>\n";
        long lo = std::lround(std::ceil(b * (k + 1.0) / buckets));
        long hi = std::lround(std::ceil((b + 1) * (k + 1.0) / buckets)) - 1;
        hi = std::min<long>(hi, static_cast<long>(k));
        out << "<text x=\"" << lx + 24 << "\" y=\"" << fmt(sy + swatch / 2 + 4)
            << "\" font-family=\"sans-serif\" font-size=\"11\">" << lo << "-" << hi
            << "</text>\n";
    }
    if (!removed.empty()) {
        out << "<text x=\"" << lx << "\" y=\"" << y0 + plot_h + 28
            << "\" font-family=\"sans-serif\" font-size=\"11\">black outline = removed</text>\n";
    }
    out << "</svg>\n";
    if (!out) throw io_error("write failed on " + path.string());
}

}  // namespace prunekit

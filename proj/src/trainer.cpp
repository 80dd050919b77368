#include "prunekit/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <numeric>

#include "prunekit/errors.hpp"
#include "prunekit/rng.hpp"
#include "prunekit/trace.hpp"

namespace prunekit {

const char* archetype_name(Archetype a) {
    switch (a) {
        case Archetype::kEasy: return "easy";
        case Archetype::kBoundary: return "boundary";
        case Archetype::kMislabeled: return "mislabeled";
    }
    return "unknown";
}

void DatasetSpec::check() const {
    if (total() < 1) throw data_error("dataset must contain at least one sample");
    if (n_classes < 2) throw data_error("n_classes must be >= 2");
    if (dim < n_classes) throw data_error("dim must be >= n_classes (one center axis per class)");
    if (!(class_sep > 0.0)) throw data_error("class_sep must be > 0");
    if (!(boundary_scale >= 0.0)) throw data_error("boundary_scale must be >= 0");
    if (!(flip_rate >= 0.0 && flip_rate <= 1.0)) throw data_error("flip_rate must be in [0,1]");
}

void TrainConfig::check() const {
    if (epochs < 2) throw data_error("epochs must be >= 2");
    if (batch_size < 1) throw data_error("batch_size must be >= 1");
    if (!(learning_rate >= 0.0)) throw data_error("learning_rate must be >= 0");
    if (!(weight_decay >= 0.0)) throw data_error("weight_decay must be >= 0");
}

LabeledDataset generate_synthetic(const DatasetSpec& spec) {
    spec.check();
    Rng rng(spec.seed);
    const uint32_t c_count = spec.n_classes;
    const uint32_t dim = spec.dim;
    // center of class c is axis * e_c, so every pair sits class_sep apart
    const double axis = spec.class_sep / std::sqrt(2.0);

    LabeledDataset data;
    data.n_classes = c_count;
    data.dim = dim;
    const uint64_t n = spec.total();
    data.features.reserve(n * dim);
    data.labels.reserve(n);
    data.gen_class.reserve(n);
    data.archetypes.reserve(n);

    std::vector<double> base(dim);
    auto emit = [&](uint32_t label, uint32_t gen, Archetype tag) {
        for (uint32_t d = 0; d < dim; ++d) data.features.push_back(base[d] + rng.normal());
        data.labels.push_back(label);
        data.gen_class.push_back(gen);
        data.archetypes.push_back(tag);
    };

    for (uint64_t i = 0; i < spec.n_easy; ++i) {
        uint32_t c = static_cast<uint32_t>(i % c_count);
        std::fill(base.begin(), base.end(), 0.0);
        base[c] = axis;
        emit(c, c, Archetype::kEasy);
    }
    for (uint64_t i = 0; i < spec.n_boundary; ++i) {
        uint32_t c = static_cast<uint32_t>(i % c_count);
        uint32_t c2 = (c + 1) % c_count;
        // midpoint of the two centers, nudged toward the own-class center
        std::fill(base.begin(), base.end(), 0.0);
        base[c] = axis * (0.5 + 0.5 * spec.boundary_scale);
        base[c2] = axis * (0.5 - 0.5 * spec.boundary_scale);
        emit(c, c, Archetype::kBoundary);
    }
    for (uint64_t i = 0; i < spec.n_mislabeled; ++i) {
        uint32_t c = static_cast<uint32_t>(i % c_count);
        uint32_t label = c;
        if (rng.uniform01() < spec.flip_rate)
            label = static_cast<uint32_t>((c + 1 + rng.bounded(c_count - 1)) % c_count);
        std::fill(base.begin(), base.end(), 0.0);
        base[c] = axis;
        emit(label, c, Archetype::kMislabeled);
    }
    return data;
}

namespace {

// Fills logits and softmax probs (and the tanh hidden layer when present);
// returns log(sum exp(logits)) for an underflow-safe loss.
double forward(const Model& m, std::span<const double> x, std::vector<double>& hidden,
               std::vector<double>& logits, std::vector<double>& probs) {
    const uint32_t c_count = m.n_classes;
    const double* in = x.data();
    size_t in_dim = m.dim;
    if (m.hidden_units > 0) {
        for (uint32_t h = 0; h < m.hidden_units; ++h) {
            double z = m.b1[h];
            const double* w = &m.w1[static_cast<size_t>(h) * m.dim];
            for (uint32_t d = 0; d < m.dim; ++d) z += w[d] * x[d];
            hidden[h] = std::tanh(z);
        }
        in = hidden.data();
        in_dim = m.hidden_units;
    }
    for (uint32_t c = 0; c < c_count; ++c) {
        double z = m.b2[c];
        const double* w = &m.w2[c * in_dim];
        for (size_t d = 0; d < in_dim; ++d) z += w[d] * in[d];
        logits[c] = z;
    }
    double z_max = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (uint32_t c = 0; c < c_count; ++c) {
        probs[c] = std::exp(logits[c] - z_max);
        sum += probs[c];
    }
    for (uint32_t c = 0; c < c_count; ++c) probs[c] /= sum;
    return z_max + std::log(sum);
}

void log_record(EpochBlock& block, uint64_t id, const std::vector<double>& probs,
                uint32_t label) {
    block.true_prob[id] = static_cast<float>(probs[label]);
    uint32_t best = static_cast<uint32_t>(
        std::max_element(probs.begin(), probs.end()) - probs.begin());
    block.correct[id] = best == label ? 1 : 0;
    block.el2n[id] = el2n_value(probs, label);
    block.entropy[id] = entropy_value(probs);
}

Model init_model(const LabeledDataset& data, const TrainConfig& config, Rng& rng) {
    Model m;
    m.n_classes = data.n_classes;
    m.dim = data.dim;
    m.hidden_units = config.hidden_units;
    const double sigma = 0.1;
    if (m.hidden_units > 0) {
        m.w1.resize(static_cast<size_t>(m.hidden_units) * m.dim);
        for (double& w : m.w1) w = sigma * rng.normal();
        m.b1.assign(m.hidden_units, 0.0);
        m.w2.resize(static_cast<size_t>(m.n_classes) * m.hidden_units);
    } else {
        m.w2.resize(static_cast<size_t>(m.n_classes) * m.dim);
    }
    for (double& w : m.w2) w = sigma * rng.normal();
    m.b2.assign(m.n_classes, 0.0);
    return m;
}

Model train_internal(const LabeledDataset& data, std::vector<uint64_t> order,
                     const TrainConfig& config, TraceWriter* writer, LogMode mode) {
    config.check();
    Rng rng(config.seed);
    Model model = init_model(data, config, rng);

    const uint32_t c_count = data.n_classes;
    const uint32_t dim = data.dim;
    const uint32_t hid = config.hidden_units;
    const uint64_t n_train = order.size();

    std::vector<double> hidden(hid), logits(c_count), probs(c_count);
    const size_t in_dim = hid > 0 ? hid : dim;
    std::vector<double> g2(static_cast<size_t>(c_count) * in_dim), gb2(c_count);
    std::vector<double> g1, gb1, dz1;
    if (hid > 0) {
        g1.resize(static_cast<size_t>(hid) * dim);
        gb1.resize(hid);
        dz1.resize(hid);
    }

    EpochBlock block;
    if (writer) block.resize(data.size(), true, true);

    for (uint64_t e = 0; e < config.epochs; ++e) {
        double lr = config.learning_rate;
        if (config.lr_schedule == LrSchedule::kCosine)
            lr *= 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(e) /
                                        static_cast<double>(config.epochs)));
        rng.shuffle(order);

        for (uint64_t start = 0; start < n_train; start += config.batch_size) {
            const uint64_t bs = std::min<uint64_t>(config.batch_size, n_train - start);
            std::fill(g2.begin(), g2.end(), 0.0);
            std::fill(gb2.begin(), gb2.end(), 0.0);
            std::fill(g1.begin(), g1.end(), 0.0);
            std::fill(gb1.begin(), gb1.end(), 0.0);
            double batch_loss = 0.0;

            for (uint64_t t = 0; t < bs; ++t) {
                const uint64_t i = order[start + t];
                const uint32_t label = data.labels[i];
                std::span<const double> x = data.row(i);
                double log_norm = forward(model, x, hidden, logits, probs);
                batch_loss += log_norm - logits[label];
                if (writer && mode == LogMode::kBatch) log_record(block, i, probs, label);

                const double* in = hid > 0 ? hidden.data() : x.data();
                for (uint32_t c = 0; c < c_count; ++c) {
                    double dz = probs[c] - (c == label ? 1.0 : 0.0);
                    gb2[c] += dz;
                    double* g = &g2[c * in_dim];
                    for (size_t d = 0; d < in_dim; ++d) g[d] += dz * in[d];
                }
                if (hid > 0) {
                    for (uint32_t h = 0; h < hid; ++h) {
                        double dh = 0.0;
                        for (uint32_t c = 0; c < c_count; ++c)
                            dh += (probs[c] - (c == label ? 1.0 : 0.0)) *
                                  model.w2[static_cast<size_t>(c) * hid + h];
                        dz1[h] = dh * (1.0 - hidden[h] * hidden[h]);
                        gb1[h] += dz1[h];
                        double* g = &g1[static_cast<size_t>(h) * dim];
                        for (uint32_t d = 0; d < dim; ++d) g[d] += dz1[h] * x[d];
                    }
                }
            }
            if (!std::isfinite(batch_loss))
                throw data_error("non-finite loss at epoch " + std::to_string(e) + " batch " +
                                 std::to_string(start / config.batch_size));

            const double inv_bs = 1.0 / static_cast<double>(bs);
            for (size_t j = 0; j < model.w2.size(); ++j)
                model.w2[j] -= lr * (g2[j] * inv_bs + config.weight_decay * model.w2[j]);
            for (uint32_t c = 0; c < c_count; ++c) model.b2[c] -= lr * gb2[c] * inv_bs;
            if (hid > 0) {
                for (size_t j = 0; j < model.w1.size(); ++j)
                    model.w1[j] -= lr * (g1[j] * inv_bs + config.weight_decay * model.w1[j]);
                for (uint32_t h = 0; h < hid; ++h) model.b1[h] -= lr * gb1[h] * inv_bs;
            }
        }

        if (writer) {
            if (mode == LogMode::kEpoch) {
                for (uint64_t i = 0; i < data.size(); ++i) {
                    forward(model, data.row(i), hidden, logits, probs);
                    log_record(block, i, probs, data.labels[i]);
                }
            }
            block.epoch_index = e;
            writer->append_epoch(block);
        }
    }
    return model;
}

}  // namespace

float el2n_value(std::span<const double> probs, uint32_t label) {
    double sq = 0.0;
    for (size_t c = 0; c < probs.size(); ++c) {
        double d = probs[c] - (c == label ? 1.0 : 0.0);
        sq += d * d;
    }
    return static_cast<float>(std::sqrt(sq));
}

float entropy_value(std::span<const double> probs) {
    const double ln_c = std::log(static_cast<double>(probs.size()));
    double h = 0.0;
    for (double p : probs)
        if (p > 0.0) h -= p * std::log(p);
    h = std::clamp(h, 0.0, ln_c);
    float hf = static_cast<float>(h);
    // narrowing can round above ln C; nudge back inside the bound
    if (static_cast<double>(hf) > ln_c) hf = std::nextafterf(hf, 0.0f);
    return hf;
}

std::vector<double> Model::predict(std::span<const double> x) const {
    if (x.size() != dim) throw data_error("feature row has wrong dimensionality");
    std::vector<double> hidden(hidden_units), logits(n_classes), probs(n_classes);
    forward(*this, x, hidden, logits, probs);
    return probs;
}

Model train_and_log(const LabeledDataset& data, const TrainConfig& config,
                    const std::filesystem::path& trace_path, LogMode mode) {
    config.check();
    if (data.size() < 1) throw data_error("empty dataset");
    TraceHeader header;
    header.version = kTraceVersion;
    header.channel_flags = kAllChannels;
    header.n_samples = data.size();
    header.n_epochs = config.epochs;
    header.n_classes = data.n_classes;
    TraceWriter writer(trace_path, header);

    std::vector<uint64_t> all(data.size());
    std::iota(all.begin(), all.end(), 0);
    Model model = train_internal(data, std::move(all), config, &writer, mode);
    writer.finish();
    return model;
}

Model train_on_subset(const LabeledDataset& data, const PruneManifest& manifest,
                      const TrainConfig& config) {
    config.check();
    if (manifest.kept_ids.empty()) throw data_error("manifest keeps no samples");
    if (manifest.n_total != data.size())
        throw data_error("manifest n_total " + std::to_string(manifest.n_total) +
                         " does not match dataset size " + std::to_string(data.size()));
    std::vector<uint64_t> kept = manifest.kept_ids;
    for (uint64_t id : kept)
        if (id >= data.size())
            throw data_error("unknown sample id " + std::to_string(id) + " in manifest");
    std::sort(kept.begin(), kept.end());
    return train_internal(data, std::move(kept), config, nullptr, LogMode::kBatch);
}

double evaluate(const Model& model, const LabeledDataset& data) {
    if (data.size() == 0) throw data_error("empty dataset");
    if (model.dim != data.dim || model.n_classes != data.n_classes)
        throw data_error("model/dataset shape mismatch");
    std::vector<double> hidden(model.hidden_units), logits(model.n_classes),
        probs(model.n_classes);
    uint64_t hits = 0;
    for (uint64_t i = 0; i < data.size(); ++i) {
        forward(model, data.row(i), hidden, logits, probs);
        uint32_t best = static_cast<uint32_t>(
            std::max_element(probs.begin(), probs.end()) - probs.begin());
        if (best == data.labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::pair<std::string, std::string>> parse_kv_file(
    const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path.string());
    std::vector<std::pair<std::string, std::string>> pairs;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::string body = trim(line);
        if (body.empty()) continue;
        size_t eq = body.find('=');
        if (eq == std::string::npos)
            throw data_error("expected key = value at " + path.string() + ":" +
                             std::to_string(line_no));
        std::string key = trim(body.substr(0, eq));
        std::string value = trim(body.substr(eq + 1));
        if (key.empty() || value.empty())
            throw data_error("expected key = value at " + path.string() + ":" +
                             std::to_string(line_no));
        pairs.emplace_back(key, value);
    }
    return pairs;
}

uint64_t parse_u64(const std::string& key, const std::string& value) {
    char* end = nullptr;
    unsigned long long v = std::strtoull(value.c_str(), &end, 10);
    if (end != value.c_str() + value.size() || value[0] == '-')
        throw data_error("invalid value for " + key + ": " + value);
    return v;
}

double parse_f64(const std::string& key, const std::string& value) {
    char* end = nullptr;
    double v = std::strtod(value.c_str(), &end);
    if (end != value.c_str() + value.size())
        throw data_error("invalid value for " + key + ": " + value);
    return v;
}

}  // namespace

DatasetSpec parse_dataset_spec(const std::filesystem::path& path) {
    DatasetSpec spec;
    for (const auto& [key, value] : parse_kv_file(path)) {
        if (key == "n_easy")
            spec.n_easy = parse_u64(key, value);
        else if (key == "n_boundary")
            spec.n_boundary = parse_u64(key, value);
        else if (key == "n_mislabeled")
            spec.n_mislabeled = parse_u64(key, value);
        else if (key == "n_classes")
            spec.n_classes = static_cast<uint32_t>(parse_u64(key, value));
        else if (key == "dim")
            spec.dim = static_cast<uint32_t>(parse_u64(key, value));
        else if (key == "class_sep")
            spec.class_sep = parse_f64(key, value);
        else if (key == "boundary_scale")
            spec.boundary_scale = parse_f64(key, value);
        else if (key == "flip_rate")
            spec.flip_rate = parse_f64(key, value);
        else if (key == "seed")
            spec.seed = parse_u64(key, value);
        else
            throw data_error("unknown key " + key + " in " + path.string());
    }
    spec.check();
    return spec;
}

TrainConfig parse_train_config(const std::filesystem::path& path) {
    TrainConfig config;
    for (const auto& [key, value] : parse_kv_file(path)) {
        if (key == "epochs")
            config.epochs = parse_u64(key, value);
        else if (key == "batch_size")
            config.batch_size = parse_u64(key, value);
        else if (key == "learning_rate")
            config.learning_rate = parse_f64(key, value);
        else if (key == "lr_schedule") {
            if (value == "constant")
                config.lr_schedule = LrSchedule::kConstant;
            else if (value == "cosine")
                config.lr_schedule = LrSchedule::kCosine;
            else
                throw data_error("invalid value for lr_schedule: " + value);
        } else if (key == "hidden_units")
            config.hidden_units = static_cast<uint32_t>(parse_u64(key, value));
        else if (key == "weight_decay")
            config.weight_decay = parse_f64(key, value);
        else if (key == "seed")
            config.seed = parse_u64(key, value);
        else
            throw data_error("unknown key " + key + " in " + path.string());
    }
    config.check();
    return config;
}

void export_dataset_csv(const LabeledDataset& data, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error("cannot open " + path.string() + " for writing");
    out << "id,label,archetype";
    for (uint32_t d = 0; d < data.dim; ++d) out << ",f" << d;
    out << '\n';
    char buf[32];
    for (size_t i = 0; i < data.size(); ++i) {
        out << i << ',' << data.labels[i] << ',' << archetype_name(data.archetypes[i]);
        std::span<const double> row = data.row(i);
        for (uint32_t d = 0; d < data.dim; ++d) {
            int len = std::snprintf(buf, sizeof(buf), ",%.17g", row[d]);
            out.write(buf, len);
        }
        out << '\n';
    }
    if (!out) throw io_error("write failed on " + path.string());
}

}  // namespace prunekit

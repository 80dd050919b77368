#include "prunekit/trace.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>

#include "prunekit/errors.hpp"

namespace prunekit {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

void put_u16(char* p, uint16_t v) {
    p[0] = static_cast<char>(v & 0xff);
    p[1] = static_cast<char>((v >> 8) & 0xff);
}

void put_u32(char* p, uint32_t v) {
    for (int i = 0; i < 4; ++i) p[i] = static_cast<char>((v >> (8 * i)) & 0xff);
}

void put_u64(char* p, uint64_t v) {
    for (int i = 0; i < 8; ++i) p[i] = static_cast<char>((v >> (8 * i)) & 0xff);
}

void put_f32(char* p, float v) { put_u32(p, std::bit_cast<uint32_t>(v)); }

uint16_t get_u16(const char* p) {
    return static_cast<uint16_t>(static_cast<uint8_t>(p[0]) |
                                 (static_cast<uint16_t>(static_cast<uint8_t>(p[1])) << 8));
}

uint32_t get_u32(const char* p) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(p[i])) << (8 * i);
    return v;
}

uint64_t get_u64(const char* p) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(p[i])) << (8 * i);
    return v;
}

float get_f32(const char* p) { return std::bit_cast<float>(get_u32(p)); }

void serialize_header(const TraceHeader& h, char* buf) {
    std::memset(buf, 0, kTraceHeaderSize);
    std::memcpy(buf, kTraceMagic, 4);
    put_u16(buf + 4, h.version);
    put_u16(buf + 6, h.channel_flags);
    put_u64(buf + 8, h.n_samples);
    put_u64(buf + 16, h.n_epochs);
    put_u32(buf + 24, h.n_classes);
}

double entropy_bound(uint32_t n_classes) { return std::log(static_cast<double>(n_classes)); }

// Returns the failing field name, or nullptr. `msg` gets the description.
const char* check_record_ranges(float true_prob, uint8_t correct, const float* el2n,
                                const float* entropy, double ln_c, std::string* msg) {
    if (!(true_prob >= 0.0f && true_prob <= 1.0f)) {
        *msg = "true_prob out of [0,1]";
        return "true_prob";
    }
    if (correct > 1) {
        *msg = "correct out of {0,1}";
        return "correct";
    }
    if (el2n && !(*el2n >= 0.0f && *el2n <= kSqrt2 + kChannelBoundTolerance)) {
        *msg = "el2n out of [0, sqrt(2)]";
        return "el2n";
    }
    if (entropy && !(*entropy >= 0.0f && *entropy <= ln_c + kChannelBoundTolerance)) {
        *msg = "entropy out of [0, ln(n_classes)]";
        return "entropy";
    }
    return nullptr;
}

}  // namespace

void TraceHeader::check() const {
    if (version != kTraceVersion)
        throw data_error("unsupported trace version " + std::to_string(version));
    if (n_samples < 1) throw data_error("n_samples must be >= 1");
    if (n_epochs < 1) throw data_error("n_epochs must be >= 1");
    if (n_classes < 2) throw data_error("n_classes must be >= 2");
    if ((channel_flags & kMandatoryChannels) != kMandatoryChannels)
        throw data_error("true_prob and correct channels are mandatory");
    if (channel_flags & ~kAllChannels) throw data_error("unknown channel flags");
}

TraceWriter::TraceWriter(const std::filesystem::path& path, const TraceHeader& header)
    : header_(header), path_(path) {
    header_.check();
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw io_error("cannot open " + path.string() + " for writing");
    char buf[kTraceHeaderSize];
    serialize_header(header_, buf);
    out_.write(buf, kTraceHeaderSize);
    if (!out_) throw io_error("write failed on " + path.string());
    block_buf_.resize(header_.block_size());
}

void TraceWriter::append_epoch(const EpochBlock& block) {
    if (next_epoch_ >= header_.n_epochs)
        throw data_error("trace already holds all " + std::to_string(header_.n_epochs) +
                         " epochs");
    if (block.epoch_index != next_epoch_)
        throw data_error("expected epoch " + std::to_string(next_epoch_) + ", got " +
                         std::to_string(block.epoch_index));
    const uint64_t n = header_.n_samples;
    if (block.size() != n || block.correct.size() != n)
        throw data_error("expected " + std::to_string(n) + " records, got " +
                         std::to_string(block.size()));
    if ((block.el2n.size() == n) != header_.has_el2n() ||
        (!block.el2n.empty() && block.el2n.size() != n))
        throw data_error("el2n channel does not match header flags");
    if ((block.entropy.size() == n) != header_.has_entropy() ||
        (!block.entropy.empty() && block.entropy.size() != n))
        throw data_error("entropy channel does not match header flags");

    const double ln_c = entropy_bound(header_.n_classes);
    char* p = block_buf_.data();
    put_u64(p, block.epoch_index);
    p += 8;
    for (uint64_t i = 0; i < n; ++i) {
        std::string msg;
        const float* el2n = header_.has_el2n() ? &block.el2n[i] : nullptr;
        const float* entropy = header_.has_entropy() ? &block.entropy[i] : nullptr;
        if (check_record_ranges(block.true_prob[i], block.correct[i], el2n, entropy, ln_c, &msg))
            throw data_error("sample " + std::to_string(i) + " epoch " +
                             std::to_string(block.epoch_index) + ": " + msg);
        put_f32(p, block.true_prob[i]);
        p[4] = static_cast<char>(block.correct[i]);
        p += 5;
        if (el2n) {
            put_f32(p, *el2n);
            p += 4;
        }
        if (entropy) {
            put_f32(p, *entropy);
            p += 4;
        }
    }
    out_.write(block_buf_.data(), static_cast<std::streamsize>(block_buf_.size()));
    if (!out_) throw io_error("write failed on " + path_.string());
    ++next_epoch_;
}

void TraceWriter::append_epoch(uint64_t epoch_index, std::span<const SampleEpochRecord> records) {
    EpochBlock block;
    block.epoch_index = epoch_index;
    block.resize(records.size(), header_.has_el2n(), header_.has_entropy());
    for (size_t i = 0; i < records.size(); ++i) {
        const SampleEpochRecord& r = records[i];
        block.true_prob[i] = r.true_prob;
        block.correct[i] = r.correct;
        if (header_.has_el2n()) {
            if (!r.el2n) throw data_error("el2n channel does not match header flags");
            block.el2n[i] = *r.el2n;
        } else if (r.el2n) {
            throw data_error("el2n channel does not match header flags");
        }
        if (header_.has_entropy()) {
            if (!r.entropy) throw data_error("entropy channel does not match header flags");
            block.entropy[i] = *r.entropy;
        } else if (r.entropy) {
            throw data_error("entropy channel does not match header flags");
        }
    }
    append_epoch(block);
}

void TraceWriter::finish() {
    if (next_epoch_ != header_.n_epochs)
        throw data_error("trace incomplete: wrote " + std::to_string(next_epoch_) + " of " +
                         std::to_string(header_.n_epochs) + " epochs");
    out_.flush();
    if (!out_) throw io_error("flush failed on " + path_.string());
    out_.close();
}

TraceReader::TraceReader(const std::filesystem::path& path) : path_(path) {
    in_.open(path, std::ios::binary);
    if (!in_) throw io_error("cannot open " + path.string());

    char buf[kTraceHeaderSize];
    in_.read(buf, kTraceHeaderSize);
    if (in_.gcount() != kTraceHeaderSize) throw data_error("not a trace file (short header)");
    if (std::memcmp(buf, kTraceMagic, 4) != 0) throw data_error("not a trace file");
    header_.version = get_u16(buf + 4);
    header_.channel_flags = get_u16(buf + 6);
    header_.n_samples = get_u64(buf + 8);
    header_.n_epochs = get_u64(buf + 16);
    header_.n_classes = get_u32(buf + 24);
    header_.check();
    for (size_t i = 28; i < kTraceHeaderSize; ++i)
        if (buf[i] != 0) throw data_error("reserved bytes must be zero");

    uint64_t actual = std::filesystem::file_size(path);
    uint64_t expected = header_.file_size();
    if (actual < expected) {
        uint64_t complete = (actual - kTraceHeaderSize) / header_.block_size();
        throw data_error("truncated at epoch " + std::to_string(complete));
    }
    if (actual > expected)
        throw data_error("file length mismatch: expected " + std::to_string(expected) +
                         " bytes, found " + std::to_string(actual));
    block_buf_.resize(header_.block_size());
}

bool TraceReader::next(EpochBlock& block) {
    if (next_epoch_ >= header_.n_epochs) return false;
    in_.read(block_buf_.data(), static_cast<std::streamsize>(block_buf_.size()));
    if (static_cast<uint64_t>(in_.gcount()) != block_buf_.size())
        throw data_error("truncated at epoch " + std::to_string(next_epoch_));

    const char* p = block_buf_.data();
    block.epoch_index = get_u64(p);
    p += 8;
    if (block.epoch_index != next_epoch_)
        throw data_error("epoch index mismatch: expected " + std::to_string(next_epoch_) +
                         ", found " + std::to_string(block.epoch_index));

    const uint64_t n = header_.n_samples;
    block.resize(n, header_.has_el2n(), header_.has_entropy());
    const bool has_el2n = header_.has_el2n();
    const bool has_entropy = header_.has_entropy();
    for (uint64_t i = 0; i < n; ++i) {
        block.true_prob[i] = get_f32(p);
        block.correct[i] = static_cast<uint8_t>(p[4]);
        p += 5;
        if (has_el2n) {
            block.el2n[i] = get_f32(p);
            p += 4;
        }
        if (has_entropy) {
            block.entropy[i] = get_f32(p);
            p += 4;
        }
    }
    ++next_epoch_;
    return true;
}

void TraceReader::skip(uint64_t n_blocks) {
    if (next_epoch_ + n_blocks > header_.n_epochs)
        throw std::invalid_argument("skip past end of trace");
    in_.seekg(static_cast<std::streamoff>(n_blocks * header_.block_size()), std::ios::cur);
    if (!in_) throw io_error("seek failed on " + path_.string());
    next_epoch_ += n_blocks;
}

TraceWriter open_writer(const std::filesystem::path& path, const TraceHeader& header) {
    return TraceWriter(path, header);
}

TraceReader open_reader(const std::filesystem::path& path) { return TraceReader(path); }

std::string ValidationFinding::to_line() const {
    std::ostringstream os;
    os << level << " sample=";
    if (sample < 0)
        os << "-";
    else
        os << sample;
    os << " epoch=";
    if (epoch < 0)
        os << "-";
    else
        os << epoch;
    os << " field=" << field << " msg=" << msg;
    return os.str();
}

std::string ValidationReport::to_text() const {
    std::string out;
    for (const auto& f : findings) {
        out += f.to_line();
        out += '\n';
    }
    if (total_violations > findings.size())
        out += "... " + std::to_string(total_violations - findings.size()) +
               " more violation(s) not shown\n";
    return out;
}

ValidationReport validate(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path.string());

    ValidationReport report;
    auto add = [&report](int64_t sample, int64_t epoch, const std::string& field,
                         const std::string& msg) {
        ++report.total_violations;
        if (report.findings.size() < ValidationReport::kMaxFindings)
            report.findings.push_back({"ERROR", sample, epoch, field, msg});
        report.ok = false;
    };

    char buf[kTraceHeaderSize];
    in.read(buf, kTraceHeaderSize);
    report.actual_bytes = std::filesystem::file_size(path);
    if (in.gcount() != kTraceHeaderSize) {
        add(-1, -1, "header",
            "file too short for header (" + std::to_string(report.actual_bytes) + " bytes)");
        return report;
    }
    if (std::memcmp(buf, kTraceMagic, 4) != 0) {
        add(-1, -1, "magic", "not a trace file");
        return report;
    }
    TraceHeader h;
    h.version = get_u16(buf + 4);
    h.channel_flags = get_u16(buf + 6);
    h.n_samples = get_u64(buf + 8);
    h.n_epochs = get_u64(buf + 16);
    h.n_classes = get_u32(buf + 24);
    if (h.version != kTraceVersion) {
        add(-1, -1, "version", "unsupported trace version " + std::to_string(h.version));
        return report;
    }

    bool flags_ok = true;
    if ((h.channel_flags & kMandatoryChannels) != kMandatoryChannels) {
        add(-1, -1, "channel_flags", "true_prob and correct channels are mandatory");
        flags_ok = false;
    }
    if (h.channel_flags & ~kAllChannels) {
        add(-1, -1, "channel_flags", "unknown channel flags");
        flags_ok = false;
    }
    if (h.n_samples < 1) add(-1, -1, "n_samples", "n_samples must be >= 1");
    if (h.n_epochs < 1) add(-1, -1, "n_epochs", "n_epochs must be >= 1");
    if (h.n_classes < 2) add(-1, -1, "n_classes", "n_classes must be >= 2");
    for (size_t i = 28; i < kTraceHeaderSize; ++i) {
        if (buf[i] != 0) {
            add(-1, -1, "reserved", "reserved bytes must be zero");
            break;
        }
    }
    if (!flags_ok) return report;  // record size unknown, nothing else is decodable

    report.expected_bytes = h.file_size();
    if (report.actual_bytes != report.expected_bytes)
        add(-1, -1, "length",
            "expected " + std::to_string(report.expected_bytes) + " bytes, found " +
                std::to_string(report.actual_bytes));

    // Scan every complete block present, even when the header disagrees.
    const uint64_t block_size = h.block_size();
    uint64_t blocks_on_disk = (report.actual_bytes - kTraceHeaderSize) / block_size;
    uint64_t blocks_to_scan = std::min(h.n_epochs, blocks_on_disk);
    const double ln_c = h.n_classes >= 2 ? entropy_bound(h.n_classes) : 1e300;

    std::vector<char> block(block_size);
    for (uint64_t j = 0; j < blocks_to_scan; ++j) {
        in.read(block.data(), static_cast<std::streamsize>(block_size));
        if (static_cast<uint64_t>(in.gcount()) != block_size) break;  // length already flagged
        const char* p = block.data();
        uint64_t epoch_index = get_u64(p);
        p += 8;
        if (epoch_index != j)
            add(-1, static_cast<int64_t>(j), "epoch_index",
                "expected " + std::to_string(j) + ", found " + std::to_string(epoch_index));
        for (uint64_t i = 0; i < h.n_samples; ++i) {
            float true_prob = get_f32(p);
            uint8_t correct = static_cast<uint8_t>(p[4]);
            p += 5;
            float el2n = 0.0f, entropy = 0.0f;
            if (h.channel_flags & kChannelEl2n) {
                el2n = get_f32(p);
                p += 4;
            }
            if (h.channel_flags & kChannelEntropy) {
                entropy = get_f32(p);
                p += 4;
            }
            const int64_t si = static_cast<int64_t>(i);
            const int64_t ej = static_cast<int64_t>(j);
            if (!(true_prob >= 0.0f && true_prob <= 1.0f))
                add(si, ej, "true_prob", "true_prob out of [0,1]");
            if (correct > 1) add(si, ej, "correct", "correct out of {0,1}");
            if ((h.channel_flags & kChannelEl2n) &&
                !(el2n >= 0.0f && el2n <= kSqrt2 + kChannelBoundTolerance))
                add(si, ej, "el2n", "el2n out of [0, sqrt(2)]");
            if ((h.channel_flags & kChannelEntropy) &&
                !(entropy >= 0.0f && entropy <= ln_c + kChannelBoundTolerance))
                add(si, ej, "entropy", "entropy out of [0, ln(n_classes)]");
        }
    }
    return report;
}

}  // namespace prunekit

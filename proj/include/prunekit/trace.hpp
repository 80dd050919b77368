#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace prunekit {

// Prediction trace file (.dutr), little-endian throughout.
//
//   header (40 bytes):
//     offset  0  magic          "DUTR"
//     offset  4  version        u16, currently 1
//     offset  6  channel_flags  u16, bit0 true_prob, bit1 correct,
//                               bit2 el2n, bit3 entropy
//     offset  8  n_samples      u64
//     offset 16  n_epochs       u64
//     offset 24  n_classes      u32
//     offset 28  reserved       12 zero bytes
//   then n_epochs blocks, each:
//     epoch_index  u64
//     n_samples records of record_size() bytes, ascending sample id:
//       true_prob f32, correct u8, [el2n f32], [entropy f32]
//
// Epoch-major so a trainer can append one epoch at a time and a scorer can
// stream the file with one block in memory.

enum ChannelFlag : uint16_t {
    kChannelTrueProb = 1u << 0,
    kChannelCorrect = 1u << 1,
    kChannelEl2n = 1u << 2,
    kChannelEntropy = 1u << 3,
};

inline constexpr uint16_t kMandatoryChannels = kChannelTrueProb | kChannelCorrect;
inline constexpr uint16_t kAllChannels =
    kChannelTrueProb | kChannelCorrect | kChannelEl2n | kChannelEntropy;
inline constexpr uint16_t kTraceVersion = 1;
inline constexpr size_t kTraceHeaderSize = 40;
inline constexpr char kTraceMagic[4] = {'D', 'U', 'T', 'R'};

// Upper-bound slack for stored el2n/entropy: values are exact in 64-bit but
// rounded to f32 on disk, which can land one float ulp above the bound.
inline constexpr double kChannelBoundTolerance = 1e-6;

struct TraceHeader {
    uint16_t version = kTraceVersion;
    uint16_t channel_flags = kMandatoryChannels;
    uint64_t n_samples = 0;
    uint64_t n_epochs = 0;
    uint32_t n_classes = 0;

    bool has_el2n() const { return channel_flags & kChannelEl2n; }
    bool has_entropy() const { return channel_flags & kChannelEntropy; }

    // Bytes per on-disk record for the declared channels.
    size_t record_size() const { return 5 + (has_el2n() ? 4 : 0) + (has_entropy() ? 4 : 0); }
    uint64_t block_size() const { return 8 + n_samples * record_size(); }
    uint64_t file_size() const { return kTraceHeaderSize + n_epochs * block_size(); }

    // Throws data_error naming the first violated invariant.
    void check() const;
};

struct SampleEpochRecord {
    float true_prob = 0.0f;
    uint8_t correct = 0;
    std::optional<float> el2n;
    std::optional<float> entropy;
};

// One epoch of per-sample values, stored as columns. Optional columns are
// empty when the channel is absent.
struct EpochBlock {
    uint64_t epoch_index = 0;
    std::vector<float> true_prob;
    std::vector<uint8_t> correct;
    std::vector<float> el2n;
    std::vector<float> entropy;

    size_t size() const { return true_prob.size(); }

    SampleEpochRecord record(size_t i) const {
        SampleEpochRecord r;
        r.true_prob = true_prob[i];
        r.correct = correct[i];
        if (!el2n.empty()) r.el2n = el2n[i];
        if (!entropy.empty()) r.entropy = entropy[i];
        return r;
    }

    void resize(size_t n, bool with_el2n, bool with_entropy) {
        true_prob.resize(n);
        correct.resize(n);
        el2n.resize(with_el2n ? n : 0);
        entropy.resize(with_entropy ? n : 0);
    }
};

// Sequential single-owner writer. Epochs must arrive as 0,1,...,K-1; every
// record is range-checked before any byte is written.
class TraceWriter {
  public:
    TraceWriter(const std::filesystem::path& path, const TraceHeader& header);

    void append_epoch(const EpochBlock& block);
    void append_epoch(uint64_t epoch_index, std::span<const SampleEpochRecord> records);

    // Verifies all n_epochs blocks were written and flushes.
    void finish();

    const TraceHeader& header() const { return header_; }
    uint64_t epochs_written() const { return next_epoch_; }

  private:
    TraceHeader header_;
    std::filesystem::path path_;
    std::ofstream out_;
    uint64_t next_epoch_ = 0;
    std::vector<char> block_buf_;
};

// Streaming reader; holds one block of memory regardless of file size.
class TraceReader {
  public:
    explicit TraceReader(const std::filesystem::path& path);

    const TraceHeader& header() const { return header_; }
    const std::filesystem::path& path() const { return path_; }

    // Fills `block` with the next epoch; false once all n_epochs were read.
    bool next(EpochBlock& block);

    // Skips forward without decoding.
    void skip(uint64_t n_blocks);

    uint64_t next_epoch() const { return next_epoch_; }

  private:
    TraceHeader header_;
    std::filesystem::path path_;
    std::ifstream in_;
    uint64_t next_epoch_ = 0;
    std::vector<char> block_buf_;
};

TraceWriter open_writer(const std::filesystem::path& path, const TraceHeader& header);
TraceReader open_reader(const std::filesystem::path& path);

struct ValidationFinding {
    std::string level;  // "ERROR"
    int64_t sample = -1;
    int64_t epoch = -1;
    std::string field;
    std::string msg;

    // `LEVEL sample=<id> epoch=<k> field=<name> msg=<...>`
    std::string to_line() const;
};

struct ValidationReport {
    bool ok = true;
    uint64_t total_violations = 0;
    // First kMaxFindings findings; total_violations keeps the full count.
    std::vector<ValidationFinding> findings;
    uint64_t expected_bytes = 0;
    uint64_t actual_bytes = 0;

    static constexpr size_t kMaxFindings = 100;
    std::string to_text() const;
};

// Streams the whole file and reports every violation it can detect: header
// invariants, length arithmetic, epoch contiguity, per-channel ranges.
// Never throws on content problems, only on an unreadable path.
ValidationReport validate(const std::filesystem::path& path);

}  // namespace prunekit

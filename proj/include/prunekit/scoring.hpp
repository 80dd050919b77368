#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "prunekit/trace.hpp"

namespace prunekit {

enum class Method {
    kDynUnc,
    kForgetting,
    kEl2n,
    kEntropy,
    kStaticVariance,
    kRandom,
};

// Canonical names: dyn_unc, forgetting, el2n, entropy, static_variance, random.
const char* method_name(Method m);
Method method_from_name(const std::string& name);  // std::invalid_argument on unknown names

constexpr uint64_t kDefaultWindow = 10;
constexpr uint64_t kDefaultFirstM = 5;

// Per-sample importance scores, higher = kept first. `params` carries the
// method parameters as ordered key=value pairs for provenance.
struct ScoreTable {
    Method method = Method::kDynUnc;
    std::vector<std::pair<std::string, std::string>> params;
    std::string trace;
    std::vector<double> scores;

    size_t size() const { return scores.size(); }
};

// CSV with a leading `# method=... params=... trace=...` comment, then
// `sample_id,score` rows in ascending id, scores at 17 significant digits.
void write_scores(const ScoreTable& table, const std::filesystem::path& path);
ScoreTable read_scores(const std::filesystem::path& path);

// Sample standard deviation: mean over all values, variance divisor J-1.
// Bounded by sqrt(J/(4(J-1))) when values lie in [0,1].
double window_std(std::span<const double> values);

// Streaming sliding-window accumulator. Per sample it keeps a J-slot ring of
// the most recent true_prob values plus a running sum of completed-window
// standard deviations; epochs arrive in order, windows complete in lockstep
// across samples. A window starting at epoch k covers epochs k..k+J-1; the
// window starting at K-J (the only one containing the final epoch) is counted
// only when include_final_window is set.
class DynUncAccumulator {
  public:
    // threads = 0 resolves to thread_count(). Requires J >= 2 and K >= J+1.
    DynUncAccumulator(uint64_t n_samples, uint64_t n_epochs, uint64_t window,
                      bool include_final_window = false, unsigned threads = 0);

    void add_epoch(std::span<const float> true_prob);
    void add_epoch(const EpochBlock& block) { add_epoch(block.true_prob); }

    uint64_t epochs_seen() const { return epochs_seen_; }
    uint64_t windows_done() const { return windows_done_; }
    uint64_t expected_windows() const { return n_windows_; }
    size_t state_bytes() const { return (ring_.size() + acc_.size()) * sizeof(double); }

    // Mean of the completed window deviations. Requires all K epochs consumed.
    std::vector<double> finalize() const;

  private:
    uint64_t n_;
    uint64_t k_epochs_;
    uint64_t window_;
    uint64_t n_windows_;
    unsigned threads_;
    uint64_t epochs_seen_ = 0;
    uint64_t windows_done_ = 0;
    std::vector<double> ring_;  // n rows of J slots, slot = epoch % J
    std::vector<double> acc_;   // per-sample sum of completed window stds
};

ScoreTable dyn_unc_scores(TraceReader& reader, uint64_t window = kDefaultWindow,
                          bool include_final_window = false, unsigned threads = 0);

// Count of correct->incorrect transitions; never-correct samples get the
// sentinel K+1 so they rank above every counted score.
ScoreTable forgetting_scores(TraceReader& reader, unsigned threads = 0);

// Mean of the el2n channel at `epoch` across runs. All readers must carry the
// channel and agree on n.
ScoreTable el2n_scores(std::vector<TraceReader>& readers, uint64_t epoch);

ScoreTable entropy_scores(TraceReader& reader, uint64_t epoch);

// Standard deviation (divisor m-1) of true_prob over epochs 0..m-1.
ScoreTable static_variance_scores(TraceReader& reader, uint64_t first_m_epochs = kDefaultFirstM,
                                  unsigned threads = 0);

// Seeded uniform [0,1) scores, identical for identical (n, seed).
ScoreTable random_scores(uint64_t n_samples, uint64_t seed);

}  // namespace prunekit

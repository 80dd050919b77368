#include "prunekit/scoring.hpp"

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "prunekit/errors.hpp"

using namespace prunekit;
namespace fs = std::filesystem;

namespace {

fs::path write_temp_trace(const testutil::SeriesTrace& t, const fs::path& dir,
                          const std::string& name) {
    fs::path path = dir / name;
    testutil::write_trace_file(t, path);
    return path;
}

double dyn_unc_bound(uint64_t j) {
    return std::sqrt(static_cast<double>(j) / (4.0 * static_cast<double>(j - 1)));
}

}  // namespace

TEST_CASE("window_std hand fixtures") {
    CHECK(window_std(std::vector<double>{0.4, 0.4, 0.4}) <= 1e-15);
    CHECK(window_std(std::vector<double>{0.2, 0.4, 0.6}) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(window_std(std::vector<double>{0.0, 1.0}) ==
          doctest::Approx(0.7071067811865476).epsilon(1e-12));
    CHECK_THROWS_WITH_AS(window_std(std::vector<double>{0.5}), "window length must be >= 2",
                         std::invalid_argument);
}

TEST_CASE("window_std stays within its theoretical bound") {
    std::mt19937 gen(99);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (uint64_t j : {2, 3, 5, 10}) {
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<double> w(j);
            for (double& v : w) v = dist(gen);
            double s = window_std(w);
            CHECK(s >= 0.0);
            CHECK(s <= dyn_unc_bound(j) + 1e-12);
        }
    }
}

TEST_CASE("dyn_unc hand fixture: K=4 J=2 alternating") {
    fs::path dir = testutil::temp_dir("scoring_hand");
    testutil::SeriesTrace t = testutil::from_series({{0.0f, 1.0f, 0.0f, 1.0f}});
    fs::path path = write_temp_trace(t, dir, "t.dutr");
    TraceReader reader(path);
    ScoreTable table = dyn_unc_scores(reader, 2);
    CHECK(table.scores[0] == doctest::Approx(0.7071067811865476).epsilon(1e-12));

    // the literal index range never reaches epoch K-1
    testutil::SeriesTrace t2 = testutil::from_series({{0.0f, 1.0f, 0.0f, 0.123f}});
    TraceReader reader2(write_temp_trace(t2, dir, "t2.dutr"));
    CHECK(dyn_unc_scores(reader2, 2).scores[0] == table.scores[0]);
}

TEST_CASE("dyn_unc is zero exactly for series constant over epochs 0..K-2") {
    fs::path dir = testutil::temp_dir("scoring_const");
    testutil::SeriesTrace t = testutil::from_series({
        {0.3f, 0.3f, 0.3f, 0.3f, 0.9f},  // constant until the unused final epoch
        {0.3f, 0.3f, 0.3f, 0.4f, 0.3f},  // deviation inside the covered range
    });
    TraceReader reader(write_temp_trace(t, dir, "t.dutr"));
    ScoreTable table = dyn_unc_scores(reader, 2);
    CHECK(table.scores[0] == 0.0);
    CHECK(table.scores[1] > 0.0);
}

TEST_CASE("dyn_unc matches the two-pass oracle on random traces") {
    fs::path dir = testutil::temp_dir("scoring_oracle");
    testutil::SeriesTrace t = testutil::random_trace(200, 30, 1234);
    fs::path path = write_temp_trace(t, dir, "t.dutr");

    for (uint64_t j : {2, 5, 10}) {
        TraceReader reader(path);
        ScoreTable table = dyn_unc_scores(reader, j);
        REQUIRE(table.scores.size() == 200);
        for (uint64_t i = 0; i < 200; ++i) {
            double expected = testutil::oracle_dyn_unc(testutil::sample_series(t, i), j);
            CHECK(std::abs(table.scores[i] - expected) <= 1e-12);
            CHECK(table.scores[i] <= dyn_unc_bound(j) + 1e-12);
        }
    }
}

TEST_CASE("include_final_window covers K-J+1 windows") {
    fs::path dir = testutil::temp_dir("scoring_final_window");
    testutil::SeriesTrace t = testutil::random_trace(50, 12, 77);
    fs::path path = write_temp_trace(t, dir, "t.dutr");

    TraceReader literal(path);
    ScoreTable lit = dyn_unc_scores(literal, 5, false);
    TraceReader extended(path);
    ScoreTable ext = dyn_unc_scores(extended, 5, true);
    bool any_diff = false;
    for (uint64_t i = 0; i < 50; ++i) {
        double expected = testutil::oracle_dyn_unc(testutil::sample_series(t, i), 5, true);
        CHECK(std::abs(ext.scores[i] - expected) <= 1e-12);
        if (ext.scores[i] != lit.scores[i]) any_diff = true;
    }
    CHECK(any_diff);
}

TEST_CASE("dyn_unc accumulator bookkeeping and state size") {
    DynUncAccumulator acc(100, 30, 10);
    CHECK(acc.expected_windows() == 20);
    CHECK(acc.state_bytes() == 100 * 10 * 8 + 100 * 8);
    std::vector<float> epoch(100, 0.5f);
    for (int e = 0; e < 30; ++e) acc.add_epoch(epoch);
    CHECK(acc.windows_done() == 20);
    CHECK(acc.epochs_seen() == 30);
    std::vector<double> scores = acc.finalize();
    CHECK(scores[0] == 0.0);
    CHECK_THROWS_AS(acc.add_epoch(epoch), data_error);
}

TEST_CASE("dyn_unc rejects degenerate window configurations") {
    fs::path dir = testutil::temp_dir("scoring_degenerate");
    testutil::SeriesTrace t = testutil::random_trace(5, 10, 3);
    fs::path path = write_temp_trace(t, dir, "t.dutr");
    TraceReader r1(path);
    CHECK_THROWS_AS(dyn_unc_scores(r1, 1), std::invalid_argument);
    TraceReader r2(path);
    CHECK_THROWS_AS(dyn_unc_scores(r2, 10), data_error);  // needs K >= J+1
    TraceReader r3(path);
    CHECK_THROWS_AS(dyn_unc_scores(r3, 15), data_error);
    DynUncAccumulator acc(5, 10, 4);
    CHECK_THROWS_AS(acc.finalize(), data_error);  // no epochs consumed yet
}

TEST_CASE("dyn_unc translation and scale behavior") {
    fs::path dir = testutil::temp_dir("scoring_invariance");
    const uint64_t n = 40, k = 20, j = 5;
    std::mt19937 gen(5);
    std::uniform_real_distribution<float> dist(0.2f, 0.5f);
    std::vector<std::vector<float>> base(n, std::vector<float>(k));
    for (auto& s : base)
        for (auto& v : s) v = dist(gen);

    std::vector<std::vector<float>> shifted = base, scaled = base;
    for (auto& s : shifted)
        for (auto& v : s) v += 0.25f;
    for (auto& s : scaled)
        for (auto& v : s) v *= 0.5f;

    TraceReader rb(write_temp_trace(testutil::from_series(base), dir, "base.dutr"));
    TraceReader rs(write_temp_trace(testutil::from_series(shifted), dir, "shift.dutr"));
    TraceReader rc(write_temp_trace(testutil::from_series(scaled), dir, "scale.dutr"));
    ScoreTable tb = dyn_unc_scores(rb, j);
    ScoreTable ts = dyn_unc_scores(rs, j);
    ScoreTable tc = dyn_unc_scores(rc, j);
    for (uint64_t i = 0; i < n; ++i) {
        CHECK(std::abs(ts.scores[i] - tb.scores[i]) <= 1e-7);  // f32 storage noise only
        CHECK(std::abs(tc.scores[i] - 0.5 * tb.scores[i]) <= 1e-7);
    }
}

TEST_CASE("dyn_unc has no cross-sample coupling") {
    fs::path dir = testutil::temp_dir("scoring_permute");
    const uint64_t n = 30, k = 15;
    testutil::SeriesTrace t = testutil::random_trace(n, k, 21);
    testutil::SeriesTrace permuted = t;
    std::vector<uint64_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), std::mt19937(9));
    for (uint64_t e = 0; e < k; ++e)
        for (uint64_t i = 0; i < n; ++i) {
            permuted.true_prob[e][i] = t.true_prob[e][perm[i]];
            permuted.correct[e][i] = t.correct[e][perm[i]];
        }

    TraceReader ra(write_temp_trace(t, dir, "a.dutr"));
    TraceReader rb(write_temp_trace(permuted, dir, "b.dutr"));
    ScoreTable a = dyn_unc_scores(ra, 5);
    ScoreTable b = dyn_unc_scores(rb, 5);
    for (uint64_t i = 0; i < n; ++i) CHECK(b.scores[i] == a.scores[perm[i]]);
}

TEST_CASE("scores are bit-identical across thread counts") {
    fs::path dir = testutil::temp_dir("scoring_threads");
    // large enough that parallel_for actually splits into several shards
    testutil::SeriesTrace t = testutil::random_trace(20000, 12, 31);
    fs::path path = write_temp_trace(t, dir, "t.dutr");

    auto run = [&](unsigned threads) {
        TraceReader reader(path);
        return dyn_unc_scores(reader, 5, false, threads).scores;
    };
    std::vector<double> one = run(1);
    CHECK(run(2) == one);
    CHECK(run(5) == one);
    CHECK(run(16) == one);

    auto run_forget = [&](unsigned threads) {
        TraceReader reader(path);
        return forgetting_scores(reader, threads).scores;
    };
    CHECK(run_forget(1) == run_forget(7));
    auto run_var = [&](unsigned threads) {
        TraceReader reader(path);
        return static_variance_scores(reader, 5, threads).scores;
    };
    CHECK(run_var(1) == run_var(7));
}

TEST_CASE("forgetting hand fixtures and sentinel") {
    fs::path dir = testutil::temp_dir("scoring_forget");
    testutil::SeriesTrace t = testutil::from_series(
        {
            {0.9f, 0.1f, 0.9f, 0.1f},
            {0.9f, 0.9f, 0.9f, 0.9f},
            {0.1f, 0.1f, 0.1f, 0.1f},
            {0.1f, 0.9f, 0.9f, 0.1f},
        },
        {
            {1, 0, 1, 0},
            {1, 1, 1, 1},
            {0, 0, 0, 0},
            {0, 1, 1, 0},
        });
    TraceReader reader(write_temp_trace(t, dir, "t.dutr"));
    ScoreTable table = forgetting_scores(reader);
    CHECK(table.scores[0] == 2.0);
    CHECK(table.scores[1] == 0.0);
    CHECK(table.scores[2] == 5.0);  // never correct: sentinel K+1
    CHECK(table.scores[3] == 1.0);
}

TEST_CASE("forgetting matches its oracle on random traces") {
    fs::path dir = testutil::temp_dir("scoring_forget_oracle");
    testutil::SeriesTrace t = testutil::random_trace(300, 20, 8);
    TraceReader reader(write_temp_trace(t, dir, "t.dutr"));
    ScoreTable table = forgetting_scores(reader);
    for (uint64_t i = 0; i < 300; ++i)
        CHECK(table.scores[i] == testutil::oracle_forgetting(testutil::sample_correct(t, i)));
}

TEST_CASE("el2n single run is the identity at the requested epoch") {
    fs::path dir = testutil::temp_dir("scoring_el2n");
    testutil::SeriesTrace t = testutil::random_trace(20, 6, 13, true);
    t.el2n[4][7] = 0.5657f;
    fs::path path = write_temp_trace(t, dir, "t.dutr");
    std::vector<TraceReader> readers;
    readers.emplace_back(path);
    ScoreTable table = el2n_scores(readers, 4);
    CHECK(table.scores[7] == doctest::Approx(0.5657).epsilon(1e-6));
    for (uint64_t i = 0; i < 20; ++i)
        CHECK(table.scores[i] == static_cast<double>(t.el2n[4][i]));
}

TEST_CASE("el2n averages across runs") {
    fs::path dir = testutil::temp_dir("scoring_el2n_multi");
    testutil::SeriesTrace a = testutil::random_trace(10, 4, 1, true);
    testutil::SeriesTrace b = testutil::random_trace(10, 4, 2, true);
    std::fill(a.el2n[2].begin(), a.el2n[2].end(), 0.2f);
    std::fill(b.el2n[2].begin(), b.el2n[2].end(), 0.4f);
    std::vector<TraceReader> readers;
    readers.emplace_back(write_temp_trace(a, dir, "a.dutr"));
    readers.emplace_back(write_temp_trace(b, dir, "b.dutr"));
    ScoreTable table = el2n_scores(readers, 2);
    for (double s : table.scores) CHECK(s == doctest::Approx(0.3).epsilon(1e-6));
    CHECK(table.trace.find(',') != std::string::npos);
}

TEST_CASE("el2n validates channel, epoch and run compatibility") {
    fs::path dir = testutil::temp_dir("scoring_el2n_errors");
    testutil::SeriesTrace no_channel = testutil::random_trace(10, 4, 1);
    testutil::SeriesTrace with_channel = testutil::random_trace(10, 4, 1, true);
    testutil::SeriesTrace other_n = testutil::random_trace(11, 4, 1, true);

    {
        std::vector<TraceReader> readers;
        readers.emplace_back(write_temp_trace(no_channel, dir, "no.dutr"));
        CHECK_THROWS_AS(el2n_scores(readers, 2), data_error);
    }
    {
        std::vector<TraceReader> readers;
        readers.emplace_back(write_temp_trace(with_channel, dir, "yes.dutr"));
        CHECK_THROWS_AS(el2n_scores(readers, 4), data_error);  // epoch out of range
    }
    {
        std::vector<TraceReader> readers;
        readers.emplace_back(dir / "yes.dutr");
        readers.emplace_back(write_temp_trace(other_n, dir, "n11.dutr"));
        CHECK_THROWS_AS(el2n_scores(readers, 2), data_error);
    }
}

TEST_CASE("entropy is the identity on its channel") {
    fs::path dir = testutil::temp_dir("scoring_entropy");
    testutil::SeriesTrace t = testutil::random_trace(15, 5, 4, false, true);
    t.entropy[3][2] = 0.325083f;
    TraceReader reader(write_temp_trace(t, dir, "t.dutr"));
    ScoreTable table = entropy_scores(reader, 3);
    CHECK(table.scores[2] == doctest::Approx(0.325083).epsilon(1e-6));

    testutil::SeriesTrace no_channel = testutil::random_trace(15, 5, 4);
    TraceReader r2(write_temp_trace(no_channel, dir, "no.dutr"));
    CHECK_THROWS_AS(entropy_scores(r2, 3), data_error);
    TraceReader r3(dir / "t.dutr");
    CHECK_THROWS_AS(entropy_scores(r3, 5), data_error);
}

TEST_CASE("static variance hand fixture and bounds") {
    fs::path dir = testutil::temp_dir("scoring_var");
    testutil::SeriesTrace t = testutil::from_series({
        {0.2f, 0.4f, 0.6f, 0.9f, 0.9f},
        {0.7f, 0.7f, 0.7f, 0.7f, 0.7f},
    });
    fs::path path = write_temp_trace(t, dir, "t.dutr");
    {
        TraceReader reader(path);
        ScoreTable table = static_variance_scores(reader, 3);
        CHECK(table.scores[0] == doctest::Approx(0.2).epsilon(1e-6));
        CHECK(table.scores[1] == doctest::Approx(0.0).epsilon(1e-9));
    }
    {
        TraceReader reader(path);
        CHECK_THROWS_AS(static_variance_scores(reader, 1), data_error);
    }
    {
        TraceReader reader(path);
        CHECK_THROWS_AS(static_variance_scores(reader, 6), data_error);
    }
    {
        // default m = 5 observes all five epochs here
        TraceReader reader(path);
        ScoreTable table = static_variance_scores(reader);
        std::vector<double> series = testutil::sample_series(t, 0);
        CHECK(table.scores[0] ==
              doctest::Approx(testutil::oracle_window_std(series)).epsilon(1e-9));
    }
}

TEST_CASE("random scores are seeded and uniform on [0,1)") {
    ScoreTable a = random_scores(200, 42);
    ScoreTable b = random_scores(200, 42);
    ScoreTable c = random_scores(200, 43);
    CHECK(a.scores == b.scores);
    CHECK(a.scores != c.scores);
    for (double s : a.scores) {
        CHECK(s >= 0.0);
        CHECK(s < 1.0);
    }
    CHECK(random_scores(10, 1).scores.size() == 10);
}

TEST_CASE("score table round-trips through CSV exactly") {
    fs::path dir = testutil::temp_dir("scoring_csv");
    ScoreTable table;
    table.method = Method::kDynUnc;
    table.params = {{"J", "10"}, {"include_final_window", "1"}};
    table.trace = "/tmp/somewhere/t.dutr";
    table.scores = {0.1, 1.0 / 3.0, 5.0, 0.7071067811865476};
    fs::path path = dir / "scores.csv";
    write_scores(table, path);

    ScoreTable back = read_scores(path);
    CHECK(back.method == Method::kDynUnc);
    CHECK(back.params == table.params);
    CHECK(back.trace == table.trace);
    CHECK(back.scores == table.scores);  // 17 significant digits round-trip doubles

    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "# method=dyn_unc params=J=10,include_final_window=1 trace=/tmp/somewhere/t.dutr");
    std::getline(in, line);
    CHECK(line == "sample_id,score");
}

TEST_CASE("score table reader rejects malformed files") {
    fs::path dir = testutil::temp_dir("scoring_csv_bad");
    auto write_text = [&](const std::string& name, const std::string& text) {
        std::ofstream out(dir / name);
        out << text;
        return dir / name;
    };
    CHECK_THROWS_AS(read_scores(write_text("no_header.csv", "sample_id,score\n0,0.5\n")),
                    data_error);
    CHECK_THROWS_AS(
        read_scores(write_text("gap.csv",
                               "# method=random params=seed=1 trace=x\nsample_id,score\n0,0.5\n2,0.5\n")),
        data_error);
    CHECK_THROWS_AS(
        read_scores(write_text("garbage.csv",
                               "# method=random params=seed=1 trace=x\nsample_id,score\n0,zebra\n")),
        data_error);
    CHECK_THROWS_AS(read_scores(dir / "missing.csv"), io_error);
    CHECK_THROWS_AS(method_from_name("grand"), std::invalid_argument);
}

TEST_CASE("method names round-trip") {
    for (Method m : {Method::kDynUnc, Method::kForgetting, Method::kEl2n, Method::kEntropy,
                     Method::kStaticVariance, Method::kRandom})
        CHECK(method_from_name(method_name(m)) == m);
    CHECK(method_from_name("dyn-unc") == Method::kDynUnc);
}

#include <doctest.h>

#include <cmath>
#include <functional>
#include <stdexcept>

#include "narsal/alignment.hpp"

using namespace narsal;

namespace {

SimilarityMatrix matrix(int n, int m, std::function<double(int, int)> fill) {
    SimilarityMatrix sim;
    sim.rows = n;
    sim.cols = m;
    sim.values.resize(static_cast<std::size_t>(n) * static_cast<std::size_t>(m));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) sim.at(i, j) = fill(i, j);
    }
    return sim;
}

SimilarityMatrix random_matrix(int n, int m, std::uint64_t seed) {
    RngStream rng(seed, 0);
    return matrix(n, m, [&](int, int) { return 2.0 * rng.next_unit() - 1.0; });
}

/// Exhaustive best monotonic-path score.
double brute_force_best(const SimilarityMatrix& sim, int i, int j) {
    const double here = sim.at(i, j);
    if (i == sim.rows - 1 && j == sim.cols - 1) return here;
    double best = -1e300;
    if (i + 1 < sim.rows) best = std::max(best, brute_force_best(sim, i + 1, j));
    if (j + 1 < sim.cols) best = std::max(best, brute_force_best(sim, i, j + 1));
    if (i + 1 < sim.rows && j + 1 < sim.cols) {
        best = std::max(best, brute_force_best(sim, i + 1, j + 1));
    }
    return here + best;
}

bool path_is_valid(const AlignmentPath& path, int n, int m) {
    if (path.cells.empty()) return false;
    if (path.cells.front() != std::pair<int, int>{0, 0}) return false;
    if (path.cells.back() != std::pair<int, int>{n - 1, m - 1}) return false;
    for (std::size_t k = 1; k < path.cells.size(); ++k) {
        const int di = path.cells[k].first - path.cells[k - 1].first;
        const int dj = path.cells[k].second - path.cells[k - 1].second;
        const bool ok = (di == 1 && dj == 0) || (di == 0 && dj == 1) || (di == 1 && dj == 1);
        if (!ok) return false;
    }
    return true;
}

} // namespace

TEST_CASE("a single-row matrix forces the one horizontal path") {
    const auto sim = random_matrix(1, 5, 1);
    const AlignmentPath path = dtw_align(sim);
    REQUIRE(path.cells.size() == 5);
    for (int j = 0; j < 5; ++j) {
        CHECK(path.cells[static_cast<std::size_t>(j)] == std::pair<int, int>{0, j});
    }
}

TEST_CASE("an identity-favoring matrix aligns the diagonal") {
    const auto sim = matrix(3, 3, [](int i, int j) { return i == j ? 1.0 : 0.0; });
    const AlignmentPath path = dtw_align(sim);
    REQUIRE(path.cells.size() == 3);
    CHECK(path_score(sim, path) == doctest::Approx(3.0));
    for (int k = 0; k < 3; ++k) {
        CHECK(path.cells[static_cast<std::size_t>(k)] == std::pair<int, int>{k, k});
    }
}

TEST_CASE("DP path score equals brute force on random instances") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const int n = 4, m = 5;
        const auto sim = random_matrix(n, m, seed);
        const AlignmentPath path = dtw_align(sim);
        CHECK(path_is_valid(path, n, m));
        CHECK(path_score(sim, path) == doctest::Approx(brute_force_best(sim, 0, 0)).epsilon(1e-12));
    }
}

TEST_CASE("empty similarity matrices are rejected") {
    SimilarityMatrix sim;
    CHECK_THROWS_AS(dtw_align(sim), std::invalid_argument);
}

TEST_CASE("make_windows follows the remainder rule") {
    SUBCASE("n=20 W=5 gives five blocks of four") {
        const WindowPartition p = make_windows(20, 5);
        REQUIRE(p.window_count() == 5);
        for (const WindowBlock& w : p.windows) CHECK(w.size() == 4);
    }
    SUBCASE("n=23 W=5 gives sizes 5,5,5,4,4") {
        const WindowPartition p = make_windows(23, 5);
        const std::vector<int> sizes{p.windows[0].size(), p.windows[1].size(),
                                     p.windows[2].size(), p.windows[3].size(),
                                     p.windows[4].size()};
        CHECK(sizes == std::vector<int>{5, 5, 5, 4, 4});
        validate_partition(p, 23);
    }
    SUBCASE("n=5 W=5 gives singletons") {
        const WindowPartition p = make_windows(5, 5);
        for (const WindowBlock& w : p.windows) CHECK(w.size() == 1);
    }
    SUBCASE("n<W is rejected") {
        CHECK_THROWS_AS(make_windows(4, 5), std::invalid_argument);
    }
}

TEST_CASE("identity paths project to identical partitions") {
    AlignmentPath path;
    for (int k = 0; k < 10; ++k) path.cells.emplace_back(k, k);
    const WindowPartition anchor = make_windows(10, 2);
    const WindowPartition twin = project_windows(path, anchor, 10);
    REQUIRE(twin.window_count() == 2);
    CHECK(twin.windows[0].start == anchor.windows[0].start);
    CHECK(twin.windows[0].end == anchor.windows[0].end);
    CHECK(twin.windows[1].start == anchor.windows[1].start);
    CHECK(twin.windows[1].end == anchor.windows[1].end);
}

TEST_CASE("an anchor window collapsing to one twin sentence projects to size 1") {
    // Anchor 0..3 all aligned to twin 0; anchor 4..5 to twin 1..2.
    AlignmentPath path;
    path.cells = {{0, 0}, {1, 0}, {2, 0}, {3, 0}, {4, 1}, {5, 2}};
    WindowPartition anchor{{{0, 3}, {4, 5}}};
    const WindowPartition twin = project_windows(path, anchor, 3);
    CHECK(twin.windows[0].start == 0);
    CHECK(twin.windows[0].end == 0);
    CHECK(twin.windows[1].start == 1);
    CHECK(twin.windows[1].end == 2);
}

TEST_CASE("boundary twin sentences go to the earlier window") {
    // Twin sentence 1 aligned into both anchor windows.
    AlignmentPath path;
    path.cells = {{0, 0}, {1, 1}, {2, 1}, {3, 2}};
    WindowPartition anchor{{{0, 1}, {2, 3}}};
    const WindowPartition twin = project_windows(path, anchor, 3);
    CHECK(twin.windows[0].end == 1);
    CHECK(twin.windows[1].start == 2);
    validate_partition(twin, 3);
}

TEST_CASE("projection matches a direct set-based recomputation on random paths") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        // Random monotone path on a 10x10 grid.
        RngStream rng(seed, 7);
        AlignmentPath path;
        int i = 0, j = 0;
        path.cells.emplace_back(0, 0);
        while (i < 9 || j < 9) {
            const std::uint64_t move = rng.next_below(3);
            if ((move == 0 || j == 9) && i < 9) {
                i += 1;
            } else if ((move == 1 || i == 9) && j < 9) {
                j += 1;
            } else if (i < 9 && j < 9) {
                i += 1;
                j += 1;
            }
            path.cells.emplace_back(i, j);
        }
        const WindowPartition anchor = make_windows(10, 2);
        const WindowPartition twin = project_windows(path, anchor, 10);

        // Oracle: collect aligned j per window, clip overlaps to the earlier one.
        int prev_end = -1;
        for (int w = 0; w < 2; ++w) {
            int lo = 10, hi = -1;
            for (const auto& [pi, pj] : path.cells) {
                if (pi >= anchor.windows[static_cast<std::size_t>(w)].start &&
                    pi <= anchor.windows[static_cast<std::size_t>(w)].end) {
                    lo = std::min(lo, pj);
                    hi = std::max(hi, pj);
                }
            }
            const int start = std::max(lo, prev_end + 1);
            CHECK(twin.windows[static_cast<std::size_t>(w)].start == start);
            CHECK(twin.windows[static_cast<std::size_t>(w)].end == hi);
            prev_end = std::max(prev_end, hi);
        }
        validate_partition(twin, 10);
    }
}

TEST_CASE("twin filter applies window and length gates") {
    TwinFilterConfig filter; // min window 3, min anchor 20, band 14
    std::string reason;

    SUBCASE("all windows at the boundary pass") {
        WindowPartition tw{{{0, 2}, {3, 5}, {6, 8}, {9, 11}, {12, 14}}};
        CHECK(twin_filter_keep(tw, 21, 15, filter, &reason));
        CHECK(reason.empty());
    }
    SUBCASE("one short window fails") {
        WindowPartition tw{{{0, 2}, {3, 5}, {6, 7}, {8, 10}, {11, 13}}};
        CHECK_FALSE(twin_filter_keep(tw, 21, 14, filter, &reason));
        CHECK(reason.find("window 2") != std::string::npos);
    }
    SUBCASE("a 19-sentence anchor fails the length gate") {
        WindowPartition tw{{{0, 3}, {4, 7}, {8, 11}, {12, 15}, {16, 18}}};
        CHECK_FALSE(twin_filter_keep(tw, 19, 19, filter, &reason));
        CHECK(reason.find("19") != std::string::npos);
    }
    SUBCASE("twin length outside the band fails") {
        WindowPartition tw{{{0, 9}, {10, 19}, {20, 29}, {30, 39}, {40, 49}}};
        CHECK_FALSE(twin_filter_keep(tw, 20, 50, filter, &reason));
        CHECK(!reason.empty());
    }
}

TEST_CASE("alignment records round-trip through JSONL") {
    const auto tmp = std::filesystem::temp_directory_path() / "narsal_align_rt.jsonl";
    std::vector<StoryAlignment> alignments;
    StoryAlignment a;
    a.id = "story-1";
    a.path.cells = {{0, 0}, {1, 1}, {2, 1}};
    a.anchor_windows = WindowPartition{{{0, 1}, {2, 2}}};
    a.twin_windows = WindowPartition{{{0, 0}, {1, 1}}};
    a.kept = false;
    a.drop_reason = "twin window 0 has 1 sentences, minimum is 3";
    alignments.push_back(a);
    write_alignments(tmp, alignments);
    const auto loaded = read_alignments(tmp);
    REQUIRE(loaded.size() == 1);
    CHECK(loaded[0].id == "story-1");
    CHECK(loaded[0].path.cells == a.path.cells);
    CHECK(loaded[0].kept == false);
    CHECK(loaded[0].drop_reason == a.drop_reason);
    CHECK(alignment_map(loaded).count("story-1") == 1);
    std::filesystem::remove(tmp);
}

TEST_CASE("sentence similarities are cosines of standalone sentence encodings") {
    const Vocabulary vocab =
        build_vocab({{"a b c", "d e f", "a b d"}}, 1);
    const Story anchor = tokenize_story("x", {"a b c", "d e f"}, vocab);
    const Story twin = tokenize_story("y", {"a b c", "a b d", "d e f"}, vocab);
    EncoderConfig cfg;
    cfg.vocab_size = vocab.size();
    cfg.dim = 8;
    cfg.layers = 1;
    cfg.heads = 2;
    cfg.ff_dim = 16;
    cfg.max_len = 64;
    RngStream init(5, hash_name("init"));
    const Encoder enc(cfg, init);

    const SimilarityMatrix sim = sentence_similarities(anchor, twin, enc);
    REQUIRE(sim.rows == 2);
    REQUIRE(sim.cols == 3);
    for (double v : sim.values) {
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
    }
    // Identical sentence text gives cosine 1 on the diagonal entry.
    CHECK(sim.at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sim.at(1, 2) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("aligning a story to itself keeps most similar sentences on the diagonal") {
    SimilarityMatrix sim = matrix(4, 4, [](int i, int j) {
        return i == j ? 0.9 : 0.1 * std::cos(static_cast<double>(i * 7 + j * 3));
    });
    const AlignmentPath path = dtw_align(sim);
    int diagonal_hits = 0;
    for (const auto& [i, j] : path.cells) {
        if (i == j) diagonal_hits += 1;
    }
    CHECK(diagonal_hits == 4);
}

TEST_CASE("align_example runs the full gate pipeline") {
    // 20-sentence anchor and twin of the same text: identity-ish alignment,
    // all windows >= 4 sentences, keeps.
    std::vector<std::string> sentences;
    std::vector<std::vector<std::string>> vocab_source;
    for (int i = 0; i < 20; ++i) {
        sentences.push_back("token" + std::to_string(i) + " filler common words here");
    }
    vocab_source.push_back(sentences);
    const Vocabulary vocab = build_vocab(vocab_source, 1);
    const Story anchor = tokenize_story("long", sentences, vocab);
    const Story twin = tokenize_story("long-twin", sentences, vocab);
    EncoderConfig cfg;
    cfg.vocab_size = vocab.size();
    cfg.dim = 8;
    cfg.layers = 1;
    cfg.heads = 2;
    cfg.ff_dim = 16;
    cfg.max_len = 256;
    RngStream init(6, hash_name("init"));
    const Encoder enc(cfg, init);

    const StoryAlignment result = align_example(anchor, twin, enc, 5, TwinFilterConfig{});
    CHECK(result.kept);
    CHECK(result.anchor_windows.window_count() == 5);
    CHECK(result.twin_windows.window_count() == 5);
    validate_partition(result.twin_windows, 20);

    // A short anchor is dropped by the window gate before any encoding.
    const Story short_story = tokenize_story("short", {"token1 a", "token2 b"}, vocab);
    const StoryAlignment dropped =
        align_example(short_story, twin, enc, 5, TwinFilterConfig{});
    CHECK_FALSE(dropped.kept);
    CHECK(!dropped.drop_reason.empty());
}

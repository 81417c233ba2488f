#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <filesystem>

#include "narsal/encoder.hpp"
#include "test_helpers.hpp"

using namespace narsal;
using namespace narsal::testing;

namespace {

EncoderConfig tiny_config(int vocab_size = 23) {
    EncoderConfig cfg;
    cfg.vocab_size = vocab_size;
    cfg.dim = 16;
    cfg.layers = 2;
    cfg.heads = 2;
    cfg.ff_dim = 24;
    cfg.max_len = 32;
    cfg.dropout = 0.1;
    return cfg;
}

Encoder tiny_encoder(std::uint64_t seed = 17, int vocab_size = 23) {
    RngStream init(seed, hash_name("init"));
    return Encoder(tiny_config(vocab_size), init);
}

const std::vector<int> kTokens{3, 5, 6, 7, 8, 9, 10, 11};

} // namespace

TEST_CASE("eval encoding is deterministic") {
    const Encoder enc = tiny_encoder();
    const Tensor a = enc.encode(kTokens);
    const Tensor b = enc.encode(kTokens);
    CHECK(a.shape == std::vector<int>{8, 16});
    CHECK(a.data == b.data);
    CHECK(a.all_finite());
}

TEST_CASE("distinct dropout streams give distinct train-mode encodings") {
    const Encoder enc = tiny_encoder();
    Graph g;
    const auto lease = enc.lease(g);
    RngStream s1(1, 100), s2(1, 200);
    const Tensor a = g.value(enc.encode_on(g, lease, kTokens, true, &s1));
    const Tensor b = g.value(enc.encode_on(g, lease, kTokens, true, &s2));
    CHECK(a.data != b.data);
    CHECK(s1.position() > 0);
}

TEST_CASE("the same dropout stream replays the same encoding") {
    const Encoder enc = tiny_encoder();
    Graph g;
    const auto lease = enc.lease(g);
    RngStream s1(9, 4), s2(9, 4);
    const Tensor a = g.value(enc.encode_on(g, lease, kTokens, true, &s1));
    const Tensor b = g.value(enc.encode_on(g, lease, kTokens, true, &s2));
    CHECK(a.data == b.data);
}

TEST_CASE("permuting two tokens changes their output rows") {
    const Encoder enc = tiny_encoder();
    std::vector<int> swapped = kTokens;
    std::swap(swapped[2], swapped[5]);
    const Tensor a = enc.encode(kTokens);
    const Tensor b = enc.encode(swapped);
    bool row2_differs = false, row5_differs = false;
    for (int j = 0; j < 16; ++j) {
        row2_differs = row2_differs || a.at(2, j) != b.at(2, j);
        row5_differs = row5_differs || a.at(5, j) != b.at(5, j);
    }
    CHECK(row2_differs);
    CHECK(row5_differs);
}

TEST_CASE("over-length and out-of-vocabulary inputs are rejected with sizes") {
    const Encoder enc = tiny_encoder();
    std::vector<int> too_long(33, 5);
    CHECK_THROWS_WITH_AS(enc.encode(too_long), doctest::Contains("33"), std::invalid_argument);
    std::vector<int> bad_id{3, 99};
    CHECK_THROWS_WITH_AS(enc.encode(bad_id), doctest::Contains("99"), std::invalid_argument);
}

TEST_CASE("pooling follows span and mode rules") {
    Tensor m({4, 3},
             std::vector<double>{
                 9, 9, 9, // BOS row
                 1, 2, 3, //
                 1, 2, 3, //
                 4, 8, 12 //
             });

    SUBCASE("a one-token span is that token's row") {
        const Tensor v = pool_span(m, {3, 3}, Pooling::mean);
        CHECK(v.data == std::vector<double>{4, 8, 12});
    }
    SUBCASE("mean of two identical rows is that row") {
        const Tensor v = pool_span(m, {1, 2}, Pooling::mean);
        CHECK(v.data == std::vector<double>{1, 2, 3});
    }
    SUBCASE("cls mode returns row 0 regardless of span") {
        const Tensor v = pool_span(m, {1, 3}, Pooling::cls);
        CHECK(v.data == std::vector<double>{9, 9, 9});
    }
    SUBCASE("empty or invalid spans are rejected") {
        CHECK_THROWS_AS(pool_span(m, {2, 1}, Pooling::mean), std::invalid_argument);
        CHECK_THROWS_AS(pool_span(m, {0, 1}, Pooling::mean), std::invalid_argument);
        CHECK_THROWS_AS(pool_span(m, {1, 7}, Pooling::mean), std::invalid_argument);
    }
}

TEST_CASE("full-story pool equals the span-length-weighted mean of sentence pools") {
    const Encoder enc = tiny_encoder();
    const std::vector<Span> spans{{1, 2}, {3, 3}, {4, 7}};
    const Tensor m = enc.encode(kTokens);
    const Tensor full = pool_story(m, spans, Pooling::mean);
    Tensor weighted({16}, 0.0);
    int total = 0;
    for (const Span& s : spans) {
        const Tensor p = pool_span(m, s, Pooling::mean);
        for (int j = 0; j < 16; ++j) weighted.data[j] += p.data[j] * s.length();
        total += s.length();
    }
    for (int j = 0; j < 16; ++j) {
        CHECK(full.data[j] == doctest::Approx(weighted.data[j] / total).epsilon(1e-12));
    }
}

TEST_CASE("window pooling tiles the sentence list") {
    const Encoder enc = tiny_encoder();
    const std::vector<Span> spans{{1, 2}, {3, 3}, {4, 5}, {6, 7}};
    const Tensor m = enc.encode(kTokens);

    SUBCASE("one window equals the full-story mean pool") {
        const auto vs = pool_windows(m, spans, WindowPartition{{{0, 3}}});
        const Tensor full = pool_story(m, spans, Pooling::mean);
        REQUIRE(vs.size() == 1);
        for (int j = 0; j < 16; ++j) {
            CHECK(vs[0].data[j] == doctest::Approx(full.data[j]).epsilon(1e-12));
        }
    }
    SUBCASE("equal token counts make the full mean the mean of window vectors") {
        const auto vs = pool_windows(m, spans, WindowPartition{{{0, 1}, {2, 3}}});
        // Windows cover tokens 1..3 and 4..7; sizes differ, so weight by size.
        const Tensor full = pool_story(m, spans, Pooling::mean);
        for (int j = 0; j < 16; ++j) {
            const double mixed = (vs[0].data[j] * 3 + vs[1].data[j] * 4) / 7.0;
            CHECK(full.data[j] == doctest::Approx(mixed).epsilon(1e-10));
        }
    }
    SUBCASE("gaps and overlaps are rejected") {
        CHECK_THROWS_AS(pool_windows(m, spans, WindowPartition{{{0, 1}, {3, 3}}}),
                        std::invalid_argument);
        CHECK_THROWS_AS(pool_windows(m, spans, WindowPartition{{{0, 2}, {2, 3}}}),
                        std::invalid_argument);
    }
}

TEST_CASE("cosine similarity basics") {
    const Tensor u({2}, std::vector<double>{1, 0});
    const Tensor v({2}, std::vector<double>{0, 1});
    Tensor w({2}, std::vector<double>{3, 4});
    CHECK(cosine_similarity(w, w) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(cosine_similarity(u, v) == doctest::Approx(0.0).epsilon(1e-12));
    Tensor neg = w;
    for (double& x : neg.data) x = -x;
    CHECK(cosine_similarity(w, neg) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK_THROWS_AS(cosine_similarity(w, Tensor({2}, 0.0)), std::invalid_argument);
}

TEST_CASE("cosine is scale invariant within 1e-12") {
    RngStream rng(3, 3);
    const Tensor u = random_tensor({16}, rng);
    const Tensor v = random_tensor({16}, rng);
    Tensor au = u, bv = v;
    for (double& x : au.data) x *= 1737.5;
    for (double& x : bv.data) x *= 2.25e-4;
    CHECK(std::fabs(cosine_similarity(au, bv) - cosine_similarity(u, v)) < 1e-12);
}

TEST_CASE("whole-encoder gradients agree with central differences") {
    // 2-layer encoder, sampled parameter coordinates, h=1e-5.
    const EncoderConfig cfg = tiny_config();
    RngStream init(21, hash_name("init"));
    Encoder enc(cfg, init);

    auto loss_value = [&]() {
        Graph g;
        const auto lease = enc.lease(g);
        const NodeId out = enc.encode_on(g, lease, kTokens, false, nullptr);
        const NodeId pooled = g.mean_rows(out, {1, 2, 3, 4, 5, 6, 7});
        const NodeId other = g.mean_rows(out, {1, 2});
        return g.value(g.cosine(pooled, other)).item();
    };

    Graph g;
    const auto lease = enc.lease(g);
    const NodeId out = enc.encode_on(g, lease, kTokens, false, nullptr);
    const NodeId pooled = g.mean_rows(out, {1, 2, 3, 4, 5, 6, 7});
    const NodeId other = g.mean_rows(out, {1, 2});
    const NodeId loss = g.cosine(pooled, other);
    g.backward(loss);

    RngStream pick(77, 0);
    const double h = 1e-5;
    int checked = 0;
    std::vector<std::string> names;
    for (const auto& [name, t] : enc.params()) names.push_back(name);
    while (checked < 20) {
        const std::string& name =
            names[static_cast<std::size_t>(pick.next_below(names.size()))];
        Tensor& p = enc.params().at(name);
        const std::size_t i = static_cast<std::size_t>(pick.next_below(p.data.size()));
        const double analytic = g.grad(lease.at(name)).data[i];
        const double orig = p.data[i];
        p.data[i] = orig + h;
        const double up = loss_value();
        p.data[i] = orig - h;
        const double down = loss_value();
        p.data[i] = orig;
        const double numeric = (up - down) / (2.0 * h);
        const double err = std::fabs(analytic - numeric);
        const double rel = err / std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
        if (err > 1e-7) {
            CHECK(rel < 1e-4);
        }
        checked += 1;
    }
}

TEST_CASE("model checkpoint glue round-trips encoder and vocabulary") {
    const auto tmp = std::filesystem::temp_directory_path() / "narsal_model_rt.bin";
    const Vocabulary vocab = build_vocab({{"a b c d e"}}, 1);
    RngStream init(5, 5);
    EncoderConfig cfg = tiny_config(vocab.size());
    Encoder enc(cfg, init);

    Checkpoint ckpt;
    ckpt.seed = 5;
    add_model_to_checkpoint(ckpt, enc, vocab);
    save_checkpoint(tmp, ckpt);

    const Checkpoint loaded = load_checkpoint(tmp);
    auto [enc2, vocab2] = model_from_checkpoint(loaded);
    CHECK(vocab2.tokens() == vocab.tokens());
    const std::vector<int> probe{3, 4, 5};
    const Tensor a = enc.encode(probe);
    const Tensor b = enc2.encode(probe);
    CHECK(a.data == b.data);
    std::filesystem::remove(tmp);
}

#include <doctest.h>

#include <cmath>
#include <numeric>

#include "narsal/synth.hpp"
#include "narsal/trainer.hpp"

using namespace narsal;

namespace {

struct ToyWorld {
    Vocabulary vocab;
    std::vector<TrainingExample> corpus;
    EncoderConfig enc_cfg;
};

ToyWorld make_world(int stories, std::uint64_t seed) {
    SynthSpec spec;
    spec.stories = stories;
    spec.sentences_min = 3;
    spec.sentences_max = 3;
    spec.seed = seed;
    const SynthResult synth = generate_synthetic(spec);
    std::vector<std::vector<std::string>> texts;
    for (const CorpusRecord& r : synth.corpus) {
        texts.push_back(r.anchor);
        if (r.twin) texts.push_back(*r.twin);
        if (r.distractor) texts.push_back(*r.distractor);
    }
    ToyWorld world;
    world.vocab = build_vocab(texts, 1);
    world.corpus = tokenize_corpus(synth.corpus, world.vocab);
    world.enc_cfg.vocab_size = world.vocab.size();
    world.enc_cfg.dim = 16;
    world.enc_cfg.layers = 1;
    world.enc_cfg.heads = 2;
    world.enc_cfg.ff_dim = 24;
    world.enc_cfg.max_len = 128;
    world.enc_cfg.dropout = 0.1;
    return world;
}

} // namespace

TEST_CASE("untrained masked-LM loss is close to ln(vocab size)") {
    const ToyWorld world = make_world(12, 3);
    RngStream init(3, hash_name("init"));
    const Encoder enc(world.enc_cfg, init);
    TrainConfig cfg;
    cfg.mode = TrainMode::masked_lm;
    cfg.seed = 3;

    Graph g;
    const auto lease = enc.lease(g);
    const auto pool = mlm_story_pool(world.corpus);
    const MlmLoss res =
        masked_lm_loss(g, enc, lease, pool, 0.15, cfg, 1, 0, /*train=*/false);
    const double expected = std::log(world.vocab.size());
    const double got = g.value(res.loss).item();
    CHECK(got > 0.9 * expected);
    CHECK(got < 1.1 * expected);
    CHECK(res.masked_positions > 0);
}

TEST_CASE("mask selection is deterministic under a fixed seed") {
    const ToyWorld world = make_world(6, 11);
    RngStream init(11, hash_name("init"));
    const Encoder enc(world.enc_cfg, init);
    TrainConfig cfg;
    cfg.mode = TrainMode::masked_lm;
    cfg.seed = 11;
    const auto pool = mlm_story_pool(world.corpus);

    auto run = [&] {
        Graph g;
        const auto lease = enc.lease(g);
        return g.value(masked_lm_loss(g, enc, lease, pool, 0.15, cfg, 2, 7).loss).item();
    };
    CHECK(run() == run());
}

TEST_CASE("invalid mask rates are rejected; sub-maskable stories are skipped") {
    const ToyWorld world = make_world(2, 5);
    RngStream init(5, hash_name("init"));
    const Encoder enc(world.enc_cfg, init);
    TrainConfig cfg;
    cfg.mode = TrainMode::masked_lm;
    Graph g;
    const auto lease = enc.lease(g);
    const auto pool = mlm_story_pool(world.corpus);
    CHECK_THROWS_AS(masked_lm_loss(g, enc, lease, pool, 0.0, cfg, 1, 0), std::invalid_argument);
    CHECK_THROWS_AS(masked_lm_loss(g, enc, lease, pool, 1.0, cfg, 1, 0), std::invalid_argument);

    // A very low rate often selects nothing; the batch must still yield a loss.
    Graph g2;
    const auto lease2 = enc.lease(g2);
    const MlmLoss res = masked_lm_loss(g2, enc, lease2, pool, 1e-9, cfg, 1, 0);
    CHECK(res.masked_positions >= 1);
    CHECK(std::isfinite(g2.value(res.loss).item()));
}

TEST_CASE("200 masked-LM steps decrease the smoothed loss on a toy corpus") {
    const ToyWorld world = make_world(50, 7);
    TrainConfig cfg;
    cfg.mode = TrainMode::masked_lm;
    cfg.batch_size = 38; // 50 stories x 3 texts = 150 items -> 4 steps/epoch
    cfg.epochs = 50;     // 200 steps
    cfg.learning_rate = 3e-3;
    cfg.seed = 7;

    TrainStats stats;
    train(world.corpus, cfg, world.enc_cfg, nullptr, &stats);
    REQUIRE(stats.step_loss.size() == 200);
    const auto mean_of = [&](std::size_t b, std::size_t e) {
        return std::accumulate(stats.step_loss.begin() + static_cast<std::ptrdiff_t>(b),
                               stats.step_loss.begin() + static_cast<std::ptrdiff_t>(e), 0.0) /
               static_cast<double>(e - b);
    };
    const double head = mean_of(0, 20);
    const double tail = mean_of(180, 200);
    CHECK(tail < head);
    CHECK(tail < 0.8 * head);
}

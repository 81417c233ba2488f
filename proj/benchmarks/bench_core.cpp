#include <benchmark/benchmark.h>

#include "narsal/alignment.hpp"
#include "narsal/info_nce.hpp"
#include "narsal/metrics.hpp"
#include "narsal/salience.hpp"
#include "narsal/synth.hpp"
#include "narsal/trainer.hpp"

namespace {

using namespace narsal;

Encoder desk_encoder(int vocab_size) {
    EncoderConfig cfg;
    cfg.vocab_size = vocab_size;
    RngStream init(1, hash_name("init"));
    return Encoder(cfg, init);
}

std::vector<int> token_run(int n, int vocab_size) {
    std::vector<int> ids{Vocabulary::kBos};
    RngStream rng(2, 2);
    for (int i = 1; i < n; ++i) {
        ids.push_back(Vocabulary::kReserved +
                      static_cast<int>(rng.next_below(
                          static_cast<std::uint64_t>(vocab_size - Vocabulary::kReserved))));
    }
    return ids;
}

void BM_EncodeShort(benchmark::State& state) {
    const Encoder enc = desk_encoder(512);
    const auto ids = token_run(40, 512);
    for (auto _ : state) {
        benchmark::DoNotOptimize(enc.encode(ids));
    }
}
BENCHMARK(BM_EncodeShort);

void BM_EncodeLong(benchmark::State& state) {
    const Encoder enc = desk_encoder(512);
    const auto ids = token_run(320, 512);
    for (auto _ : state) {
        benchmark::DoNotOptimize(enc.encode(ids));
    }
}
BENCHMARK(BM_EncodeLong);

void BM_TrainStepStoryLevel(benchmark::State& state) {
    SynthSpec spec;
    spec.stories = 32;
    spec.seed = 5;
    const SynthResult r = generate_synthetic(spec);
    std::vector<std::vector<std::string>> texts;
    for (const auto& rec : r.corpus) {
        texts.push_back(rec.anchor);
        texts.push_back(*rec.twin);
        texts.push_back(*rec.distractor);
    }
    const Vocabulary vocab = build_vocab(texts, 1);
    const auto corpus = tokenize_corpus(r.corpus, vocab);
    EncoderConfig enc_cfg;
    enc_cfg.vocab_size = vocab.size();
    RngStream init(5, hash_name("init"));
    Encoder enc(enc_cfg, init);
    TrainConfig cfg;
    cfg.mode = TrainMode::narrative_twins;
    cfg.seed = 5;
    std::vector<const TrainingExample*> batch;
    for (const auto& ex : corpus) batch.push_back(&ex);
    AdamW opt(AdamWConfig{1e-3});
    for (auto _ : state) {
        Graph g;
        const auto lease = enc.lease(g);
        const auto cb = build_story_batch(g, enc, lease, batch, cfg, 1, 0);
        const NodeId loss = info_nce_loss(g, cb, cfg.temperature);
        g.backward(loss);
        std::map<std::string, Tensor> grads;
        for (const auto& [name, node] : lease) grads.emplace(name, g.grad(node));
        opt.step(enc.params(), grads);
    }
}
BENCHMARK(BM_TrainStepStoryLevel)->Unit(benchmark::kMillisecond);

void BM_DtwAlign(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    RngStream rng(7, 7);
    SimilarityMatrix sim;
    sim.rows = n;
    sim.cols = n;
    sim.values.resize(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
    for (double& v : sim.values) v = 2.0 * rng.next_unit() - 1.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(dtw_align(sim));
    }
}
BENCHMARK(BM_DtwAlign)->Arg(34)->Arg(128);

void BM_ScoreSummarization(benchmark::State& state) {
    SynthSpec spec;
    spec.stories = 1;
    spec.seed = 9;
    const SynthResult r = generate_synthetic(spec);
    const Vocabulary vocab = build_vocab({r.corpus[0].anchor}, 1);
    const Story story = tokenize_story("b", r.corpus[0].anchor, vocab);
    const Encoder enc = desk_encoder(vocab.size());
    for (auto _ : state) {
        benchmark::DoNotOptimize(score_summarization(story, enc));
    }
}
BENCHMARK(BM_ScoreSummarization)->Unit(benchmark::kMillisecond);

void BM_SpearmanRho(benchmark::State& state) {
    RngStream rng(11, 11);
    std::vector<double> pred, human;
    for (int i = 0; i < 1000; ++i) {
        pred.push_back(rng.next_unit());
        human.push_back(std::floor(rng.next_unit() * 6));
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(spearman_rho(pred, human));
    }
}
BENCHMARK(BM_SpearmanRho);

void BM_PermutationTest(benchmark::State& state) {
    RngStream rng(13, 13);
    std::vector<double> a, b;
    for (int i = 0; i < 200; ++i) {
        a.push_back(rng.next_unit());
        b.push_back(rng.next_unit());
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(paired_permutation_test(a, b, 10000, 1));
    }
}
BENCHMARK(BM_PermutationTest)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();

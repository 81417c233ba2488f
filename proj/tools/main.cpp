#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "narsal/alignment.hpp"
#include "narsal/corpus_io.hpp"
#include "narsal/gen_client.hpp"
#include "narsal/metrics.hpp"
#include "narsal/salience.hpp"
#include "narsal/synth.hpp"
#include "narsal/trainer.hpp"

namespace {

using namespace narsal;

nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

std::vector<std::vector<std::string>> corpus_texts(const std::vector<CorpusRecord>& records) {
    std::vector<std::vector<std::string>> texts;
    for (const CorpusRecord& r : records) {
        texts.push_back(r.anchor);
        if (r.twin) texts.push_back(*r.twin);
        if (r.distractor) texts.push_back(*r.distractor);
    }
    return texts;
}

Checkpoint build_checkpoint(const Encoder& encoder, const Vocabulary& vocab, const AdamW& opt,
                            std::uint64_t seed, int epoch) {
    Checkpoint ckpt;
    ckpt.seed = seed;
    ckpt.step = opt.step_count();
    ckpt.meta["epoch"] = epoch;
    add_model_to_checkpoint(ckpt, encoder, vocab);
    ckpt.meta["optimizer"] = {{"step_count", opt.step_count()},
                              {"lr", opt.config().lr},
                              {"weight_decay", opt.config().weight_decay}};
    for (const auto& [name, t] : opt.first_moments()) ckpt.tensors.emplace("opt.m." + name, t);
    for (const auto& [name, t] : opt.second_moments()) ckpt.tensors.emplace("opt.v." + name, t);
    return ckpt;
}

int cmd_synth(const std::string& spec_path, const std::string& out_path,
              const std::string& labels_path, int stories, std::int64_t seed, int windows) {
    SynthSpec spec;
    if (!spec_path.empty()) {
        spec = SynthSpec::from_json(read_json_file(spec_path));
    }
    if (stories > 0) spec.stories = stories;
    if (seed >= 0) spec.seed = static_cast<std::uint64_t>(seed);
    if (windows >= 0) spec.windows = windows;
    const SynthResult result = generate_synthetic(spec);
    write_corpus(out_path, result.corpus);
    write_labels(labels_path, result.labels);
    std::cout << "wrote " << result.corpus.size() << " stories to " << out_path
              << " and labels to " << labels_path << "\n";
    return 0;
}

int cmd_train(const std::string& corpus_path, const std::string& config_path,
              const std::string& out_dir, const std::string& alignments_path,
              const std::string& encoder_config_path, int min_count) {
    const TrainConfig cfg = TrainConfig::from_json(read_json_file(config_path));
    const std::vector<CorpusRecord> records = read_corpus(corpus_path);
    const Vocabulary vocab = build_vocab(corpus_texts(records), min_count);
    const std::vector<TrainingExample> corpus = tokenize_corpus(records, vocab);

    EncoderConfig enc_cfg;
    if (!encoder_config_path.empty()) {
        nlohmann::json j = read_json_file(encoder_config_path);
        j["vocab_size"] = vocab.size();
        enc_cfg = EncoderConfig::from_json(j);
    } else {
        enc_cfg.vocab_size = vocab.size();
    }
    enc_cfg.validate();

    std::optional<AlignmentMap> alignments;
    if (!alignments_path.empty()) {
        alignments = alignment_map(read_alignments(alignments_path));
    }

    std::filesystem::create_directories(out_dir);
    TrainStats stats;
    const auto t0 = std::chrono::steady_clock::now();
    train(corpus, cfg, enc_cfg, alignments ? &*alignments : nullptr, &stats,
          [&](int epoch, const Encoder& enc, const AdamW& opt) {
              const auto path = std::filesystem::path(out_dir) /
                                ("checkpoint_epoch" + std::to_string(epoch) + ".nck");
              save_checkpoint(path, build_checkpoint(enc, vocab, opt, cfg.seed, epoch));
              std::cout << "epoch " << epoch << ": wrote " << path.string();
              if (!stats.step_loss.empty()) {
                  std::cout << " (last loss " << stats.step_loss.back() << ")";
              }
              std::cout << "\n";
          });
    write_metrics_csv(std::filesystem::path(out_dir) / "metrics.csv", stats);
    const auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "trained " << stats.step_loss.size() << " steps in " << secs << "s; metrics in "
              << out_dir << "/metrics.csv\n";
    return 0;
}

int cmd_score(const std::string& checkpoint_path, const std::string& corpus_path,
              const std::string& out_csv, const std::string& out_json, int windows,
              const std::string& pooling, bool no_final_slot, bool contextual_summary,
              int threads) {
    const Checkpoint ckpt = load_checkpoint(checkpoint_path);
    const auto [encoder, vocab] = model_from_checkpoint(ckpt);
    const std::vector<CorpusRecord> records = read_corpus(corpus_path);

    SalienceOptions options;
    options.pooling = pooling_from_string(pooling);
    options.shift_include_final_slot = !no_final_slot;
    options.contextual_summary_sentence = contextual_summary;

    std::vector<SalienceReport> reports(records.size());
    std::vector<std::string> skipped;
    std::mutex skip_mutex;
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= records.size()) return;
            const Story story = tokenize_story(records[i].id, records[i].anchor, vocab);
            try {
                if (windows > 0) {
                    const WindowPartition part = make_windows(story.sentence_count(), windows);
                    reports[i] = score_story_windowed(story, part, encoder, options);
                } else {
                    reports[i] = score_story(story, encoder, options);
                }
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(skip_mutex);
                skipped.push_back(records[i].id + ": " + e.what());
                reports[i].story_id.clear();
            }
        }
    };
    std::vector<std::thread> pool;
    const int n_threads = std::max(1, std::min<int>(threads, static_cast<int>(records.size())));
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();

    std::vector<StoryScores> scores;
    nlohmann::json report_array = nlohmann::json::array();
    for (const SalienceReport& r : reports) {
        if (r.story_id.empty()) continue;
        scores.push_back(report_scores(r));
        report_array.push_back(report_to_json(r));
    }
    write_score_csv(out_csv, scores);
    if (!out_json.empty()) {
        std::ofstream out(out_json, std::ios::trunc);
        out << nlohmann::json({{"stories", report_array}}).dump(2) << "\n";
    }
    std::cout << "scored " << scores.size() << " stories";
    if (!skipped.empty()) {
        std::cout << " (" << skipped.size() << " skipped)";
        for (const std::string& s : skipped) std::cerr << "skipped " << s << "\n";
    }
    std::cout << "; wrote " << out_csv << "\n";
    return 0;
}

int cmd_align(const std::string& checkpoint_path, const std::string& corpus_path,
              const std::string& out_path, int windows, int min_twin_window,
              int min_anchor_sentences, int twin_band) {
    const Checkpoint ckpt = load_checkpoint(checkpoint_path);
    const auto [encoder, vocab] = model_from_checkpoint(ckpt);
    const std::vector<CorpusRecord> records = read_corpus(corpus_path);
    TwinFilterConfig filter;
    filter.min_twin_window = min_twin_window;
    filter.min_anchor_sentences = min_anchor_sentences;
    filter.twin_length_band = twin_band;

    std::vector<StoryAlignment> alignments;
    int kept = 0;
    for (const CorpusRecord& rec : records) {
        StoryAlignment a;
        if (!rec.twin) {
            a.id = rec.id;
            a.kept = false;
            a.drop_reason = "record has no twin";
        } else {
            const Story anchor = tokenize_story(rec.id, rec.anchor, vocab);
            const Story twin = tokenize_story(rec.id + "#twin", *rec.twin, vocab);
            a = align_example(anchor, twin, encoder, windows, filter);
        }
        kept += a.kept ? 1 : 0;
        alignments.push_back(std::move(a));
    }
    write_alignments(out_path, alignments);
    std::cout << "aligned " << alignments.size() << " records, kept " << kept << "; wrote "
              << out_path << "\n";
    return 0;
}

int cmd_eval(const std::string& scores_path, const std::string& labels_path,
             const std::string& out_path, int windows, double alpha, int n_perm,
             std::int64_t seed, bool no_baselines) {
    const std::vector<StoryScores> scores = read_score_csv(scores_path);
    const std::vector<SalienceLabels> labels = read_labels(labels_path);
    EvalOptions options;
    options.alpha = alpha;
    options.n_perm = n_perm;
    options.windows = windows;
    options.seed = seed >= 0 ? static_cast<std::uint64_t>(seed) : 0;
    options.include_baselines = !no_baselines;
    const nlohmann::json report = evaluate_corpus(scores, labels, options);
    if (!out_path.empty()) {
        std::ofstream out(out_path, std::ios::trunc);
        out << report.dump(2) << "\n";
    }
    std::cout << render_eval_report(report);
    return 0;
}

int cmd_gen_twins(const std::string& kind, const std::string& endpoint, const std::string& in_path,
                  const std::string& out_path, const std::string& model, double temperature,
                  int retries, int timeout, int concurrency, int backoff_ms) {
    GenClientConfig cfg;
    cfg.endpoint = endpoint;
    cfg.model = model;
    cfg.temperature = temperature;
    cfg.max_retries = retries;
    cfg.timeout_seconds = timeout;
    cfg.concurrency = concurrency;
    cfg.backoff_ms = backoff_ms;
    const GenRunStats stats =
        generate_for_corpus(in_path, out_path, prompt_kind_from_string(kind), cfg);
    std::cout << "generated " << stats.ok << " records (" << stats.failed << " failed, "
              << stats.skipped << " already present); wrote " << out_path << "\n";
    return stats.failed > 0 && stats.ok == 0 ? 1 : 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"narsal: contrastive story embeddings and narrative salience scoring"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic corpus with ground truth");
    std::string synth_spec, synth_out, synth_labels;
    int synth_stories = -1, synth_windows = -1;
    std::int64_t synth_seed = -1;
    synth->add_option("--spec", synth_spec, "synthesis spec JSON file");
    synth->add_option("--out", synth_out, "output corpus JSONL")->required();
    synth->add_option("--labels", synth_labels, "output labels JSONL")->required();
    synth->add_option("--stories", synth_stories, "override story count");
    synth->add_option("--seed", synth_seed, "override seed");
    synth->add_option("--windows", synth_windows, "override window count (0 = short form)");

    // train
    auto* train_cmd = app.add_subcommand("train", "train an encoder on a corpus");
    std::string train_corpus, train_config, train_out, train_alignments, train_encoder;
    int train_min_count = 1;
    train_cmd->add_option("--corpus", train_corpus, "corpus JSONL")->required();
    train_cmd->add_option("--config", train_config, "training config JSON")->required();
    train_cmd->add_option("--out-dir", train_out, "checkpoint/metrics directory")->required();
    train_cmd->add_option("--alignments", train_alignments,
                          "alignment JSONL (window-level narrative twins)");
    train_cmd->add_option("--encoder-config", train_encoder, "encoder config JSON");
    train_cmd->add_option("--min-count", train_min_count, "vocabulary min count");

    // score
    auto* score = app.add_subcommand("score", "score sentence salience with a trained encoder");
    std::string score_ckpt, score_corpus, score_csv, score_json, score_pooling = "mean";
    int score_windows = 0, score_threads = 1;
    bool score_no_final = false, score_contextual = false;
    score->add_option("--checkpoint", score_ckpt, "model checkpoint")->required();
    score->add_option("--corpus", score_corpus, "corpus JSONL (anchors are scored)")->required();
    score->add_option("--out-csv", score_csv, "per-sentence score CSV")->required();
    score->add_option("--out-json", score_json, "salience report JSON");
    score->add_option("--windows", score_windows, "score at window level with W windows");
    score->add_option("--pooling", score_pooling, "mean or cls");
    score->add_flag("--no-final-slot", score_no_final,
                    "exclude the after-last placement from shifting");
    score->add_flag("--contextual-summary", score_contextual,
                    "summarization sentence embeddings from the full-story pass");
    score->add_option("--threads", score_threads, "parallel scoring workers");

    // align
    auto* align = app.add_subcommand("align", "DTW-align twins and project windows");
    std::string align_ckpt, align_corpus, align_out;
    int align_windows = 5, align_min_twin = 3, align_min_anchor = 20, align_band = 14;
    align->add_option("--checkpoint", align_ckpt, "model checkpoint (sentence encoder)")
        ->required();
    align->add_option("--corpus", align_corpus, "corpus JSONL with twins")->required();
    align->add_option("--out", align_out, "alignment JSONL")->required();
    align->add_option("--windows", align_windows, "windows per story");
    align->add_option("--min-twin-window", align_min_twin, "minimum twin window sentences");
    align->add_option("--min-anchor-sentences", align_min_anchor, "anchor length gate");
    align->add_option("--twin-band", align_band, "allowed |twin-anchor| length difference");

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate score files against labels");
    std::string eval_scores, eval_labels, eval_out;
    int eval_windows = 0, eval_nperm = 10000;
    double eval_alpha = 0.05;
    std::int64_t eval_seed = 0;
    bool eval_no_baselines = false;
    eval->add_option("--scores", eval_scores, "score CSV from narsal score")->required();
    eval->add_option("--labels", eval_labels, "labels JSONL")->required();
    eval->add_option("--out", eval_out, "report JSON");
    eval->add_option("--windows", eval_windows, "window-level AUC with W windows");
    eval->add_option("--alpha", eval_alpha, "significance threshold");
    eval->add_option("--n-perm", eval_nperm, "permutation draws");
    eval->add_option("--seed", eval_seed, "permutation/baseline seed");
    eval->add_flag("--no-baselines", eval_no_baselines, "skip baseline rows");

    // gen-twins
    auto* gen = app.add_subcommand("gen-twins", "generate twins or distractors via an LLM endpoint");
    std::string gen_kind, gen_endpoint, gen_in, gen_out, gen_model = "gpt-4.1-mini";
    double gen_temperature = 1.0;
    int gen_retries = 2, gen_timeout = 60, gen_concurrency = 1, gen_backoff = 250;
    gen->add_option("--kind", gen_kind, "verbose, retell, negative or wiki-negative")->required();
    gen->add_option("--endpoint", gen_endpoint, "chat-completions URL")->required();
    gen->add_option("--in", gen_in, "input corpus JSONL")->required();
    gen->add_option("--out", gen_out, "output corpus JSONL")->required();
    gen->add_option("--model", gen_model, "model name");
    gen->add_option("--temperature", gen_temperature, "sampling temperature");
    gen->add_option("--retries", gen_retries, "transport retries per record");
    gen->add_option("--timeout", gen_timeout, "request timeout seconds");
    gen->add_option("--concurrency", gen_concurrency, "parallel requests");
    gen->add_option("--backoff-ms", gen_backoff, "base retry backoff in milliseconds");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            return cmd_synth(synth_spec, synth_out, synth_labels, synth_stories, synth_seed,
                             synth_windows);
        }
        if (train_cmd->parsed()) {
            return cmd_train(train_corpus, train_config, train_out, train_alignments,
                             train_encoder, train_min_count);
        }
        if (score->parsed()) {
            return cmd_score(score_ckpt, score_corpus, score_csv, score_json, score_windows,
                             score_pooling, score_no_final, score_contextual, score_threads);
        }
        if (align->parsed()) {
            return cmd_align(align_ckpt, align_corpus, align_out, align_windows, align_min_twin,
                             align_min_anchor, align_band);
        }
        if (eval->parsed()) {
            return cmd_eval(eval_scores, eval_labels, eval_out, eval_windows, eval_alpha,
                            eval_nperm, eval_seed, eval_no_baselines);
        }
        if (gen->parsed()) {
            return cmd_gen_twins(gen_kind, gen_endpoint, gen_in, gen_out, gen_model,
                                 gen_temperature, gen_retries, gen_timeout, gen_concurrency,
                                 gen_backoff);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

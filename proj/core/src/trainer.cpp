#include "narsal/trainer.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace narsal {

TrainMode train_mode_from_string(const std::string& s) {
    if (s == "narrative-twins") return TrainMode::narrative_twins;
    if (s == "dropout-twins") return TrainMode::dropout_twins;
    if (s == "masked-lm") return TrainMode::masked_lm;
    throw std::invalid_argument("train mode must be one of narrative-twins, dropout-twins, "
                                "masked-lm; got '" +
                                s + "'");
}

std::string train_mode_to_string(TrainMode m) {
    switch (m) {
        case TrainMode::narrative_twins: return "narrative-twins";
        case TrainMode::dropout_twins: return "dropout-twins";
        case TrainMode::masked_lm: return "masked-lm";
    }
    throw std::logic_error("train_mode_to_string: bad enum");
}

void TrainConfig::validate() const {
    if (temperature <= 0.0) {
        throw std::invalid_argument("TrainConfig: temperature must be positive");
    }
    if (batch_size < 1 || epochs < 1) {
        throw std::invalid_argument("TrainConfig: batch_size and epochs must be positive");
    }
    if (learning_rate <= 0.0) {
        throw std::invalid_argument("TrainConfig: learning_rate must be positive");
    }
    if (mlm_mask_rate <= 0.0 || mlm_mask_rate >= 1.0) {
        throw std::invalid_argument("TrainConfig: mlm_mask_rate must lie in (0,1)");
    }
    if (window_count < 1) {
        throw std::invalid_argument("TrainConfig: window_count must be positive");
    }
    if (mode != TrainMode::masked_lm && batch_size < 2 && !use_distractors &&
        !use_in_story_negatives) {
        throw std::invalid_argument(
            "TrainConfig: contrastive training with batch_size 1 needs distractors or "
            "in-story negatives; there is no other negative to contrast against");
    }
}

nlohmann::json TrainConfig::to_json() const {
    return {
        {"mode", train_mode_to_string(mode)},
        {"temperature", temperature},
        {"batch_size", batch_size},
        {"epochs", epochs},
        {"learning_rate", learning_rate},
        {"use_distractors", use_distractors},
        {"use_in_story_negatives", use_in_story_negatives},
        {"window_level", window_level},
        {"seed", seed},
        {"window_count", window_count},
        {"weight_decay", weight_decay},
        {"in_batch_anchors", in_batch_anchors},
        {"shared_distractors", shared_distractors},
        {"mlm_mask_rate", mlm_mask_rate},
    };
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig cfg;
    cfg.mode = train_mode_from_string(j.at("mode").get<std::string>());
    cfg.temperature = j.value("temperature", cfg.temperature);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.use_distractors = j.value("use_distractors", cfg.use_distractors);
    cfg.use_in_story_negatives = j.value("use_in_story_negatives", cfg.use_in_story_negatives);
    cfg.window_level = j.value("window_level", cfg.window_level);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.window_count = j.value("window_count", cfg.window_count);
    cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
    cfg.in_batch_anchors = j.value("in_batch_anchors", cfg.in_batch_anchors);
    cfg.shared_distractors = j.value("shared_distractors", cfg.shared_distractors);
    cfg.mlm_mask_rate = j.value("mlm_mask_rate", cfg.mlm_mask_rate);
    cfg.validate();
    return cfg;
}

namespace {

std::vector<int> story_token_rows(const Story& story) {
    std::vector<int> rows;
    rows.reserve(static_cast<std::size_t>(story.token_count()));
    for (const Span& s : story.spans) {
        for (int r = s.first; r <= s.last; ++r) rows.push_back(r);
    }
    return rows;
}

NodeId pool_story_on(Graph& g, NodeId matrix, const Story& story, Pooling mode) {
    if (mode == Pooling::cls) {
        return g.mean_rows(matrix, {0});
    }
    return g.mean_rows(matrix, story_token_rows(story));
}

NodeId pool_window_on(Graph& g, NodeId matrix, const std::vector<Span>& spans,
                      const WindowBlock& window, const std::string& context) {
    if (window.empty()) {
        throw std::invalid_argument(context + ": empty window");
    }
    return g.mean_rows(matrix, window_token_rows(spans, window));
}

} // namespace

ContrastiveBatch build_story_batch(Graph& g, const Encoder& encoder,
                                   const std::map<std::string, NodeId>& lease,
                                   std::span<const TrainingExample* const> examples,
                                   const TrainConfig& cfg, std::uint64_t epoch,
                                   std::uint64_t step) {
    if (examples.empty()) {
        throw std::invalid_argument("build_story_batch: empty batch");
    }
    const RngState rng(cfg.seed);
    const Pooling pooling = encoder.config().pooling;
    const std::size_t n = examples.size();
    std::vector<NodeId> anchors(n), positives(n), distractors(n, kNoNode);

    for (std::size_t idx = 0; idx < n; ++idx) {
        const TrainingExample& ex = *examples[idx];
        const std::uint64_t slot = static_cast<std::uint64_t>(idx) * 4;
        RngStream anchor_drop = rng.stream("dropout", epoch, step, slot);
        const NodeId a_out =
            encoder.encode_on(g, lease, ex.anchor.token_ids, /*train=*/true, &anchor_drop);
        anchors[idx] = pool_story_on(g, a_out, ex.anchor, pooling);

        RngStream pos_drop = rng.stream("dropout", epoch, step, slot + 1);
        if (cfg.mode == TrainMode::narrative_twins) {
            if (!ex.twin) {
                throw std::invalid_argument("build_story_batch: example '" + ex.anchor.id +
                                            "' has no twin in narrative-twins mode");
            }
            const NodeId t_out =
                encoder.encode_on(g, lease, ex.twin->token_ids, /*train=*/true, &pos_drop);
            positives[idx] = pool_story_on(g, t_out, *ex.twin, pooling);
        } else if (cfg.mode == TrainMode::dropout_twins) {
            const NodeId t_out =
                encoder.encode_on(g, lease, ex.anchor.token_ids, /*train=*/true, &pos_drop);
            positives[idx] = pool_story_on(g, t_out, ex.anchor, pooling);
        } else {
            throw std::invalid_argument("build_story_batch: masked-lm mode has no batches");
        }

        if (cfg.use_distractors && ex.distractor) {
            RngStream dis_drop = rng.stream("dropout", epoch, step, slot + 2);
            const NodeId d_out =
                encoder.encode_on(g, lease, ex.distractor->token_ids, /*train=*/true, &dis_drop);
            distractors[idx] = pool_story_on(g, d_out, *ex.distractor, pooling);
        }
    }

    ContrastiveBatch batch;
    batch.rows.reserve(n);
    for (std::size_t idx = 0; idx < n; ++idx) {
        ContrastiveRow row;
        row.anchor = anchors[idx];
        row.positive = positives[idx];
        row.distractor = distractors[idx];
        for (std::size_t j = 0; j < n; ++j) {
            if (j == idx) continue;
            row.negatives.push_back(positives[j]);
            if (cfg.in_batch_anchors) row.negatives.push_back(anchors[j]);
            if (cfg.shared_distractors && distractors[j] != kNoNode) {
                row.negatives.push_back(distractors[j]);
            }
        }
        batch.rows.push_back(std::move(row));
    }
    batch.validate();
    return batch;
}

ContrastiveBatch build_window_batch(Graph& g, const Encoder& encoder,
                                    const std::map<std::string, NodeId>& lease,
                                    std::span<const TrainingExample* const> examples,
                                    std::span<const StoryAlignment* const> alignments,
                                    const TrainConfig& cfg, std::uint64_t epoch,
                                    std::uint64_t step) {
    if (examples.empty()) {
        throw std::invalid_argument("build_window_batch: empty batch");
    }
    if (cfg.mode == TrainMode::narrative_twins && alignments.size() != examples.size()) {
        throw std::invalid_argument("build_window_batch: alignments must parallel examples");
    }
    const RngState rng(cfg.seed);
    const int W = cfg.window_count;
    const std::size_t n = examples.size();
    // Window embeddings per example: [idx][w].
    std::vector<std::vector<NodeId>> anchors(n), positives(n), distractors(n);

    for (std::size_t idx = 0; idx < n; ++idx) {
        const TrainingExample& ex = *examples[idx];
        const std::string& id = ex.anchor.id;
        const std::uint64_t slot = static_cast<std::uint64_t>(idx) * 4;

        WindowPartition anchor_part;
        WindowPartition pos_part;
        const Story* pos_story = nullptr;
        if (cfg.mode == TrainMode::narrative_twins) {
            if (!ex.twin) {
                throw std::invalid_argument("build_window_batch: example '" + id +
                                            "' has no twin in narrative-twins mode");
            }
            const StoryAlignment* al = alignments[idx];
            if (al == nullptr) {
                throw std::invalid_argument("build_window_batch: example '" + id +
                                            "' has no alignment");
            }
            anchor_part = al->anchor_windows;
            pos_part = al->twin_windows;
            pos_story = &*ex.twin;
            if (anchor_part.window_count() != pos_part.window_count()) {
                throw std::invalid_argument(
                    "build_window_batch: example '" + id + "' has " +
                    std::to_string(anchor_part.window_count()) + " anchor windows vs " +
                    std::to_string(pos_part.window_count()) + " twin windows");
            }
            if (anchor_part.window_count() != W) {
                throw std::invalid_argument("build_window_batch: example '" + id + "' has " +
                                            std::to_string(anchor_part.window_count()) +
                                            " windows, config expects " + std::to_string(W));
            }
        } else if (cfg.mode == TrainMode::dropout_twins) {
            anchor_part = make_windows(ex.anchor.sentence_count(), W);
            pos_part = anchor_part;
            pos_story = &ex.anchor;
        } else {
            throw std::invalid_argument("build_window_batch: masked-lm mode has no batches");
        }

        RngStream anchor_drop = rng.stream("dropout", epoch, step, slot);
        const NodeId a_out =
            encoder.encode_on(g, lease, ex.anchor.token_ids, /*train=*/true, &anchor_drop);
        RngStream pos_drop = rng.stream("dropout", epoch, step, slot + 1);
        const NodeId p_out =
            encoder.encode_on(g, lease, pos_story->token_ids, /*train=*/true, &pos_drop);

        for (int w = 0; w < W; ++w) {
            anchors[idx].push_back(pool_window_on(g, a_out, ex.anchor.spans,
                                                  anchor_part.windows[static_cast<std::size_t>(w)],
                                                  "anchor '" + id + "' window " +
                                                      std::to_string(w)));
            positives[idx].push_back(pool_window_on(
                g, p_out, pos_story->spans, pos_part.windows[static_cast<std::size_t>(w)],
                "positive '" + id + "' window " + std::to_string(w)));
        }

        if (cfg.use_distractors && ex.distractor) {
            const WindowPartition dis_part = make_windows(ex.distractor->sentence_count(), W);
            RngStream dis_drop = rng.stream("dropout", epoch, step, slot + 2);
            const NodeId d_out =
                encoder.encode_on(g, lease, ex.distractor->token_ids, /*train=*/true, &dis_drop);
            for (int w = 0; w < W; ++w) {
                distractors[idx].push_back(
                    pool_window_on(g, d_out, ex.distractor->spans,
                                   dis_part.windows[static_cast<std::size_t>(w)],
                                   "distractor '" + id + "' window " + std::to_string(w)));
            }
        }
    }

    ContrastiveBatch batch;
    batch.rows.reserve(n * static_cast<std::size_t>(W));
    for (std::size_t idx = 0; idx < n; ++idx) {
        for (int w = 0; w < W; ++w) {
            ContrastiveRow row;
            row.anchor = anchors[idx][static_cast<std::size_t>(w)];
            row.positive = positives[idx][static_cast<std::size_t>(w)];
            if (!distractors[idx].empty()) {
                row.distractor = distractors[idx][static_cast<std::size_t>(w)];
            }
            if (cfg.use_in_story_negatives) {
                for (int w2 = 0; w2 < W; ++w2) {
                    if (w2 != w) row.negatives.push_back(positives[idx][static_cast<std::size_t>(w2)]);
                }
            }
            for (std::size_t j = 0; j < n; ++j) {
                if (j == idx) continue;
                for (int w2 = 0; w2 < W; ++w2) {
                    row.negatives.push_back(anchors[j][static_cast<std::size_t>(w2)]);
                    row.negatives.push_back(positives[j][static_cast<std::size_t>(w2)]);
                    if (cfg.shared_distractors && !distractors[j].empty()) {
                        row.negatives.push_back(distractors[j][static_cast<std::size_t>(w2)]);
                    }
                }
            }
            batch.rows.push_back(std::move(row));
        }
    }
    batch.validate();
    return batch;
}

MlmLoss masked_lm_loss(Graph& g, const Encoder& encoder,
                       const std::map<std::string, NodeId>& lease,
                       std::span<const Story* const> stories, double mask_rate,
                       const TrainConfig& cfg, std::uint64_t epoch, std::uint64_t step,
                       bool train) {
    if (stories.empty()) {
        throw std::invalid_argument("masked_lm_loss: empty batch");
    }
    if (mask_rate <= 0.0 || mask_rate >= 1.0) {
        throw std::invalid_argument("masked_lm_loss: mask_rate must lie in (0,1)");
    }
    const RngState rng(cfg.seed);
    const int vocab_size = encoder.config().vocab_size;
    const NodeId emb_t = g.transpose(lease.at("tok_emb"));

    struct StoryLoss {
        NodeId ce;
        int count;
    };
    std::vector<StoryLoss> story_losses;
    MlmLoss result;

    auto encode_masked = [&](const Story& story, std::vector<int> tokens,
                             std::vector<int> positions, std::vector<int> targets,
                             std::uint64_t story_slot) {
        RngStream drop = rng.stream("dropout", epoch, step, story_slot);
        const NodeId h = encoder.encode_on(g, lease, tokens, train, train ? &drop : nullptr);
        const NodeId rows = g.gather_rows(h, std::move(positions));
        const NodeId logits = g.matmul(rows, emb_t);
        const int count = static_cast<int>(targets.size());
        story_losses.push_back({g.cross_entropy_rows(logits, std::move(targets)), count});
        result.masked_positions += count;
        (void)story;
    };

    for (std::size_t si = 0; si < stories.size(); ++si) {
        const Story& story = *stories[si];
        RngStream select = rng.stream("mlm-select", epoch, step, si);
        std::vector<int> tokens = story.token_ids;
        std::vector<int> positions;
        std::vector<int> targets;
        for (int pos = 1; pos < static_cast<int>(tokens.size()); ++pos) {
            if (select.next_unit() >= mask_rate) continue;
            positions.push_back(pos);
            targets.push_back(tokens[static_cast<std::size_t>(pos)]);
            const double action = select.next_unit();
            if (action < 0.8) {
                tokens[static_cast<std::size_t>(pos)] = Vocabulary::kMask;
            } else if (action < 0.9) {
                tokens[static_cast<std::size_t>(pos)] =
                    Vocabulary::kReserved +
                    static_cast<int>(select.next_below(
                        static_cast<std::uint64_t>(vocab_size - Vocabulary::kReserved)));
            } // else: kept as-is
        }
        if (positions.empty()) {
            result.skipped_stories += 1;
            continue;
        }
        encode_masked(story, std::move(tokens), std::move(positions), std::move(targets), si);
    }

    if (story_losses.empty()) {
        // Every story came up empty; mask the first maskable position so the
        // batch still produces a loss.
        for (std::size_t si = 0; si < stories.size(); ++si) {
            const Story& story = *stories[si];
            if (story.token_count() < 1) continue;
            std::vector<int> tokens = story.token_ids;
            const int target = tokens[1];
            tokens[1] = Vocabulary::kMask;
            encode_masked(story, std::move(tokens), {1}, {target}, si);
            result.skipped_stories -= 1;
            break;
        }
        if (story_losses.empty()) {
            throw std::invalid_argument("masked_lm_loss: no maskable token in batch");
        }
    }

    // Mean over all masked positions: weight each story's mean by its share.
    std::vector<NodeId> weighted;
    weighted.reserve(story_losses.size());
    for (const StoryLoss& sl : story_losses) {
        weighted.push_back(
            g.scale(sl.ce, static_cast<double>(sl.count) / result.masked_positions));
    }
    result.loss = g.sum_all(g.stack(weighted));
    return result;
}

std::vector<const Story*> mlm_story_pool(std::span<const TrainingExample> corpus) {
    std::vector<const Story*> pool;
    for (const TrainingExample& ex : corpus) {
        pool.push_back(&ex.anchor);
        if (ex.twin) pool.push_back(&*ex.twin);
        if (ex.distractor) pool.push_back(&*ex.distractor);
    }
    return pool;
}

namespace {

std::vector<std::size_t> shuffled_indices(std::size_t n, RngStream stream) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = stream.next_below(i);
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

} // namespace

Encoder train(const std::vector<TrainingExample>& corpus, const TrainConfig& cfg,
              const EncoderConfig& encoder_cfg, const AlignmentMap* alignments, TrainStats* stats,
              const EpochCallback& per_epoch) {
    cfg.validate();
    encoder_cfg.validate();
    if (corpus.empty()) {
        throw std::invalid_argument("train: empty corpus");
    }

    // Assemble the working set and check mode prerequisites up front.
    std::vector<const TrainingExample*> work;
    std::vector<const StoryAlignment*> work_alignments;
    const bool needs_twins = cfg.mode == TrainMode::narrative_twins;
    for (const TrainingExample& ex : corpus) {
        if (needs_twins && !ex.twin) {
            throw std::invalid_argument("train: example '" + ex.anchor.id +
                                        "' has no twin in narrative-twins mode");
        }
        if (cfg.window_level && needs_twins) {
            if (alignments == nullptr) {
                throw std::invalid_argument(
                    "train: window-level narrative-twins training requires alignments");
            }
            const auto it = alignments->find(ex.anchor.id);
            if (it == alignments->end() || !it->second.kept) {
                continue; // filtered out by the alignment gates
            }
            work_alignments.push_back(&it->second);
        }
        work.push_back(&ex);
    }
    if (work.empty()) {
        throw std::invalid_argument("train: no usable examples after alignment filtering");
    }

    const RngState rng(cfg.seed);
    RngStream init_stream = rng.stream("init");
    Encoder encoder(encoder_cfg, init_stream);
    AdamW opt(AdamWConfig{cfg.learning_rate, 0.9, 0.999, 1e-8, cfg.weight_decay});
    if (per_epoch) per_epoch(0, encoder, opt);

    std::vector<const Story*> mlm_pool;
    if (cfg.mode == TrainMode::masked_lm) {
        mlm_pool = mlm_story_pool(corpus);
    }
    const std::size_t item_count =
        cfg.mode == TrainMode::masked_lm ? mlm_pool.size() : work.size();

    std::uint64_t step = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const std::vector<std::size_t> order =
            shuffled_indices(item_count, rng.stream("shuffle", static_cast<std::uint64_t>(epoch)));
        for (std::size_t begin = 0; begin < item_count;
             begin += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(item_count, begin + static_cast<std::size_t>(cfg.batch_size));
            Graph g;
            const auto lease = encoder.lease(g);
            NodeId loss = kNoNode;
            if (cfg.mode == TrainMode::masked_lm) {
                std::vector<const Story*> batch;
                for (std::size_t i = begin; i < end; ++i) batch.push_back(mlm_pool[order[i]]);
                loss = masked_lm_loss(g, encoder, lease, batch, cfg.mlm_mask_rate, cfg,
                                      static_cast<std::uint64_t>(epoch), step)
                           .loss;
            } else {
                std::vector<const TrainingExample*> batch;
                std::vector<const StoryAlignment*> batch_alignments;
                for (std::size_t i = begin; i < end; ++i) {
                    batch.push_back(work[order[i]]);
                    if (!work_alignments.empty()) {
                        batch_alignments.push_back(work_alignments[order[i]]);
                    } else {
                        batch_alignments.push_back(nullptr);
                    }
                }
                const ContrastiveBatch cb =
                    cfg.window_level
                        ? build_window_batch(g, encoder, lease, batch, batch_alignments, cfg,
                                             static_cast<std::uint64_t>(epoch), step)
                        : build_story_batch(g, encoder, lease, batch, cfg,
                                            static_cast<std::uint64_t>(epoch), step);
                loss = info_nce_loss(g, cb, cfg.temperature);
            }
            const double loss_value = g.value(loss).item();
            g.backward(loss);
            std::map<std::string, Tensor> grads;
            for (const auto& [name, node] : lease) grads.emplace(name, g.grad(node));
            opt.step(encoder.params(), grads);
            if (stats) stats->step_loss.push_back(loss_value);
            step += 1;
        }
        if (per_epoch) per_epoch(epoch, encoder, opt);
    }
    return encoder;
}

void write_metrics_csv(const std::filesystem::path& path, const TrainStats& stats) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path.string());
    }
    out << "step,loss\n";
    out.precision(17);
    for (std::size_t i = 0; i < stats.step_loss.size(); ++i) {
        out << i << "," << stats.step_loss[i] << "\n";
    }
}

} // namespace narsal

#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include <json.hpp>

#include "narsal/adamw.hpp"
#include "narsal/alignment.hpp"
#include "narsal/encoder.hpp"
#include "narsal/info_nce.hpp"
#include "narsal/story.hpp"

namespace narsal {

enum class TrainMode { narrative_twins, dropout_twins, masked_lm };

TrainMode train_mode_from_string(const std::string& s);
std::string train_mode_to_string(TrainMode m);

struct TrainConfig {
    TrainMode mode = TrainMode::narrative_twins;
    double temperature = 0.05;
    int batch_size = 128;
    int epochs = 5;
    double learning_rate = 3e-5;
    bool use_distractors = true;
    bool use_in_story_negatives = false;
    bool window_level = false;
    std::uint64_t seed = 0;

    int window_count = 5;
    double weight_decay = 0.0;
    /// Story level: also use the other examples' anchors as negatives.
    bool in_batch_anchors = false;
    /// Other examples' distractors join the negative pool too.
    bool shared_distractors = false;
    double mlm_mask_rate = 0.15;

    void validate() const;
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

/// Story-level contrastive batch. In dropout-twins mode the positive is a
/// second train-mode encoding of the anchor under an independent dropout
/// stream; in narrative-twins mode every example must carry a twin. Default
/// in-batch negatives are the other examples' positives.
ContrastiveBatch build_story_batch(Graph& g, const Encoder& encoder,
                                   const std::map<std::string, NodeId>& lease,
                                   std::span<const TrainingExample* const> examples,
                                   const TrainConfig& cfg, std::uint64_t epoch,
                                   std::uint64_t step);

/// Window-level batch: one row per (example, window). Positives are the
/// aligned twin windows (or second-encoding windows in dropout mode),
/// in-story negatives are the positive side's other windows, in-batch
/// negatives are every window of the other examples' anchors and positives.
/// Alignments run parallel to examples; entries may be null in dropout mode.
ContrastiveBatch build_window_batch(Graph& g, const Encoder& encoder,
                                    const std::map<std::string, NodeId>& lease,
                                    std::span<const TrainingExample* const> examples,
                                    std::span<const StoryAlignment* const> alignments,
                                    const TrainConfig& cfg, std::uint64_t epoch,
                                    std::uint64_t step);

struct MlmLoss {
    NodeId loss = kNoNode;
    int masked_positions = 0;
    int skipped_stories = 0;
};

/// Masked-LM objective: each non-special token is selected with probability
/// mask_rate (80% MASK / 10% random / 10% kept); cross-entropy over the
/// selected positions through the tied token-embedding projection. A story
/// with no selected position is skipped; if the whole batch comes up empty
/// one position of the first story is forced so the loss stays defined.
MlmLoss masked_lm_loss(Graph& g, const Encoder& encoder,
                       const std::map<std::string, NodeId>& lease,
                       std::span<const Story* const> stories, double mask_rate,
                       const TrainConfig& cfg, std::uint64_t epoch, std::uint64_t step,
                       bool train = true);

/// All stories a masked-LM epoch sees: anchors, twins and distractors.
std::vector<const Story*> mlm_story_pool(std::span<const TrainingExample> corpus);

struct TrainStats {
    std::vector<double> step_loss; // index == optimizer step
};

/// Called with epoch 0 before any step (the untrained snapshot), then after
/// each epoch.
using EpochCallback = std::function<void(int epoch, const Encoder& encoder, const AdamW& opt)>;

/// Full training loop. Deterministic given cfg.seed. Window-level narrative
/// training keeps only examples with a kept alignment. Returns the trained
/// encoder.
Encoder train(const std::vector<TrainingExample>& corpus, const TrainConfig& cfg,
              const EncoderConfig& encoder_cfg, const AlignmentMap* alignments = nullptr,
              TrainStats* stats = nullptr, const EpochCallback& per_epoch = {});

void write_metrics_csv(const std::filesystem::path& path, const TrainStats& stats);

} // namespace narsal

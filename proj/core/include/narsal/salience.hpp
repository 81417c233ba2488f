#pragma once

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "narsal/corpus_io.hpp"
#include "narsal/encoder.hpp"
#include "narsal/story.hpp"

namespace narsal {

enum class SalienceOp { deletion, shifting, disruption, summarization };

struct SalienceOptions {
    /// Pooling for whole-sequence embeddings (window-level scoring always
    /// pools with the mean).
    Pooling pooling = Pooling::mean;
    /// Include the placement after the final sentence among shift targets.
    bool shift_include_final_slot = true;
    /// Take the summarization sentence embedding from the full-story pass
    /// instead of encoding the sentence standalone.
    bool contextual_summary_sentence = false;
};

/// Per-sentence scores, one per operation:
///   deletion       1 - sim(full story, story minus the sentence)
///   shifting       1 - mean over placements of sim(full story, shifted story)
///   disruption     1 - sim(prefix through the sentence, prefix before it)
///   summarization  sim(full story, the sentence on its own)
/// Larger always means more salient.
std::vector<double> score_deletion(const Story& story, const TokenEncoder& encoder,
                                   const SalienceOptions& options = {});
std::vector<double> score_shifting(const Story& story, const TokenEncoder& encoder,
                                   const SalienceOptions& options = {});
std::vector<double> score_disruption(const Story& story, const TokenEncoder& encoder,
                                     const SalienceOptions& options = {});
std::vector<double> score_summarization(const Story& story, const TokenEncoder& encoder,
                                        const SalienceOptions& options = {});

/// Window-level variant of one operation: every comparison happens between
/// mean-pooled window-w token sets of the (possibly modified or truncated)
/// full story. Shift placements stay inside the sentence's window; a
/// disruption prefix with no window tokens yet scores 0.
std::vector<double> score_windowed(const Story& story, const WindowPartition& partition,
                                   const TokenEncoder& encoder, SalienceOp op,
                                   const SalienceOptions& options = {});

/// Average ranks over descending scores; rank 1 is the most salient, ties
/// share the mean of their positions.
std::vector<double> average_ranks_descending(const std::vector<double>& scores);

struct SalienceReport {
    std::string story_id;
    // Indexed by SalienceOp order: deletion, shifting, disruption, summarization.
    std::array<std::vector<double>, 4> scores;
    std::array<std::vector<double>, 4> ranks;
};

SalienceReport score_story(const Story& story, const TokenEncoder& encoder,
                           const SalienceOptions& options = {});
SalienceReport score_story_windowed(const Story& story, const WindowPartition& partition,
                                    const TokenEncoder& encoder,
                                    const SalienceOptions& options = {});

StoryScores report_scores(const SalienceReport& report);
nlohmann::json report_to_json(const SalienceReport& report);

} // namespace narsal

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "narsal/vocab.hpp"

namespace narsal {

/// Inclusive token-index span [first, last] of one sentence within a story's
/// token sequence. Position 0 is always BOS and belongs to no span.
struct Span {
    int first = 0;
    int last = 0;
    int length() const { return last - first + 1; }
};

/// A story: ordered sentences, flat token ids (BOS at index 0), and one span
/// per sentence. Spans are contiguous, non-overlapping, in order, and tile
/// [1, N] exactly.
struct Story {
    std::string id;
    std::vector<std::string> sentences;
    std::vector<int> token_ids;
    std::vector<Span> spans;

    int sentence_count() const { return static_cast<int>(sentences.size()); }
    /// Token count excluding BOS.
    int token_count() const { return static_cast<int>(token_ids.size()) - 1; }
};

struct TrainingExample {
    Story anchor;
    std::optional<Story> twin;
    std::optional<Story> distractor;
};

struct TurningPoint {
    int tp = 0;       // 1..5
    int sentence = 0; // 0-based sentence index
};

struct SalienceLabels {
    std::string story_id;
    std::vector<int> counts; // per-sentence annotator selections
    std::optional<std::vector<TurningPoint>> turning_points;
};

/// Contiguous blocks of sentences tiling a story, identified by inclusive
/// 0-based (start, end) sentence indices per window.
struct WindowBlock {
    int start = 0;
    int end = 0;
    int size() const { return end - start + 1; }
    bool empty() const { return end < start; }
};

struct WindowPartition {
    std::vector<WindowBlock> windows;
    int window_count() const { return static_cast<int>(windows.size()); }
};

/// Throws unless the partition's non-empty windows tile [0, sentence_count)
/// in order with no gaps or overlaps.
void validate_partition(const WindowPartition& partition, int sentence_count);

/// Tokenizes pre-split sentences into a Story. Throws on empty input or on a
/// sentence with no tokens (the message names the offending sentence index).
Story tokenize_story(const std::string& id, const std::vector<std::string>& sentences,
                     const Vocabulary& vocab);

/// True when spans tile [1, N] in order with no gaps.
bool spans_tile_exactly(const Story& story);

// -- derived token sequences for the salience operations --

/// A token sequence derived from a story, with per-sentence spans recomputed
/// and each surviving sentence tagged with its original index.
struct DerivedSequence {
    std::vector<int> token_ids; // BOS at index 0
    std::vector<Span> spans;
    std::vector<int> original_sentence; // spans[i] came from this sentence
};

/// All sentences except `drop` (0-based).
DerivedSequence sequence_without_sentence(const Story& story, int drop);

/// Sentence `move` (0-based) relocated to sit immediately before original
/// sentence `before` (0-based); `before == sentence_count()` appends at the
/// end.
DerivedSequence sequence_with_sentence_moved(const Story& story, int move, int before);

/// Tokens 1..k plus BOS (k == 0 gives the BOS-only sequence). Partial
/// sentences keep their original index.
DerivedSequence sequence_prefix(const Story& story, int k);

/// A single sentence on its own, BOS first.
DerivedSequence sequence_single_sentence(const Story& story, int sentence);

} // namespace narsal

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "narsal/story.hpp"
#include "narsal/vocab.hpp"

namespace narsal {

/// One corpus JSONL record, untokenized:
/// {"id": str, "anchor": [str,...], "twin": [str,...]|null, "distractor": [str,...]|null}
struct CorpusRecord {
    std::string id;
    std::vector<std::string> anchor;
    std::optional<std::vector<std::string>> twin;
    std::optional<std::vector<std::string>> distractor;

    bool operator==(const CorpusRecord&) const = default;
};

std::vector<CorpusRecord> read_corpus(const std::filesystem::path& path);
void write_corpus(const std::filesystem::path& path, const std::vector<CorpusRecord>& records);

/// Labels JSONL:
/// {"id": str, "counts": [int,...], "turning_points": [{"tp": 1..5, "sentence": int}]|null}
std::vector<SalienceLabels> read_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const std::vector<SalienceLabels>& labels);

TrainingExample to_training_example(const CorpusRecord& record, const Vocabulary& vocab);
std::vector<TrainingExample> tokenize_corpus(const std::vector<CorpusRecord>& records,
                                             const Vocabulary& vocab);

/// Per-sentence scores of the four operations for one story. Column order in
/// the CSV is fixed: story_id,sentence_idx,deletion,shifting,disruption,summarization.
struct StoryScores {
    std::string story_id;
    std::vector<double> deletion;
    std::vector<double> shifting;
    std::vector<double> disruption;
    std::vector<double> summarization;

    int sentence_count() const { return static_cast<int>(deletion.size()); }
    const std::vector<double>& operation(int idx) const;
};

inline constexpr const char* kOperationNames[4] = {"deletion", "shifting", "disruption",
                                                   "summarization"};

void write_score_csv(const std::filesystem::path& path, const std::vector<StoryScores>& scores);
std::vector<StoryScores> read_score_csv(const std::filesystem::path& path);

} // namespace narsal

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "narsal/encoder.hpp"
#include "narsal/story.hpp"

namespace narsal {

/// Cosine similarities between anchor sentences (rows) and twin sentences
/// (columns), each encoded standalone.
struct SimilarityMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> values;

    double at(int i, int j) const {
        return values[static_cast<std::size_t>(i) * static_cast<std::size_t>(cols) +
                      static_cast<std::size_t>(j)];
    }
    double& at(int i, int j) {
        return values[static_cast<std::size_t>(i) * static_cast<std::size_t>(cols) +
                      static_cast<std::size_t>(j)];
    }
};

/// Monotonic cell path from (0,0) to (rows-1, cols-1); consecutive steps move
/// by (+1,0), (0,+1) or (+1,+1). Indices are 0-based.
struct AlignmentPath {
    std::vector<std::pair<int, int>> cells;
};

SimilarityMatrix sentence_similarities(const Story& anchor, const Story& twin,
                                       const TokenEncoder& encoder);

/// Path maximizing the summed similarity of visited cells, computed by dynamic
/// programming in O(rows*cols). Backtrace ties prefer the diagonal
/// predecessor, then (i-1,j), then (i,j-1).
AlignmentPath dtw_align(const SimilarityMatrix& sim);

double path_score(const SimilarityMatrix& sim, const AlignmentPath& path);

/// Splits n sentences into `window_count` contiguous blocks; the first
/// (n mod window_count) blocks get the extra sentence. Requires n >= window_count.
WindowPartition make_windows(int sentence_count, int window_count);

/// Twin window w spans the twin sentences aligned to anchor window w. A twin
/// sentence aligned across a boundary goes to the earlier window; a window
/// whose range is consumed entirely by its predecessor comes out empty.
WindowPartition project_windows(const AlignmentPath& path, const WindowPartition& anchor_partition,
                                int twin_sentence_count);

struct TwinFilterConfig {
    int min_twin_window = 3;
    int min_anchor_sentences = 20;
    int twin_length_band = 14; // |twin - anchor| sentences allowed
};

struct StoryAlignment {
    std::string id;
    AlignmentPath path;
    WindowPartition anchor_windows;
    WindowPartition twin_windows;
    bool kept = false;
    std::string drop_reason; // empty when kept
};

/// Full per-example pipeline: similarities, DTW, window projection and the
/// keep/drop gates.
StoryAlignment align_example(const Story& anchor, const Story& twin, const TokenEncoder& encoder,
                             int window_count, const TwinFilterConfig& filter);

/// Applies the filter gates to an already-aligned example.
bool twin_filter_keep(const WindowPartition& twin_windows, int anchor_sentences,
                      int twin_sentences, const TwinFilterConfig& filter, std::string* reason);

void write_alignments(const std::filesystem::path& path,
                      const std::vector<StoryAlignment>& alignments);
std::vector<StoryAlignment> read_alignments(const std::filesystem::path& path);

using AlignmentMap = std::map<std::string, StoryAlignment>;
AlignmentMap alignment_map(const std::vector<StoryAlignment>& alignments);

} // namespace narsal

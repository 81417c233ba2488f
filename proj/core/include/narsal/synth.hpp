#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "narsal/corpus_io.hpp"

namespace narsal {

/// One peak event expressed in several surface variants that share the same
/// content words.
struct PeakTemplate {
    std::vector<std::string> variants;
};

struct TemplateBank {
    std::vector<std::string> setup;
    std::vector<std::string> filler;
    std::vector<PeakTemplate> peak;
    std::vector<std::string> resolution;
    /// Long-form runs stamp one location phrase per story onto every sentence:
    /// a shared setting cue, so a story's windows are surface-similar to each
    /// other and to the twin, and only the peak events tell them apart.
    std::vector<std::string> locations;

    static TemplateBank defaults();
    void validate() const;
};

/// Synthetic-corpus recipe. Short form (windows == 0): each story is one
/// setup, fillers, exactly one peak at a random interior position, and one
/// resolution; the peak index is the ground-truth salient sentence. Long form
/// (windows > 0): windows * window_sentences sentences with one peak per
/// window, recorded as turning points TP1..TPn.
///
/// The twin keeps every peak's content words in a redrawn surface variant at a
/// redrawn position and retells the anchor's minor events in a reshuffled
/// order (short form additionally redraws the opening and ending); the
/// distractor keeps the anchor's non-peak sentences verbatim and swaps each
/// peak for a different peak template. Twins therefore overlap their anchors
/// well beyond the peak, and the distractor is what makes the peak the
/// deciding contrastive signal.
struct SynthSpec {
    int stories = 100;
    int sentences_min = 5;
    int sentences_max = 5;
    int windows = 0;
    int window_sentences = 8;
    std::uint64_t seed = 0;
    TemplateBank templates = TemplateBank::defaults();

    void validate() const;
    nlohmann::json to_json() const;
    static SynthSpec from_json(const nlohmann::json& j);
};

struct SynthResult {
    std::vector<CorpusRecord> corpus;
    std::vector<SalienceLabels> labels;
};

SynthResult generate_synthetic(const SynthSpec& spec);

} // namespace narsal

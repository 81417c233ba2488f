#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "narsal/corpus_io.hpp"
#include "narsal/rng.hpp"
#include "narsal/story.hpp"

namespace narsal {

/// A per-story metric value, or the reason it could not be computed.
struct MetricOutcome {
    std::optional<double> value;
    std::string skip_reason;

    bool valid() const { return value.has_value(); }
};

/// Spearman rank correlation with average ranks for ties: Pearson correlation
/// of the two rank vectors. A constant vector on either side is a skip.
MetricOutcome spearman_rho(const std::vector<double>& pred, const std::vector<double>& human);

/// Pairwise AUC over (relevant, irrelevant) sentence pairs; ties earn 0.5.
/// Needs at least one of each class.
MetricOutcome auc(const std::vector<double>& pred, const std::vector<int>& relevant);

/// Integer pair bookkeeping behind auc(); wins and ties are doubled so the
/// numerator stays integral.
struct AucCounts {
    long long doubled_wins = 0; // 2*wins + ties
    long long pairs = 0;
};
std::optional<AucCounts> auc_counts(const std::vector<double>& pred,
                                    const std::vector<int>& relevant);

/// One window AUC entry: the share of window sentences scored strictly below
/// the labeled sentence.
struct WindowAucEntry {
    int window = 0;
    int tp = 0;
    int window_size = 0;
    double value = 0.0;
};

struct WindowAucResult {
    std::vector<WindowAucEntry> entries;
    int skipped_windows = 0; // windows containing no turning-point label
    int total_windows = 0;
};

WindowAucResult window_auc(const std::vector<double>& pred,
                           const std::vector<TurningPoint>& labels,
                           const WindowPartition& partition);

/// Paired two-tailed sign-flip test on per-story differences. Runs the exact
/// 2^n enumeration whenever that is no more work than n_perm draws; otherwise
/// samples n_perm sign vectors and applies the +1 correction, so p is never 0.
double paired_permutation_test(const std::vector<double>& metric_a,
                               const std::vector<double>& metric_b, int n_perm,
                               std::uint64_t seed);

struct LabelStats {
    double mean_entropy = 0.0;    // bits
    double mean_perplexity = 0.0; // 2^entropy
    int stories = 0;
    int skipped = 0;
};

LabelStats label_stats(const std::vector<SalienceLabels>& labels);

enum class BaselineKind { random, increasing, decreasing };

/// random: iid uniform per sentence from the stream; increasing: 1..n;
/// decreasing: the negated index.
std::vector<double> baseline_scores(int sentence_count, BaselineKind kind,
                                    RngStream* stream = nullptr);

// -- corpus-level aggregation --

struct AggregateMetric {
    double mean = 0.0;
    double stddev = 0.0;
    int included = 0;
    int skipped = 0;
    std::vector<double> per_story; // NaN where skipped; aligned to the label list
};

AggregateMetric aggregate_outcomes(const std::vector<MetricOutcome>& outcomes);

/// Drops pairs where either side is NaN, then runs the permutation test.
double compare_paired(const std::vector<double>& per_story_a,
                      const std::vector<double>& per_story_b, int n_perm, std::uint64_t seed);

struct EvalOptions {
    double alpha = 0.05;
    int n_perm = 10000;
    std::uint64_t seed = 0;
    /// 0 = story-level (Spearman + AUC); >0 = window-level AUC with this many
    /// evenly spaced windows per story.
    int windows = 0;
    bool include_baselines = true;
};

/// Joins scores to labels by story id and evaluates the four operations plus
/// the naive baselines, including pairwise significance. Returns the full
/// machine-readable report.
nlohmann::json evaluate_corpus(const std::vector<StoryScores>& scores,
                               const std::vector<SalienceLabels>& labels,
                               const EvalOptions& options);

/// Plain-text table of an evaluate_corpus report.
std::string render_eval_report(const nlohmann::json& report);

} // namespace narsal

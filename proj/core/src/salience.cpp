#include "narsal/salience.hpp"

#include <algorithm>
#include <stdexcept>

namespace narsal {

namespace {

Tensor pool_sequence(const Tensor& matrix, const DerivedSequence& seq, Pooling mode) {
    if (mode == Pooling::cls || seq.spans.empty()) {
        // BOS-only sequences (empty prefixes) pool to the BOS row.
        return mean_pool_rows(matrix, {0});
    }
    std::vector<int> rows;
    for (const Span& s : seq.spans) {
        for (int r = s.first; r <= s.last; ++r) rows.push_back(r);
    }
    return mean_pool_rows(matrix, rows);
}

Tensor encode_and_pool(const TokenEncoder& encoder, const DerivedSequence& seq, Pooling mode) {
    return pool_sequence(encoder.encode(seq.token_ids), seq, mode);
}

void require_at_least_two_sentences(const Story& story, const char* op) {
    if (story.sentence_count() < 2) {
        throw std::invalid_argument(std::string(op) + ": story '" + story.id +
                                    "' needs at least 2 sentences, has " +
                                    std::to_string(story.sentence_count()));
    }
}

/// Token rows of the variant sequence that originally belonged to window w.
std::vector<int> window_rows_in(const DerivedSequence& seq, const WindowBlock& w) {
    std::vector<int> rows;
    for (std::size_t s = 0; s < seq.spans.size(); ++s) {
        const int orig = seq.original_sentence[s];
        if (orig >= w.start && orig <= w.end) {
            for (int r = seq.spans[s].first; r <= seq.spans[s].last; ++r) rows.push_back(r);
        }
    }
    return rows;
}

DerivedSequence identity_sequence(const Story& story) {
    DerivedSequence seq;
    seq.token_ids = story.token_ids;
    seq.spans = story.spans;
    seq.original_sentence.resize(story.spans.size());
    for (std::size_t s = 0; s < story.spans.size(); ++s) {
        seq.original_sentence[s] = static_cast<int>(s);
    }
    return seq;
}

bool is_identity_order(const DerivedSequence& seq) {
    for (std::size_t s = 0; s < seq.original_sentence.size(); ++s) {
        if (seq.original_sentence[s] != static_cast<int>(s)) return false;
    }
    return true;
}

/// Shift placements for sentence i: before each sentence in [lo, hi] except i
/// itself, optionally the slot after hi; placements reproducing the original
/// order are dropped.
std::vector<DerivedSequence> shift_variants(const Story& story, int i, int lo, int hi,
                                            bool include_final_slot) {
    std::vector<DerivedSequence> variants;
    for (int t = lo; t <= hi; ++t) {
        if (t == i) continue;
        DerivedSequence v = sequence_with_sentence_moved(story, i, t);
        if (!is_identity_order(v)) variants.push_back(std::move(v));
    }
    if (include_final_slot) {
        DerivedSequence v = sequence_with_sentence_moved(story, i, hi + 1);
        if (!is_identity_order(v)) variants.push_back(std::move(v));
    }
    return variants;
}

} // namespace

std::vector<double> score_deletion(const Story& story, const TokenEncoder& encoder,
                                   const SalienceOptions& options) {
    require_at_least_two_sentences(story, "score_deletion");
    const Tensor full =
        pool_story(encoder.encode(story.token_ids), story.spans, options.pooling);
    std::vector<double> scores;
    scores.reserve(static_cast<std::size_t>(story.sentence_count()));
    for (int i = 0; i < story.sentence_count(); ++i) {
        const Tensor variant =
            encode_and_pool(encoder, sequence_without_sentence(story, i), options.pooling);
        scores.push_back(1.0 - cosine_similarity(full, variant));
    }
    return scores;
}

std::vector<double> score_shifting(const Story& story, const TokenEncoder& encoder,
                                   const SalienceOptions& options) {
    require_at_least_two_sentences(story, "score_shifting");
    const Tensor full =
        pool_story(encoder.encode(story.token_ids), story.spans, options.pooling);
    std::vector<double> scores;
    scores.reserve(static_cast<std::size_t>(story.sentence_count()));
    for (int i = 0; i < story.sentence_count(); ++i) {
        const auto variants = shift_variants(story, i, 0, story.sentence_count() - 1,
                                             options.shift_include_final_slot);
        if (variants.empty()) {
            scores.push_back(0.0);
            continue;
        }
        double sum = 0.0;
        for (const DerivedSequence& v : variants) {
            sum += cosine_similarity(full, encode_and_pool(encoder, v, options.pooling));
        }
        scores.push_back(1.0 - sum / static_cast<double>(variants.size()));
    }
    return scores;
}

std::vector<double> score_disruption(const Story& story, const TokenEncoder& encoder,
                                     const SalienceOptions& options) {
    std::vector<double> scores;
    scores.reserve(static_cast<std::size_t>(story.sentence_count()));
    for (int i = 0; i < story.sentence_count(); ++i) {
        const Span& span = story.spans[static_cast<std::size_t>(i)];
        const Tensor through =
            encode_and_pool(encoder, sequence_prefix(story, span.last), options.pooling);
        const Tensor before =
            encode_and_pool(encoder, sequence_prefix(story, span.first - 1), options.pooling);
        scores.push_back(1.0 - cosine_similarity(through, before));
    }
    return scores;
}

std::vector<double> score_summarization(const Story& story, const TokenEncoder& encoder,
                                        const SalienceOptions& options) {
    const Tensor matrix = encoder.encode(story.token_ids);
    const Tensor full = pool_story(matrix, story.spans, options.pooling);
    std::vector<double> scores;
    scores.reserve(static_cast<std::size_t>(story.sentence_count()));
    for (int i = 0; i < story.sentence_count(); ++i) {
        Tensor sentence;
        if (options.contextual_summary_sentence) {
            sentence = pool_span(matrix, story.spans[static_cast<std::size_t>(i)], Pooling::mean);
        } else {
            const DerivedSequence seq = sequence_single_sentence(story, i);
            const Tensor m = encoder.encode(seq.token_ids);
            sentence = options.pooling == Pooling::cls ? mean_pool_rows(m, {0})
                                                       : pool_span(m, seq.spans[0], Pooling::mean);
        }
        scores.push_back(cosine_similarity(full, sentence));
    }
    return scores;
}

std::vector<double> score_windowed(const Story& story, const WindowPartition& partition,
                                   const TokenEncoder& encoder, SalienceOp op,
                                   const SalienceOptions& options) {
    validate_partition(partition, story.sentence_count());
    std::vector<double> scores(static_cast<std::size_t>(story.sentence_count()), 0.0);
    const DerivedSequence identity = identity_sequence(story);
    const Tensor full_matrix = encoder.encode(story.token_ids);

    for (const WindowBlock& w : partition.windows) {
        if (w.empty()) continue;
        const Tensor window_full = mean_pool_rows(full_matrix, window_rows_in(identity, w));
        for (int i = w.start; i <= w.end; ++i) {
            double score = 0.0;
            switch (op) {
                case SalienceOp::deletion: {
                    const DerivedSequence v = sequence_without_sentence(story, i);
                    const Tensor m = encoder.encode(v.token_ids);
                    const auto rows = window_rows_in(v, w);
                    if (rows.empty()) {
                        throw std::invalid_argument("score_windowed: story '" + story.id +
                                                    "': deleting the only sentence of a window");
                    }
                    score = 1.0 - cosine_similarity(window_full, mean_pool_rows(m, rows));
                    break;
                }
                case SalienceOp::shifting: {
                    const auto variants =
                        shift_variants(story, i, w.start, w.end, options.shift_include_final_slot);
                    if (variants.empty()) {
                        score = 0.0;
                        break;
                    }
                    double sum = 0.0;
                    for (const DerivedSequence& v : variants) {
                        const Tensor m = encoder.encode(v.token_ids);
                        sum += cosine_similarity(window_full,
                                                 mean_pool_rows(m, window_rows_in(v, w)));
                    }
                    score = 1.0 - sum / static_cast<double>(variants.size());
                    break;
                }
                case SalienceOp::disruption: {
                    const Span& span = story.spans[static_cast<std::size_t>(i)];
                    const DerivedSequence before = sequence_prefix(story, span.first - 1);
                    const auto before_rows = window_rows_in(before, w);
                    if (before_rows.empty()) {
                        // No earlier window content to compare against.
                        score = 0.0;
                        break;
                    }
                    const DerivedSequence through = sequence_prefix(story, span.last);
                    const Tensor m_through = encoder.encode(through.token_ids);
                    const Tensor m_before = encoder.encode(before.token_ids);
                    score = 1.0 - cosine_similarity(
                                      mean_pool_rows(m_through, window_rows_in(through, w)),
                                      mean_pool_rows(m_before, before_rows));
                    break;
                }
                case SalienceOp::summarization: {
                    const DerivedSequence seq = sequence_single_sentence(story, i);
                    const Tensor m = encoder.encode(seq.token_ids);
                    score = cosine_similarity(window_full,
                                              pool_span(m, seq.spans[0], Pooling::mean));
                    break;
                }
            }
            scores[static_cast<std::size_t>(i)] = score;
        }
    }
    return scores;
}

std::vector<double> average_ranks_descending(const std::vector<double>& scores) {
    const std::size_t n = scores.size();
    std::vector<double> ranks(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        int above = 0, tied = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (scores[j] > scores[i]) above += 1;
            if (scores[j] == scores[i]) tied += 1;
        }
        ranks[i] = above + 0.5 * (tied - 1) + 1.0;
    }
    return ranks;
}

SalienceReport score_story(const Story& story, const TokenEncoder& encoder,
                           const SalienceOptions& options) {
    SalienceReport report;
    report.story_id = story.id;
    report.scores[0] = score_deletion(story, encoder, options);
    report.scores[1] = score_shifting(story, encoder, options);
    report.scores[2] = score_disruption(story, encoder, options);
    report.scores[3] = score_summarization(story, encoder, options);
    for (int op = 0; op < 4; ++op) {
        report.ranks[static_cast<std::size_t>(op)] =
            average_ranks_descending(report.scores[static_cast<std::size_t>(op)]);
    }
    return report;
}

SalienceReport score_story_windowed(const Story& story, const WindowPartition& partition,
                                    const TokenEncoder& encoder,
                                    const SalienceOptions& options) {
    SalienceReport report;
    report.story_id = story.id;
    report.scores[0] = score_windowed(story, partition, encoder, SalienceOp::deletion, options);
    report.scores[1] = score_windowed(story, partition, encoder, SalienceOp::shifting, options);
    report.scores[2] = score_windowed(story, partition, encoder, SalienceOp::disruption, options);
    report.scores[3] =
        score_windowed(story, partition, encoder, SalienceOp::summarization, options);
    for (int op = 0; op < 4; ++op) {
        report.ranks[static_cast<std::size_t>(op)] =
            average_ranks_descending(report.scores[static_cast<std::size_t>(op)]);
    }
    return report;
}

StoryScores report_scores(const SalienceReport& report) {
    return {report.story_id, report.scores[0], report.scores[1], report.scores[2],
            report.scores[3]};
}

nlohmann::json report_to_json(const SalienceReport& report) {
    nlohmann::json ops;
    for (int op = 0; op < 4; ++op) {
        ops[kOperationNames[op]] = {{"scores", report.scores[static_cast<std::size_t>(op)]},
                                    {"ranks", report.ranks[static_cast<std::size_t>(op)]}};
    }
    return {{"id", report.story_id}, {"operations", ops}};
}

} // namespace narsal

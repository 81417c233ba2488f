#include "narsal/story.hpp"

#include <stdexcept>

namespace narsal {

void validate_partition(const WindowPartition& partition, int sentence_count) {
    if (partition.windows.empty()) {
        throw std::invalid_argument("validate_partition: no windows");
    }
    int expected = 0;
    for (std::size_t w = 0; w < partition.windows.size(); ++w) {
        const WindowBlock& b = partition.windows[w];
        if (b.empty()) continue;
        if (b.start != expected) {
            throw std::invalid_argument("validate_partition: window " + std::to_string(w) +
                                        " starts at " + std::to_string(b.start) + ", expected " +
                                        std::to_string(expected));
        }
        expected = b.end + 1;
    }
    if (expected != sentence_count) {
        throw std::invalid_argument("validate_partition: windows cover [0," +
                                    std::to_string(expected) + ") but story has " +
                                    std::to_string(sentence_count) + " sentences");
    }
}

Story tokenize_story(const std::string& id, const std::vector<std::string>& sentences,
                     const Vocabulary& vocab) {
    if (sentences.empty()) {
        throw std::invalid_argument("tokenize_story: story '" + id + "' has no sentences");
    }
    Story story;
    story.id = id;
    story.sentences = sentences;
    story.token_ids.push_back(Vocabulary::kBos);
    for (std::size_t s = 0; s < sentences.size(); ++s) {
        const auto words = word_tokenize(sentences[s]);
        if (words.empty()) {
            throw std::invalid_argument("tokenize_story: story '" + id + "' sentence " +
                                        std::to_string(s) + " is empty after tokenization");
        }
        Span span;
        span.first = static_cast<int>(story.token_ids.size());
        for (const auto& w : words) story.token_ids.push_back(vocab.id(w));
        span.last = static_cast<int>(story.token_ids.size()) - 1;
        story.spans.push_back(span);
    }
    return story;
}

bool spans_tile_exactly(const Story& story) {
    int expected = 1;
    for (const Span& s : story.spans) {
        if (s.first != expected || s.last < s.first) return false;
        expected = s.last + 1;
    }
    return expected == static_cast<int>(story.token_ids.size());
}

namespace {

DerivedSequence from_sentence_order(const Story& story, const std::vector<int>& order) {
    DerivedSequence seq;
    seq.token_ids.push_back(Vocabulary::kBos);
    for (int s : order) {
        const Span& src = story.spans[static_cast<std::size_t>(s)];
        Span dst;
        dst.first = static_cast<int>(seq.token_ids.size());
        for (int t = src.first; t <= src.last; ++t) {
            seq.token_ids.push_back(story.token_ids[static_cast<std::size_t>(t)]);
        }
        dst.last = static_cast<int>(seq.token_ids.size()) - 1;
        seq.spans.push_back(dst);
        seq.original_sentence.push_back(s);
    }
    return seq;
}

void check_sentence_index(const Story& story, int idx, const char* what) {
    if (idx < 0 || idx >= story.sentence_count()) {
        throw std::invalid_argument(std::string(what) + ": sentence index " + std::to_string(idx) +
                                    " out of range for story '" + story.id + "' with " +
                                    std::to_string(story.sentence_count()) + " sentences");
    }
}

} // namespace

DerivedSequence sequence_without_sentence(const Story& story, int drop) {
    check_sentence_index(story, drop, "sequence_without_sentence");
    if (story.sentence_count() < 2) {
        throw std::invalid_argument("sequence_without_sentence: story '" + story.id +
                                    "' has a single sentence; deletion would leave it empty");
    }
    std::vector<int> order;
    for (int s = 0; s < story.sentence_count(); ++s) {
        if (s != drop) order.push_back(s);
    }
    return from_sentence_order(story, order);
}

DerivedSequence sequence_with_sentence_moved(const Story& story, int move, int before) {
    check_sentence_index(story, move, "sequence_with_sentence_moved");
    if (before < 0 || before > story.sentence_count()) {
        throw std::invalid_argument("sequence_with_sentence_moved: insertion slot " +
                                    std::to_string(before) + " out of range");
    }
    std::vector<int> order;
    for (int s = 0; s < story.sentence_count(); ++s) {
        if (s == before) order.push_back(move);
        if (s != move) order.push_back(s);
    }
    if (before == story.sentence_count()) order.push_back(move);
    return from_sentence_order(story, order);
}

DerivedSequence sequence_prefix(const Story& story, int k) {
    if (k < 0 || k > story.token_count()) {
        throw std::invalid_argument("sequence_prefix: k=" + std::to_string(k) +
                                    " out of range for " + std::to_string(story.token_count()) +
                                    " tokens");
    }
    DerivedSequence seq;
    seq.token_ids.assign(story.token_ids.begin(), story.token_ids.begin() + k + 1);
    for (std::size_t s = 0; s < story.spans.size(); ++s) {
        const Span& src = story.spans[s];
        if (src.first > k) break;
        Span dst;
        dst.first = src.first;
        dst.last = std::min(src.last, k);
        seq.spans.push_back(dst);
        seq.original_sentence.push_back(static_cast<int>(s));
    }
    return seq;
}

DerivedSequence sequence_single_sentence(const Story& story, int sentence) {
    check_sentence_index(story, sentence, "sequence_single_sentence");
    return from_sentence_order(story, {sentence});
}

} // namespace narsal

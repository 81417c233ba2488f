#include "narsal/vocab.hpp"

#include <cctype>
#include <stdexcept>

namespace narsal {

Vocabulary::Vocabulary() {
    tokens_ = {"<pad>", "<unk>", "<mask>", "<bos>"};
    for (int i = 0; i < kReserved; ++i) index_.emplace(tokens_[static_cast<std::size_t>(i)], i);
}

int Vocabulary::id(std::string_view token) const {
    const auto it = index_.find(std::string(token));
    return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || id >= size()) {
        throw std::out_of_range("Vocabulary::token: id " + std::to_string(id) +
                                " out of range [0," + std::to_string(size()) + ")");
    }
    return tokens_[static_cast<std::size_t>(id)];
}

int Vocabulary::add(std::string_view token) {
    const auto it = index_.find(std::string(token));
    if (it != index_.end()) return it->second;
    const int new_id = size();
    tokens_.emplace_back(token);
    index_.emplace(tokens_.back(), new_id);
    return new_id;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
    if (tokens.size() < static_cast<std::size_t>(kReserved)) {
        throw std::invalid_argument("Vocabulary::from_tokens: reserved ids missing");
    }
    Vocabulary v;
    for (std::size_t i = static_cast<std::size_t>(kReserved); i < tokens.size(); ++i) {
        v.add(tokens[i]);
    }
    return v;
}

std::vector<std::string> word_tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) {
            out.push_back(current);
            current.clear();
        }
    };
    for (char ch : text) {
        const unsigned char u = static_cast<unsigned char>(ch);
        if (std::isspace(u)) {
            flush();
        } else if (std::ispunct(u)) {
            flush();
            out.emplace_back(1, ch);
        } else {
            current.push_back(static_cast<char>(std::tolower(u)));
        }
    }
    flush();
    return out;
}

Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus_texts, int min_count) {
    if (corpus_texts.empty()) {
        throw std::invalid_argument("build_vocab: empty corpus");
    }
    if (min_count < 1) {
        throw std::invalid_argument("build_vocab: min_count must be >= 1");
    }
    // Two passes: counts first, then insertion in first-occurrence order.
    std::unordered_map<std::string, int> counts;
    for (const auto& sentences : corpus_texts) {
        for (const auto& sentence : sentences) {
            for (auto& tok : word_tokenize(sentence)) counts[tok] += 1;
        }
    }
    Vocabulary vocab;
    for (const auto& sentences : corpus_texts) {
        for (const auto& sentence : sentences) {
            for (auto& tok : word_tokenize(sentence)) {
                if (counts[tok] >= min_count) vocab.add(tok);
            }
        }
    }
    return vocab;
}

} // namespace narsal

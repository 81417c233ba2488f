#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace narsal {

/// Word-level vocabulary with dense ids. Ids 0..3 are reserved for
/// PAD/UNK/MASK/BOS; real tokens follow in first-occurrence order, which makes
/// the assignment deterministic given corpus order.
class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kMask = 2;
    static constexpr int kBos = 3;
    static constexpr int kReserved = 4;

    Vocabulary();

    int size() const { return static_cast<int>(tokens_.size()); }

    /// Id for a token; UNK when absent.
    int id(std::string_view token) const;
    const std::string& token(int id) const;

    /// Appends a token if new; returns its id either way.
    int add(std::string_view token);

    /// Tokens ordered by id, including the four reserved pseudo-tokens.
    const std::vector<std::string>& tokens() const { return tokens_; }

    /// Rebuilds from an id-ordered token list (checkpoint loading).
    static Vocabulary from_tokens(const std::vector<std::string>& tokens);

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

/// Lowercases and splits on whitespace; each ASCII punctuation character
/// becomes its own token.
std::vector<std::string> word_tokenize(std::string_view text);

/// Builds a vocabulary over every text in the corpus stream. Tokens seen fewer
/// than min_count times map to UNK.
Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus_texts, int min_count);

} // namespace narsal

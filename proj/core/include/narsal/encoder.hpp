#pragma once

#include <map>
#include <span>
#include <string>

#include <json.hpp>

#include "narsal/checkpoint.hpp"
#include "narsal/graph.hpp"
#include "narsal/rng.hpp"
#include "narsal/story.hpp"
#include "narsal/tensor.hpp"

namespace narsal {

enum class Pooling { mean, cls };

Pooling pooling_from_string(const std::string& s);
std::string pooling_to_string(Pooling p);

struct EncoderConfig {
    int vocab_size = 0;
    int dim = 64;
    int layers = 2;
    int heads = 4;
    int ff_dim = 128;
    int max_len = 512;
    double dropout = 0.1;
    Pooling pooling = Pooling::mean;

    void validate() const;
    nlohmann::json to_json() const;
    static EncoderConfig from_json(const nlohmann::json& j);
};

/// Anything that can turn a token sequence into contextual token vectors.
/// Salience scoring is written against this so tests can count calls.
class TokenEncoder {
public:
    virtual ~TokenEncoder() = default;
    /// Deterministic (eval-mode) encoding: one d-dim row per input token.
    virtual Tensor encode(std::span<const int> token_ids) const = 0;
    virtual int dim() const = 0;
};

/// Bidirectional transformer over token + learned position embeddings,
/// pre-norm residual blocks, GELU feed-forward. Call counts and RNG use are
/// part of the contract: eval encodes consume no randomness.
class Encoder : public TokenEncoder {
public:
    Encoder(EncoderConfig cfg, RngStream& init_stream);
    Encoder(EncoderConfig cfg, std::map<std::string, Tensor> params);

    const EncoderConfig& config() const { return cfg_; }
    std::map<std::string, Tensor>& params() { return params_; }
    const std::map<std::string, Tensor>& params() const { return params_; }

    int dim() const override { return cfg_.dim; }

    /// Leases every parameter into the graph as a leaf; both dropout twins of
    /// a step must share one lease so gradients accumulate.
    std::map<std::string, NodeId> lease(Graph& g) const;

    /// Builds the forward pass on the graph. In train mode each call draws its
    /// dropout masks from `dropout_stream`.
    NodeId encode_on(Graph& g, const std::map<std::string, NodeId>& lease,
                     std::span<const int> token_ids, bool train,
                     RngStream* dropout_stream) const;

    Tensor encode(std::span<const int> token_ids) const override;

private:
    void check_length(std::size_t n) const;

    EncoderConfig cfg_;
    std::map<std::string, Tensor> params_;
};

// -- pooling over contextual token matrices --

/// Mean of the given rows; rows must be non-empty and in range.
Tensor mean_pool_rows(const Tensor& token_matrix, const std::vector<int>& rows);

/// Mean of rows span.first..span.last, or row 0 (BOS) in cls mode.
Tensor pool_span(const Tensor& token_matrix, Span span, Pooling mode);

/// Whole-story embedding: mean over all sentence tokens (BOS excluded), or the
/// BOS row in cls mode.
Tensor pool_story(const Tensor& token_matrix, const std::vector<Span>& spans, Pooling mode);

/// One mean-pooled vector per window (window w covers the tokens of its
/// sentences). Rejects partitions that do not tile the sentence list.
std::vector<Tensor> pool_windows(const Tensor& token_matrix, const std::vector<Span>& spans,
                                 const WindowPartition& partition);

/// Token row indices of one window given per-sentence spans.
std::vector<int> window_token_rows(const std::vector<Span>& spans, const WindowBlock& window);

/// Cosine similarity of two same-dimension vectors; rejects zero vectors.
double cosine_similarity(const Tensor& u, const Tensor& v);

// -- checkpoint glue --

/// Stores the encoder config, the vocabulary and every parameter under the
/// "model." prefix.
void add_model_to_checkpoint(Checkpoint& ckpt, const Encoder& encoder, const Vocabulary& vocab);

/// Rebuilds encoder and vocabulary from a checkpoint written by
/// add_model_to_checkpoint.
std::pair<Encoder, Vocabulary> model_from_checkpoint(const Checkpoint& ckpt);

} // namespace narsal

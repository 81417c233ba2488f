#include "narsal/encoder.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace narsal {

Pooling pooling_from_string(const std::string& s) {
    if (s == "mean") return Pooling::mean;
    if (s == "cls") return Pooling::cls;
    throw std::invalid_argument("pooling_from_string: unknown mode '" + s + "'");
}

std::string pooling_to_string(Pooling p) {
    return p == Pooling::mean ? "mean" : "cls";
}

void EncoderConfig::validate() const {
    if (vocab_size <= Vocabulary::kReserved) {
        throw std::invalid_argument("EncoderConfig: vocab_size " + std::to_string(vocab_size) +
                                    " too small");
    }
    if (dim <= 0 || heads <= 0 || dim % heads != 0) {
        throw std::invalid_argument("EncoderConfig: dim " + std::to_string(dim) +
                                    " not divisible by heads " + std::to_string(heads));
    }
    if (layers <= 0 || ff_dim <= 0 || max_len <= 1) {
        throw std::invalid_argument("EncoderConfig: non-positive size field");
    }
    if (dropout < 0.0 || dropout >= 1.0) {
        throw std::invalid_argument("EncoderConfig: dropout must be in [0,1)");
    }
}

nlohmann::json EncoderConfig::to_json() const {
    return {
        {"vocab_size", vocab_size}, {"dim", dim},
        {"layers", layers},         {"heads", heads},
        {"ff_dim", ff_dim},         {"max_len", max_len},
        {"dropout", dropout},       {"pooling", pooling_to_string(pooling)},
    };
}

EncoderConfig EncoderConfig::from_json(const nlohmann::json& j) {
    EncoderConfig cfg;
    cfg.vocab_size = j.at("vocab_size").get<int>();
    cfg.dim = j.value("dim", cfg.dim);
    cfg.layers = j.value("layers", cfg.layers);
    cfg.heads = j.value("heads", cfg.heads);
    cfg.ff_dim = j.value("ff_dim", cfg.ff_dim);
    cfg.max_len = j.value("max_len", cfg.max_len);
    cfg.dropout = j.value("dropout", cfg.dropout);
    cfg.pooling = pooling_from_string(j.value("pooling", std::string("mean")));
    cfg.validate();
    return cfg;
}

namespace {

Tensor glorot(int rows, int cols, RngStream& rng) {
    const double limit = std::sqrt(6.0 / (rows + cols));
    Tensor t({rows, cols}, 0.0);
    t.requires_grad = true;
    for (double& v : t.data) v = (2.0 * rng.next_unit() - 1.0) * limit;
    return t;
}

Tensor const_vector(int n, double fill) {
    Tensor t({n}, fill);
    t.requires_grad = true;
    return t;
}

std::string layer_key(int l, const char* suffix) {
    return "layers." + std::to_string(l) + "." + suffix;
}

} // namespace

Encoder::Encoder(EncoderConfig cfg, RngStream& init_stream) : cfg_(cfg) {
    cfg_.validate();
    const int d = cfg_.dim;
    params_.emplace("tok_emb", glorot(cfg_.vocab_size, d, init_stream));
    params_.emplace("pos_emb", glorot(cfg_.max_len, d, init_stream));
    for (int l = 0; l < cfg_.layers; ++l) {
        params_.emplace(layer_key(l, "ln1.gain"), const_vector(d, 1.0));
        params_.emplace(layer_key(l, "ln1.bias"), const_vector(d, 0.0));
        params_.emplace(layer_key(l, "attn.wq"), glorot(d, d, init_stream));
        params_.emplace(layer_key(l, "attn.bq"), const_vector(d, 0.0));
        params_.emplace(layer_key(l, "attn.wk"), glorot(d, d, init_stream));
        params_.emplace(layer_key(l, "attn.bk"), const_vector(d, 0.0));
        params_.emplace(layer_key(l, "attn.wv"), glorot(d, d, init_stream));
        params_.emplace(layer_key(l, "attn.bv"), const_vector(d, 0.0));
        params_.emplace(layer_key(l, "attn.wo"), glorot(d, d, init_stream));
        params_.emplace(layer_key(l, "attn.bo"), const_vector(d, 0.0));
        params_.emplace(layer_key(l, "ln2.gain"), const_vector(d, 1.0));
        params_.emplace(layer_key(l, "ln2.bias"), const_vector(d, 0.0));
        params_.emplace(layer_key(l, "ff.w1"), glorot(d, cfg_.ff_dim, init_stream));
        params_.emplace(layer_key(l, "ff.b1"), const_vector(cfg_.ff_dim, 0.0));
        params_.emplace(layer_key(l, "ff.w2"), glorot(cfg_.ff_dim, d, init_stream));
        params_.emplace(layer_key(l, "ff.b2"), const_vector(d, 0.0));
    }
    params_.emplace("final_ln.gain", const_vector(d, 1.0));
    params_.emplace("final_ln.bias", const_vector(d, 0.0));
}

Encoder::Encoder(EncoderConfig cfg, std::map<std::string, Tensor> params)
    : cfg_(cfg), params_(std::move(params)) {
    cfg_.validate();
    for (auto& [name, t] : params_) t.requires_grad = true;
    // Spot-check that the parameter set matches the config.
    RngStream probe(0, 0);
    Encoder reference(cfg_, probe);
    if (reference.params_.size() != params_.size()) {
        throw std::invalid_argument("Encoder: parameter set size " +
                                    std::to_string(params_.size()) + " does not match config (" +
                                    std::to_string(reference.params_.size()) + " expected)");
    }
    for (const auto& [name, t] : reference.params_) {
        const auto it = params_.find(name);
        if (it == params_.end()) {
            throw std::invalid_argument("Encoder: missing parameter '" + name + "'");
        }
        if (it->second.shape != t.shape) {
            throw std::invalid_argument("Encoder: parameter '" + name + "' has shape " +
                                        shape_str(it->second.shape) + ", expected " +
                                        shape_str(t.shape));
        }
    }
}

void Encoder::check_length(std::size_t n) const {
    if (static_cast<int>(n) > cfg_.max_len) {
        throw std::invalid_argument("Encoder: input of " + std::to_string(n) +
                                    " tokens exceeds max length " + std::to_string(cfg_.max_len));
    }
    if (n == 0) {
        throw std::invalid_argument("Encoder: empty input");
    }
}

std::map<std::string, NodeId> Encoder::lease(Graph& g) const {
    std::map<std::string, NodeId> lease;
    for (const auto& [name, t] : params_) lease.emplace(name, g.leaf(t));
    return lease;
}

NodeId Encoder::encode_on(Graph& g, const std::map<std::string, NodeId>& lease,
                          std::span<const int> token_ids, bool train,
                          RngStream* dropout_stream) const {
    check_length(token_ids.size());
    const int t_len = static_cast<int>(token_ids.size());
    const int d = cfg_.dim;
    const int dh = d / cfg_.heads;
    const double p = cfg_.dropout;
    auto at = [&lease](const std::string& name) {
        const auto it = lease.find(name);
        if (it == lease.end()) {
            throw std::logic_error("Encoder::encode_on: lease missing '" + name + "'");
        }
        return it->second;
    };

    std::vector<int> tok_rows(token_ids.begin(), token_ids.end());
    for (int id : tok_rows) {
        if (id < 0 || id >= cfg_.vocab_size) {
            throw std::invalid_argument("Encoder: token id " + std::to_string(id) +
                                        " outside vocabulary of size " +
                                        std::to_string(cfg_.vocab_size));
        }
    }
    std::vector<int> pos_rows(static_cast<std::size_t>(t_len));
    std::iota(pos_rows.begin(), pos_rows.end(), 0);

    NodeId h = g.add(g.gather_rows(at("tok_emb"), tok_rows), g.gather_rows(at("pos_emb"), pos_rows));
    h = g.dropout(h, p, dropout_stream, train);

    for (int l = 0; l < cfg_.layers; ++l) {
        // attention block
        NodeId x = g.layer_norm_rows(h);
        x = g.add_row_vector(g.mul_row_vector(x, at(layer_key(l, "ln1.gain"))),
                             at(layer_key(l, "ln1.bias")));
        NodeId q = g.add_row_vector(g.matmul(x, at(layer_key(l, "attn.wq"))),
                                    at(layer_key(l, "attn.bq")));
        NodeId k = g.add_row_vector(g.matmul(x, at(layer_key(l, "attn.wk"))),
                                    at(layer_key(l, "attn.bk")));
        NodeId v = g.add_row_vector(g.matmul(x, at(layer_key(l, "attn.wv"))),
                                    at(layer_key(l, "attn.bv")));
        std::vector<NodeId> heads;
        heads.reserve(static_cast<std::size_t>(cfg_.heads));
        for (int hh = 0; hh < cfg_.heads; ++hh) {
            const int c0 = hh * dh, c1 = (hh + 1) * dh;
            NodeId qh = g.slice_cols(q, c0, c1);
            NodeId kh = g.slice_cols(k, c0, c1);
            NodeId vh = g.slice_cols(v, c0, c1);
            NodeId scores = g.scale(g.matmul(qh, g.transpose(kh)), 1.0 / std::sqrt(dh));
            NodeId probs = g.softmax_rows(scores);
            heads.push_back(g.matmul(probs, vh));
        }
        NodeId attn = g.concat_cols(heads);
        attn = g.add_row_vector(g.matmul(attn, at(layer_key(l, "attn.wo"))),
                                at(layer_key(l, "attn.bo")));
        h = g.add(h, g.dropout(attn, p, dropout_stream, train));

        // feed-forward block
        NodeId y = g.layer_norm_rows(h);
        y = g.add_row_vector(g.mul_row_vector(y, at(layer_key(l, "ln2.gain"))),
                             at(layer_key(l, "ln2.bias")));
        NodeId ff = g.add_row_vector(g.matmul(y, at(layer_key(l, "ff.w1"))),
                                     at(layer_key(l, "ff.b1")));
        ff = g.gelu(ff);
        ff = g.add_row_vector(g.matmul(ff, at(layer_key(l, "ff.w2"))), at(layer_key(l, "ff.b2")));
        h = g.add(h, g.dropout(ff, p, dropout_stream, train));
    }

    NodeId out = g.layer_norm_rows(h);
    out = g.add_row_vector(g.mul_row_vector(out, at("final_ln.gain")), at("final_ln.bias"));
    return out;
}

Tensor Encoder::encode(std::span<const int> token_ids) const {
    Graph g(/*recording=*/false);
    const auto lease_map = lease(g);
    const NodeId out = encode_on(g, lease_map, token_ids, /*train=*/false, nullptr);
    return g.value(out);
}

Tensor mean_pool_rows(const Tensor& token_matrix, const std::vector<int>& rows) {
    if (rows.empty()) {
        throw std::invalid_argument("mean_pool_rows: empty row set");
    }
    const int n = token_matrix.cols();
    Tensor out({n}, 0.0);
    for (int r : rows) {
        if (r < 0 || r >= token_matrix.rows()) {
            throw std::invalid_argument("mean_pool_rows: row " + std::to_string(r) +
                                        " out of range for " + shape_str(token_matrix.shape));
        }
        for (int j = 0; j < n; ++j) out.data[static_cast<std::size_t>(j)] += token_matrix.at(r, j);
    }
    const double inv = 1.0 / static_cast<double>(rows.size());
    for (double& v : out.data) v *= inv;
    return out;
}

Tensor pool_span(const Tensor& token_matrix, Span span, Pooling mode) {
    if (mode == Pooling::cls) {
        return mean_pool_rows(token_matrix, {0});
    }
    if (span.first < 1 || span.last < span.first || span.last >= token_matrix.rows()) {
        throw std::invalid_argument("pool_span: invalid span [" + std::to_string(span.first) +
                                    "," + std::to_string(span.last) + "] for " +
                                    shape_str(token_matrix.shape));
    }
    std::vector<int> rows;
    rows.reserve(static_cast<std::size_t>(span.length()));
    for (int r = span.first; r <= span.last; ++r) rows.push_back(r);
    return mean_pool_rows(token_matrix, rows);
}

Tensor pool_story(const Tensor& token_matrix, const std::vector<Span>& spans, Pooling mode) {
    if (mode == Pooling::cls) {
        return mean_pool_rows(token_matrix, {0});
    }
    std::vector<int> rows;
    for (const Span& s : spans) {
        for (int r = s.first; r <= s.last; ++r) rows.push_back(r);
    }
    return mean_pool_rows(token_matrix, rows);
}

std::vector<int> window_token_rows(const std::vector<Span>& spans, const WindowBlock& window) {
    if (window.start < 0 || window.end >= static_cast<int>(spans.size()) || window.empty()) {
        throw std::invalid_argument("window_token_rows: window [" + std::to_string(window.start) +
                                    "," + std::to_string(window.end) + "] out of range for " +
                                    std::to_string(spans.size()) + " sentences");
    }
    std::vector<int> rows;
    for (int s = window.start; s <= window.end; ++s) {
        const Span& sp = spans[static_cast<std::size_t>(s)];
        for (int r = sp.first; r <= sp.last; ++r) rows.push_back(r);
    }
    return rows;
}

std::vector<Tensor> pool_windows(const Tensor& token_matrix, const std::vector<Span>& spans,
                                 const WindowPartition& partition) {
    validate_partition(partition, static_cast<int>(spans.size()));
    std::vector<Tensor> out;
    out.reserve(partition.windows.size());
    for (const WindowBlock& w : partition.windows) {
        out.push_back(mean_pool_rows(token_matrix, window_token_rows(spans, w)));
    }
    return out;
}

void add_model_to_checkpoint(Checkpoint& ckpt, const Encoder& encoder, const Vocabulary& vocab) {
    ckpt.meta["encoder"] = encoder.config().to_json();
    ckpt.meta["vocab"] = vocab.tokens();
    for (const auto& [name, t] : encoder.params()) {
        ckpt.tensors.emplace("model." + name, t);
    }
}

std::pair<Encoder, Vocabulary> model_from_checkpoint(const Checkpoint& ckpt) {
    if (!ckpt.meta.contains("encoder") || !ckpt.meta.contains("vocab")) {
        throw std::runtime_error("checkpoint: missing encoder config or vocabulary");
    }
    const EncoderConfig cfg = EncoderConfig::from_json(ckpt.meta.at("encoder"));
    const Vocabulary vocab =
        Vocabulary::from_tokens(ckpt.meta.at("vocab").get<std::vector<std::string>>());
    if (vocab.size() != cfg.vocab_size) {
        throw std::runtime_error("checkpoint: vocabulary size " + std::to_string(vocab.size()) +
                                 " does not match encoder config " +
                                 std::to_string(cfg.vocab_size));
    }
    std::map<std::string, Tensor> params;
    for (const auto& [name, t] : ckpt.tensors) {
        if (name.starts_with("model.")) {
            params.emplace(name.substr(6), t);
        }
    }
    return {Encoder(cfg, std::move(params)), vocab};
}

double cosine_similarity(const Tensor& u, const Tensor& v) {
    if (u.shape != v.shape || u.rank() != 1) {
        throw std::invalid_argument("cosine_similarity: shapes " + shape_str(u.shape) + " vs " +
                                    shape_str(v.shape));
    }
    double uu = 0.0, vv = 0.0, uv = 0.0;
    for (std::size_t i = 0; i < u.data.size(); ++i) {
        uu += u.data[i] * u.data[i];
        vv += v.data[i] * v.data[i];
        uv += u.data[i] * v.data[i];
    }
    if (uu == 0.0 || vv == 0.0) {
        throw std::invalid_argument("cosine_similarity: zero vector");
    }
    return uv / (std::sqrt(uu) * std::sqrt(vv));
}

} // namespace narsal

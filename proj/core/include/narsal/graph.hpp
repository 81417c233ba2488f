#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "narsal/rng.hpp"
#include "narsal/tensor.hpp"

namespace narsal {

using NodeId = std::int32_t;
inline constexpr NodeId kNoNode = -1;

/// Reverse-mode autodiff tape. Nodes are appended in evaluation order, so a
/// single reverse sweep is a valid topological order. One backward() per graph.
/// With recording off the same ops run forward-only (eval mode).
class Graph {
public:
    explicit Graph(bool recording = true) : recording_(recording) {}

    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    bool recording() const { return recording_; }
    std::size_t node_count() const { return nodes_.size(); }

    /// Valid only until the next op on this graph (node storage may move).
    const Tensor& value(NodeId id) const { return node(id).value; }
    /// Gradient of the last backward()'s loss w.r.t. this node.
    const Tensor& grad(NodeId id) const;

    NodeId leaf(Tensor t);

    // -- elementwise / linear algebra --
    NodeId matmul(NodeId a, NodeId b);
    NodeId transpose(NodeId a);
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId scale(NodeId a, double c);
    NodeId add_row_vector(NodeId a, NodeId v); // v broadcast over rows of a
    NodeId mul_row_vector(NodeId a, NodeId v);

    // -- row-wise nonlinearities --
    NodeId softmax_rows(NodeId a);
    /// (x - mean) / sqrt(var + eps) per row; a constant row maps to zeros.
    NodeId layer_norm_rows(NodeId a, double eps = 1e-5);
    NodeId gelu(NodeId a);
    NodeId tanh_act(NodeId a);

    /// Inverted-scaling dropout: kept entries are scaled by 1/(1-p). When
    /// train is false (or p == 0) this is the identity and the stream is
    /// untouched.
    NodeId dropout(NodeId a, double p, RngStream* stream, bool train);

    // -- gathering / pooling / reshaping --
    NodeId gather_rows(NodeId a, std::vector<int> rows);
    NodeId mean_rows(NodeId a, std::vector<int> rows);
    NodeId slice_cols(NodeId a, int c0, int c1); // [c0, c1)
    NodeId concat_cols(std::span<const NodeId> parts);
    NodeId stack(std::span<const NodeId> scalars);
    NodeId sum_all(NodeId a);
    NodeId mean_all(NodeId a);

    // -- vectors and losses --
    NodeId l2_normalize(NodeId a);
    NodeId dot(NodeId a, NodeId b);
    /// -log softmax(logits)[target] for a rank-1 logits vector.
    NodeId cross_entropy_vec(NodeId logits, int target);
    /// Mean of per-row -log softmax(logits_r)[target_r].
    NodeId cross_entropy_rows(NodeId logits, std::vector<int> targets);

    /// Cosine of two rank-1 vectors, differentiable. Rejects zero vectors.
    NodeId cosine(NodeId a, NodeId b);

    /// Scalar loss only; traversal runs exactly once per graph.
    void backward(NodeId loss);

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        std::function<void(Graph&, NodeId)> back; // second arg: this node's id
    };

    Node& node(NodeId id);
    const Node& node(NodeId id) const;

    NodeId push(Tensor value, bool requires_grad, std::function<void(Graph&, NodeId)> back);
    bool track(NodeId a) const { return recording_ && node(a).requires_grad; }
    Tensor& grad_buf(NodeId id) { return node(id).grad; }

    std::vector<Node> nodes_;
    bool recording_;
    bool backward_done_ = false;
};

} // namespace narsal

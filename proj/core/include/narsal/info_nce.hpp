#pragma once

#include <vector>

#include "narsal/graph.hpp"

namespace narsal {

/// One contrastive comparison: an anchor embedding, its positive, an optional
/// hard distractor, and any further negatives. All entries are graph nodes so
/// the loss stays differentiable end to end.
struct ContrastiveRow {
    NodeId anchor = kNoNode;
    NodeId positive = kNoNode;
    NodeId distractor = kNoNode; // kNoNode when absent
    std::vector<NodeId> negatives;

    std::size_t candidate_count() const {
        return 1 + (distractor != kNoNode ? 1 : 0) + negatives.size();
    }
};

struct ContrastiveBatch {
    std::vector<ContrastiveRow> rows;

    /// Structural checks: nodes present and no row's positive appears among
    /// its own negatives or as its distractor.
    void validate() const;
};

/// Mean over rows of -log( exp(sim(a,pos)/tau) / sum over candidates of
/// exp(sim(a,c)/tau) ), candidates being the positive, the distractor when
/// present, and the negatives. Similarities are cosines.
NodeId info_nce_loss(Graph& g, const ContrastiveBatch& batch, double tau);

} // namespace narsal

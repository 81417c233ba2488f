#include "narsal/info_nce.hpp"

#include <stdexcept>
#include <string>

namespace narsal {

void ContrastiveBatch::validate() const {
    if (rows.empty()) {
        throw std::invalid_argument("ContrastiveBatch: no rows");
    }
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const ContrastiveRow& row = rows[r];
        if (row.anchor == kNoNode || row.positive == kNoNode) {
            throw std::invalid_argument("ContrastiveBatch: row " + std::to_string(r) +
                                        " missing anchor or positive");
        }
        if (row.distractor == row.positive && row.distractor != kNoNode) {
            throw std::invalid_argument("ContrastiveBatch: row " + std::to_string(r) +
                                        " uses its positive as distractor");
        }
        for (NodeId n : row.negatives) {
            if (n == kNoNode) {
                throw std::invalid_argument("ContrastiveBatch: row " + std::to_string(r) +
                                            " has an invalid negative");
            }
            if (n == row.positive) {
                throw std::invalid_argument("ContrastiveBatch: row " + std::to_string(r) +
                                            " lists its own positive among negatives");
            }
        }
    }
}

NodeId info_nce_loss(Graph& g, const ContrastiveBatch& batch, double tau) {
    if (tau <= 0.0) {
        throw std::invalid_argument("info_nce_loss: temperature must be positive, got " +
                                    std::to_string(tau));
    }
    batch.validate();
    std::vector<NodeId> row_losses;
    row_losses.reserve(batch.rows.size());
    for (const ContrastiveRow& row : batch.rows) {
        const NodeId anchor_unit = g.l2_normalize(row.anchor);
        std::vector<NodeId> logits;
        logits.reserve(row.candidate_count());
        auto add_candidate = [&](NodeId cand) {
            logits.push_back(g.scale(g.dot(anchor_unit, g.l2_normalize(cand)), 1.0 / tau));
        };
        add_candidate(row.positive); // target index 0
        if (row.distractor != kNoNode) add_candidate(row.distractor);
        for (NodeId n : row.negatives) add_candidate(n);
        row_losses.push_back(g.cross_entropy_vec(g.stack(logits), 0));
    }
    return g.mean_all(g.stack(row_losses));
}

} // namespace narsal

#pragma once

#include <cstddef>
#include <vector>

#include "trust/graph.hpp"
#include "trust/matrix.hpp"

namespace trust {

/// sim[a][b] = max(0, cos(caption a, caption b)), diagonal pinned to 1.
struct CaptionSimilarity {
  Matrix sim;
};

CaptionSimilarity caption_similarity_matrix(const Matrix& captions);

/// Weak-view and strong-view features of one target batch, already
/// L2-normalised row-wise, plus the temperature.
struct ContrastiveBatch {
  NodeId z;
  NodeId z_bar;
  double tau = 0.1;
  std::size_t size = 0;
};

/// Normalises both feature nodes and packages them. Throws on shape
/// mismatch, B < 2 or tau <= 0.
ContrastiveBatch make_contrastive_batch(Graph& g, NodeId weak_features, NodeId strong_features, double tau);

/// L = -sum_i log( exp(z_i.zbar_i / tau) / sum_{j != i} exp(z_i.z_j / tau) ).
/// The positive is deliberately absent from the denominator.
NodeId hard_contrastive_loss(Graph& g, const ContrastiveBatch& batch);

/// L = -sum_i log( (1/B) sum_p sim[i][p] exp(z_i.zbar_p / tau)
///                 / sum_{j != i} (1 - sim[i][j]) exp(z_i.z_j / tau) ).
/// `sim` is a graph node so its gradient is available to tests. Throws
/// NumericError naming the anchor when its repulsion weights are all zero,
/// i.e. every other caption in the batch matches it exactly.
NodeId soft_contrastive_loss(Graph& g, const ContrastiveBatch& batch, NodeId sim);
NodeId soft_contrastive_loss(Graph& g, const ContrastiveBatch& batch, const CaptionSimilarity& sim);

struct PairWeight {
  double positiveness = 0.0;
  double negativeness = 0.0;
};

/// (sim, 1 - sim) for every ordered pair.
std::vector<std::vector<PairWeight>> pair_weights_report(const CaptionSimilarity& sim);

}  // namespace trust

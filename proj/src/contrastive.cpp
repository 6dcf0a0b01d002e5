#include "trust/contrastive.hpp"

#include <algorithm>
#include <cmath>

#include "trust/error.hpp"

namespace trust {

CaptionSimilarity caption_similarity_matrix(const Matrix& captions) {
  Matrix sim = cosine_similarity(captions, captions);
  for (std::size_t i = 0; i < sim.rows(); ++i) {
    for (std::size_t j = 0; j < sim.cols(); ++j) sim(i, j) = std::clamp(sim(i, j), 0.0, 1.0);
    sim(i, i) = 1.0;
  }
  // Restore exact symmetry lost to summation order in the two triangles.
  for (std::size_t i = 0; i < sim.rows(); ++i)
    for (std::size_t j = i + 1; j < sim.cols(); ++j) sim(j, i) = sim(i, j);
  return {std::move(sim)};
}

ContrastiveBatch make_contrastive_batch(Graph& g, NodeId weak_features, NodeId strong_features, double tau) {
  const Matrix& z = g.value(weak_features);
  const Matrix& zb = g.value(strong_features);
  if (z.rows() != zb.rows() || z.cols() != zb.cols()) {
    throw ShapeError("contrastive batch: weak " + z.shape_string() + " vs strong " + zb.shape_string());
  }
  if (z.rows() < 2) throw ConfigError("contrastive batch needs B >= 2 (no negatives otherwise)");
  if (!(tau > 0.0)) throw ConfigError("contrastive temperature must be positive");
  return {g.l2_normalize_rows(weak_features), g.l2_normalize_rows(strong_features), tau, z.rows()};
}

namespace {

Matrix off_diagonal_ones(std::size_t b) {
  Matrix m(b, b, 1.0);
  for (std::size_t i = 0; i < b; ++i) m(i, i) = 0.0;
  return m;
}

void check_batch(const Graph& g, const ContrastiveBatch& batch) {
  if (batch.size < 2) throw ConfigError("contrastive loss needs B >= 2");
  if (g.value(batch.z).rows() != batch.size || g.value(batch.z_bar).rows() != batch.size) {
    throw ShapeError("contrastive batch size does not match its feature rows");
  }
}

}  // namespace

NodeId hard_contrastive_loss(Graph& g, const ContrastiveBatch& batch) {
  check_batch(g, batch);
  const double inv_tau = 1.0 / batch.tau;
  const NodeId positives = g.scale(g.matmul(batch.z, g.transpose(batch.z_bar)), inv_tau);
  const NodeId negatives = g.scale(g.matmul(batch.z, g.transpose(batch.z)), inv_tau);
  const NodeId log_denominator =
      g.weighted_logsumexp(negatives, g.constant(off_diagonal_ones(batch.size)));
  return g.sub(g.sum(log_denominator), g.sum(g.diag(positives)));
}

NodeId soft_contrastive_loss(Graph& g, const ContrastiveBatch& batch, NodeId sim) {
  check_batch(g, batch);
  const std::size_t b = batch.size;
  const Matrix& s = g.value(sim);
  if (s.rows() != b || s.cols() != b) {
    throw ShapeError("soft contrastive: sim is " + s.shape_string() + ", batch is " + std::to_string(b));
  }
  for (std::size_t i = 0; i < b; ++i) {
    bool has_repulsion = false;
    for (std::size_t j = 0; j < b; ++j) {
      if (j != i && 1.0 - s(i, j) > 0.0) has_repulsion = true;
    }
    if (!has_repulsion) {
      throw NumericError("soft contrastive: anchor " + std::to_string(i) +
                         " has zero repulsion weight; every caption in the batch is identical to it");
    }
  }

  const double inv_tau = 1.0 / batch.tau;
  const NodeId positives = g.scale(g.matmul(batch.z, g.transpose(batch.z_bar)), inv_tau);
  const NodeId negatives = g.scale(g.matmul(batch.z, g.transpose(batch.z)), inv_tau);
  const NodeId repulsion = g.hadamard(g.sub(g.constant(Matrix(b, b, 1.0)), sim),
                                      g.constant(off_diagonal_ones(b)));

  const NodeId log_numerator = g.weighted_logsumexp(positives, sim);
  const NodeId log_denominator = g.weighted_logsumexp(negatives, repulsion);
  // -sum_i [log_num_i - log B - log_den_i]
  const NodeId core = g.sub(g.sum(log_denominator), g.sum(log_numerator));
  const double b_log_b = static_cast<double>(b) * std::log(static_cast<double>(b));
  return g.add(core, g.constant(Matrix::scalar(b_log_b)));
}

NodeId soft_contrastive_loss(Graph& g, const ContrastiveBatch& batch, const CaptionSimilarity& sim) {
  return soft_contrastive_loss(g, batch, g.constant(sim.sim));
}

std::vector<std::vector<PairWeight>> pair_weights_report(const CaptionSimilarity& sim) {
  const Matrix& s = sim.sim;
  std::vector<std::vector<PairWeight>> out(s.rows(), std::vector<PairWeight>(s.cols()));
  for (std::size_t i = 0; i < s.rows(); ++i)
    for (std::size_t j = 0; j < s.cols(); ++j) out[i][j] = {s(i, j), 1.0 - s(i, j)};
  return out;
}

}  // namespace trust

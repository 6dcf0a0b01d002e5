#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>

#include "trust/graph.hpp"
#include "trust/matrix.hpp"

namespace trust {

/// Feature extractor f (D_in -> hidden, tanh, -> P) followed by a linear
/// classifier h (P -> C). Weights act on row-vector batches: x * W + b.
struct VisionModel {
  Matrix w1, b1;  // D_in x H, 1 x H
  Matrix w2, b2;  // H x P,    1 x P
  Matrix wh, bh;  // P x C,    1 x C

  /// Gaussian init with std 1/sqrt(fan_in), zero biases.
  static VisionModel init(std::size_t input_dim, std::size_t hidden, std::size_t feature_dim,
                          std::size_t classes, std::uint64_t seed);

  std::size_t input_dim() const noexcept { return w1.rows(); }
  std::size_t hidden_dim() const noexcept { return w1.cols(); }
  std::size_t feature_dim() const noexcept { return w2.cols(); }
  std::size_t num_classes() const noexcept { return wh.cols(); }

  std::array<Matrix*, 6> parameters() { return {&w1, &b1, &w2, &b2, &wh, &bh}; }
  std::array<const Matrix*, 6> parameters() const { return {&w1, &b1, &w2, &b2, &wh, &bh}; }

  /// Plain forward passes (no graph), used at evaluation time.
  Matrix features(const Matrix& x) const;
  Matrix logits(const Matrix& x) const;

  friend bool operator==(const VisionModel&, const VisionModel&) = default;
};

/// Parameter leaves of a VisionModel registered on a Graph.
struct BoundModel {
  NodeId w1, b1, w2, b2, wh, bh;

  std::array<NodeId, 6> parameters() const { return {w1, b1, w2, b2, wh, bh}; }
};

BoundModel bind(Graph& g, const VisionModel& model);
NodeId extract_features(Graph& g, const BoundModel& m, NodeId x);
NodeId classify(Graph& g, const BoundModel& m, NodeId features);

/// Checkpoint directory: manifest.json plus one embedding-format file per
/// parameter (float32, so a reload is exact only up to quantisation).
void save_model(const VisionModel& model, const std::filesystem::path& dir);
VisionModel load_model(const std::filesystem::path& dir);

}  // namespace trust

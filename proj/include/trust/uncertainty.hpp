#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "trust/dataset.hpp"
#include "trust/matrix.hpp"

namespace trust {

/// B x B matrix, entry (i, j) = gamma * cos(image i, caption j).
struct SimilarityMatrix {
  Matrix values;
};

/// Per-sample pseudo-label reliability in (0, 1): the diagonal of the
/// row-softmaxed image/caption similarity matrix of the sample's scoring batch.
struct ReliabilityWeights {
  std::vector<double> w;
  std::vector<std::size_t> scoring_batch_id;

  std::size_t size() const noexcept { return w.size(); }
  friend bool operator==(const ReliabilityWeights&, const ReliabilityWeights&) = default;
};

SimilarityMatrix clip_similarity(const Matrix& clip_img, const Matrix& clip_txt, double gamma);

ReliabilityWeights reliability_weights(const SimilarityMatrix& s);

struct ScoringOptions {
  std::size_t batch_size = 64;
  double gamma = 10.0;
  std::uint64_t seed = 0;
};

/// Scores every target sample once. The seeded permutation is cut into
/// batches of `batch_size`; a short final batch is topped up with samples
/// borrowed from the start of the permutation, which act as context only
/// (they keep the weight from their own batch).
ReliabilityWeights score_dataset(const EmbeddingDataset& target, const ScoringOptions& options);

inline constexpr std::size_t kHistogramBins = 50;

struct WeightHistogram {
  std::array<std::size_t, kHistogramBins> clean{};
  std::array<std::size_t, kHistogramBins> corrupted{};
  /// Probability that a clean sample outranks a corrupted one (ties count
  /// half). Empty when either group has no members.
  std::optional<double> auroc;
};

/// Throws ConfigError when the mask is missing or its length differs.
WeightHistogram weight_histogram(const ReliabilityWeights& w,
                                 const std::optional<std::vector<std::uint8_t>>& corrupted_mask);

/// Mann-Whitney AUROC of `positive` scores against `negative` scores.
double auroc(std::span<const double> positive, std::span<const double> negative);

}  // namespace trust

#include "trust/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "trust/error.hpp"
#include "trust/random.hpp"

namespace trust {

SimilarityMatrix clip_similarity(const Matrix& clip_img, const Matrix& clip_txt, double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("similarity scale gamma must be positive");
  if (clip_img.rows() != clip_txt.rows()) {
    throw ShapeError("clip_similarity: " + std::to_string(clip_img.rows()) + " images vs " +
                     std::to_string(clip_txt.rows()) + " captions");
  }
  Matrix s = cosine_similarity(clip_img, clip_txt);
  for (double& v : s.data()) v *= gamma;
  require_finite(s, "clip_similarity");
  return {std::move(s)};
}

ReliabilityWeights reliability_weights(const SimilarityMatrix& s) {
  const Matrix& v = s.values;
  if (v.rows() != v.cols()) throw ShapeError("reliability_weights: non-square " + v.shape_string());
  require_finite(v, "reliability_weights input");
  const Matrix p = row_softmax(v);
  ReliabilityWeights out;
  out.w.resize(v.rows());
  out.scoring_batch_id.assign(v.rows(), 0);
  for (std::size_t i = 0; i < v.rows(); ++i) out.w[i] = p(i, i);
  return out;
}

ReliabilityWeights score_dataset(const EmbeddingDataset& target, const ScoringOptions& options) {
  const std::size_t n = target.size();
  const std::size_t b = options.batch_size;
  if (b < 2) throw ConfigError("scoring batch size must be >= 2");
  if (n < b) {
    throw ConfigError("target set of " + std::to_string(n) + " samples is smaller than scoring batch " +
                      std::to_string(b));
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(options.seed, {0x5C0E}));
  std::shuffle(order.begin(), order.end(), rng);

  ReliabilityWeights out;
  out.w.assign(n, 0.0);
  out.scoring_batch_id.assign(n, 0);

  const std::size_t batches = (n + b - 1) / b;
  for (std::size_t batch = 0; batch < batches; ++batch) {
    const std::size_t start = batch * b;
    const std::size_t owned = std::min(b, n - start);
    std::vector<std::size_t> members(order.begin() + static_cast<std::ptrdiff_t>(start),
                                     order.begin() + static_cast<std::ptrdiff_t>(start + owned));
    for (std::size_t k = 0; members.size() < b; ++k) members.push_back(order[k]);

    const SimilarityMatrix s = clip_similarity(gather_rows(target.clip_img, members),
                                               gather_rows(target.clip_txt, members), options.gamma);
    const ReliabilityWeights local = reliability_weights(s);
    for (std::size_t i = 0; i < owned; ++i) {
      out.w[members[i]] = local.w[i];
      out.scoring_batch_id[members[i]] = batch;
    }
  }
  return out;
}

double auroc(std::span<const double> positive, std::span<const double> negative) {
  if (positive.empty() || negative.empty()) throw ConfigError("auroc: both groups must be non-empty");
  struct Scored {
    double score;
    bool positive;
  };
  std::vector<Scored> all;
  all.reserve(positive.size() + negative.size());
  for (double s : positive) all.push_back({s, true});
  for (double s : negative) all.push_back({s, false});
  std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) { return a.score < b.score; });

  // Rank-sum with mid-ranks for ties.
  double positive_rank_sum = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].score == all[i].score) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (all[k].positive) positive_rank_sum += mid_rank;
    i = j;
  }
  const double np = static_cast<double>(positive.size());
  const double nn = static_cast<double>(negative.size());
  return (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

WeightHistogram weight_histogram(const ReliabilityWeights& w,
                                 const std::optional<std::vector<std::uint8_t>>& corrupted_mask) {
  if (!corrupted_mask) throw ConfigError("weight_histogram: dataset has no corrupted mask");
  const auto& mask = *corrupted_mask;
  if (mask.size() != w.size()) {
    throw ConfigError("weight_histogram: mask length " + std::to_string(mask.size()) + " vs " +
                      std::to_string(w.size()) + " weights");
  }
  WeightHistogram h;
  std::vector<double> clean, corrupted;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double v = std::clamp(w.w[i], 0.0, 1.0);
    const auto bin = std::min(static_cast<std::size_t>(v * kHistogramBins), kHistogramBins - 1);
    if (mask[i]) {
      ++h.corrupted[bin];
      corrupted.push_back(w.w[i]);
    } else {
      ++h.clean[bin];
      clean.push_back(w.w[i]);
    }
  }
  if (!clean.empty() && !corrupted.empty()) h.auroc = auroc(clean, corrupted);
  return h;
}

}  // namespace trust

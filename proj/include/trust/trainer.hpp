#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trust/augment.hpp"
#include "trust/batching.hpp"
#include "trust/dataset.hpp"
#include "trust/graph.hpp"
#include "trust/model.hpp"
#include "trust/pseudolabel.hpp"
#include "trust/uncertainty.hpp"

namespace trust {

/// How the per-anchor contrastive terms enter the total objective. kSum adds
/// the batch sum as-is; kMean divides it by B, putting it on the same
/// per-sample footing as the mean cross-entropy terms.
enum class ContrastiveReduction { kMean, kSum };

struct TrainConfig {
  std::size_t batch_size = 16;
  std::size_t epochs = 40;
  double lr = 0.05;
  double tau = 0.1;
  double gamma = 10.0;
  std::size_t scoring_batch_size = 64;
  AugmentationConfig augmentation;
  std::uint64_t seed = 0;
  bool use_soft_ctr = true;
  bool use_hard_ctr = false;
  bool use_uncertainty = true;
  ContrastiveReduction ctr_reduction = ContrastiveReduction::kMean;
  std::size_t hidden = 64;
  std::size_t feature_dim = 32;
  // Caption classifier that produces the pseudo-labels.
  std::size_t text_epochs = 200;
  double text_lr = 0.5;

  void validate() const;
};

/// Source minibatch: raw image embeddings and ground-truth labels.
struct SourceBatch {
  Matrix x;
  std::vector<int> labels;
};

/// Target minibatch: raw image embeddings, pseudo-labels, reliability weights
/// and the caption similarity among its members. No ground truth.
struct TargetBatch {
  Matrix x;
  std::vector<int> pseudo_labels;
  std::vector<double> weights;
  Matrix caption_sim;
};

SourceBatch make_source_batch(const EmbeddingDataset& source, const IndexBatch& idx);
TargetBatch make_target_batch(const EmbeddingDataset& target, const PseudoLabels& pseudo,
                              const ReliabilityWeights& w, const IndexBatch& idx);

/// Mean cross-entropy of `logits` against hard labels.
NodeId cross_entropy(Graph& g, NodeId logits, std::span<const int> labels);

/// Mean cross-entropy of h(f(weak view)) against the source labels.
NodeId source_cls_loss(Graph& g, const BoundModel& m, const SourceBatch& batch,
                       const AugmentationConfig& aug, std::uint64_t seed);

/// Features and logits of the weak and strong views of a target batch.
struct TargetViews {
  NodeId weak_features;
  NodeId strong_features;
  NodeId weak_logits;
  NodeId strong_logits;
};

TargetViews target_views(Graph& g, const BoundModel& m, const Matrix& x, const AugmentationConfig& aug,
                         std::uint64_t weak_seed, std::uint64_t strong_seed);

/// mean_i [ w_i CE(weak_i, pseudo_i) + (1 - w_i) CE(weak_i, teacher_i) ]
/// where `teacher` holds per-row class distributions. The caller decides
/// whether the teacher carries gradient.
NodeId reweighted_target_loss(Graph& g, NodeId weak_logits, NodeId teacher, std::span<const int> pseudo,
                              std::span<const double> weights);

/// Reliability-weighted target loss with the gradient-stopped strong-view
/// prediction as soft target.
NodeId target_cls_loss(Graph& g, const BoundModel& m, const TargetBatch& batch, const AugmentationConfig& aug,
                       std::uint64_t weak_seed, std::uint64_t strong_seed);

struct StepSeeds {
  std::uint64_t source_weak = 0;
  std::uint64_t target_weak = 0;
  std::uint64_t target_strong = 0;
};

struct LossTerms {
  NodeId total;
  NodeId source;
  NodeId target;
  std::optional<NodeId> contrastive;
};

/// Unweighted sum source + target + contrastive. The contrastive term follows
/// the toggles and is reduced per config.ctr_reduction (`contrastive` holds
/// the reduced node); with use_uncertainty off every reliability weight is 1.
/// `frozen_teacher`, when given, replaces the strong-view teacher with a
/// constant (used to check the non-stopped gradient paths).
LossTerms total_loss(Graph& g, const BoundModel& m, const SourceBatch& source, const TargetBatch& target,
                     const TrainConfig& config, const StepSeeds& seeds,
                     const Matrix* frozen_teacher = nullptr);

struct EpochMetrics {
  std::size_t epoch = 0;
  double source_loss = 0.0;
  double target_loss = 0.0;
  double contrastive_loss = 0.0;
  std::optional<double> target_accuracy;

  friend bool operator==(const EpochMetrics&, const EpochMetrics&) = default;
};

struct TrainReport {
  TrainConfig config;
  std::optional<double> initial_target_accuracy;
  std::vector<EpochMetrics> epochs;
  std::optional<double> final_target_accuracy;
  std::optional<double> pseudo_label_accuracy;
  double wall_clock_seconds = 0.0;
};

struct TrainResult {
  VisionModel model;
  TrainReport report;
};

/// SGD over paired source/target minibatches; the shorter loader cycles.
/// Target labels, if present, are read only through evaluate().
TrainResult train(const EmbeddingDataset& source, const EmbeddingDataset& target, const PseudoLabels& pseudo,
                  const ReliabilityWeights& weights, const TrainConfig& config);

/// Pseudo-label and reliability precomputation bundled for a target set.
struct TargetSupervision {
  PseudoLabels pseudo;
  ReliabilityWeights weights;
};

/// Caption classifier -> pseudo-labels -> CLIP reliability, in that order.
TargetSupervision prepare_target_supervision(const EmbeddingDataset& source, const EmbeddingDataset& target,
                                             const TrainConfig& config);

/// prepare_target_supervision followed by train().
TrainResult train_pipeline(const EmbeddingDataset& source, const EmbeddingDataset& target,
                           const TrainConfig& config);

/// Accuracy of argmax h(f(x)) on clean inputs. Throws ConfigError if the
/// dataset carries no labels.
double evaluate(const VisionModel& model, const EmbeddingDataset& dataset);

struct AblationRow {
  std::string name;
  bool hard_ctr = false;
  bool soft_ctr = false;
  bool uncertainty = false;
  double target_accuracy = 0.0;
};

struct AblationTable {
  TrainConfig base_config;
  std::optional<double> pseudo_label_accuracy;
  std::vector<AblationRow> rows;
};

/// The five component combinations (none, hard, soft, uncertainty,
/// soft + uncertainty) trained from the same seed and supervision.
AblationTable ablate(const EmbeddingDataset& source, const EmbeddingDataset& target, const TrainConfig& base);

}  // namespace trust

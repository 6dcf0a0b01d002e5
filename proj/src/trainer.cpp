#include "trust/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "trust/contrastive.hpp"
#include "trust/error.hpp"
#include "trust/random.hpp"

namespace trust {

namespace {

enum SeedTag : std::uint64_t {
  kModelInit = 11,
  kSourceOrder,
  kTargetOrder,
  kSourceWeak,
  kTargetWeak,
  kTargetStrong,
};

Matrix one_hot(std::span<const int> labels, std::size_t classes) {
  Matrix y(labels.size(), classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw ConfigError("label " + std::to_string(labels[i]) + " outside [0, " + std::to_string(classes) + ")");
    }
    y(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  return y;
}

std::size_t checked_dim(const Matrix& x, const BoundModel& m, const Graph& g) {
  const std::size_t d = g.value(m.w1).rows();
  if (x.cols() != d) {
    throw ShapeError("input dim " + std::to_string(x.cols()) + " does not match model input dim " +
                     std::to_string(d));
  }
  return d;
}

}  // namespace

void TrainConfig::validate() const {
  if (use_soft_ctr && use_hard_ctr) throw ConfigError("conflicting toggles: soft and hard contrastive both on");
  if (batch_size < 2) throw ConfigError("batch size must be >= 2");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be positive");
  if (!(tau > 0.0)) throw ConfigError("temperature must be positive");
  if (!(gamma > 0.0)) throw ConfigError("similarity scale gamma must be positive");
  if (scoring_batch_size < 2) throw ConfigError("scoring batch size must be >= 2");
  if (hidden == 0 || feature_dim == 0) throw ConfigError("model widths must be positive");
  if (!(text_lr > 0.0)) throw ConfigError("text classifier learning rate must be positive");
  augmentation.validate();
}

SourceBatch make_source_batch(const EmbeddingDataset& source, const IndexBatch& idx) {
  if (!source.labels) throw ConfigError("source batch requires labels");
  SourceBatch b;
  b.x = gather_rows(source.image_emb, idx);
  b.labels.reserve(idx.size());
  for (std::size_t i : idx) b.labels.push_back((*source.labels)[i]);
  return b;
}

TargetBatch make_target_batch(const EmbeddingDataset& target, const PseudoLabels& pseudo,
                              const ReliabilityWeights& w, const IndexBatch& idx) {
  if (pseudo.labels.size() != target.size()) {
    throw ShapeError("pseudo-labels cover " + std::to_string(pseudo.labels.size()) + " of " +
                     std::to_string(target.size()) + " target samples");
  }
  if (w.size() != target.size()) {
    throw ShapeError("reliability weights cover " + std::to_string(w.size()) + " of " +
                     std::to_string(target.size()) + " target samples");
  }
  TargetBatch b;
  b.x = gather_rows(target.image_emb, idx);
  for (std::size_t i : idx) {
    b.pseudo_labels.push_back(pseudo.labels[i]);
    b.weights.push_back(w.w[i]);
  }
  b.caption_sim = caption_similarity_matrix(gather_rows(target.caption_emb, idx)).sim;
  return b;
}

NodeId cross_entropy(Graph& g, NodeId logits, std::span<const int> labels) {
  const Matrix& z = g.value(logits);
  if (labels.size() != z.rows()) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(z.rows()) + " rows");
  }
  const NodeId y = g.constant(one_hot(labels, z.cols()));
  return g.scale(g.sum(g.hadamard(y, g.log_softmax(logits))), -1.0 / static_cast<double>(z.rows()));
}

NodeId source_cls_loss(Graph& g, const BoundModel& m, const SourceBatch& batch, const AugmentationConfig& aug,
                       std::uint64_t seed) {
  if (batch.labels.size() != batch.x.rows()) throw ConfigError("source batch is missing labels");
  checked_dim(batch.x, m, g);
  const NodeId x = g.constant(augment(batch.x, AugmentKind::kWeak, aug, seed));
  return cross_entropy(g, classify(g, m, extract_features(g, m, x)), batch.labels);
}

TargetViews target_views(Graph& g, const BoundModel& m, const Matrix& x, const AugmentationConfig& aug,
                         std::uint64_t weak_seed, std::uint64_t strong_seed) {
  checked_dim(x, m, g);
  TargetViews v;
  v.weak_features = extract_features(g, m, g.constant(augment(x, AugmentKind::kWeak, aug, weak_seed)));
  v.strong_features = extract_features(g, m, g.constant(augment(x, AugmentKind::kStrong, aug, strong_seed)));
  v.weak_logits = classify(g, m, v.weak_features);
  v.strong_logits = classify(g, m, v.strong_features);
  return v;
}

NodeId reweighted_target_loss(Graph& g, NodeId weak_logits, NodeId teacher, std::span<const int> pseudo,
                              std::span<const double> weights) {
  const Matrix& z = g.value(weak_logits);
  const std::size_t b = z.rows();
  const std::size_t c = z.cols();
  if (pseudo.size() != b) throw ConfigError("target loss: pseudo-labels missing for part of the batch");
  if (weights.size() != b) throw ConfigError("target loss: reliability weights missing for part of the batch");
  const Matrix& t = g.value(teacher);
  if (t.rows() != b || t.cols() != c) {
    throw ShapeError("target loss: teacher " + t.shape_string() + " vs logits " + z.shape_string());
  }

  Matrix hard_part = one_hot(pseudo, c);
  Matrix soft_scale(b, c);
  for (std::size_t i = 0; i < b; ++i) {
    const double w = weights[i];
    if (!(w >= 0.0 && w <= 1.0)) throw ConfigError("target loss: reliability weight outside [0, 1]");
    for (std::size_t j = 0; j < c; ++j) {
      hard_part(i, j) *= w;
      soft_scale(i, j) = 1.0 - w;
    }
  }
  const NodeId mixed_target = g.add(g.constant(std::move(hard_part)), g.hadamard(g.constant(soft_scale), teacher));
  return g.scale(g.sum(g.hadamard(mixed_target, g.log_softmax(weak_logits))), -1.0 / static_cast<double>(b));
}

NodeId target_cls_loss(Graph& g, const BoundModel& m, const TargetBatch& batch, const AugmentationConfig& aug,
                       std::uint64_t weak_seed, std::uint64_t strong_seed) {
  const TargetViews v = target_views(g, m, batch.x, aug, weak_seed, strong_seed);
  const NodeId teacher = g.stop_gradient(g.row_softmax(v.strong_logits));
  return reweighted_target_loss(g, v.weak_logits, teacher, batch.pseudo_labels, batch.weights);
}

LossTerms total_loss(Graph& g, const BoundModel& m, const SourceBatch& source, const TargetBatch& target,
                     const TrainConfig& config, const StepSeeds& seeds, const Matrix* frozen_teacher) {
  config.validate();
  LossTerms terms;
  terms.source = source_cls_loss(g, m, source, config.augmentation, seeds.source_weak);

  const TargetViews v =
      target_views(g, m, target.x, config.augmentation, seeds.target_weak, seeds.target_strong);
  const NodeId teacher = frozen_teacher ? g.constant(*frozen_teacher)
                                        : g.stop_gradient(g.row_softmax(v.strong_logits));
  const std::vector<double> ones(target.weights.size(), 1.0);
  terms.target = reweighted_target_loss(g, v.weak_logits, teacher, target.pseudo_labels,
                                        config.use_uncertainty ? target.weights : ones);

  terms.total = g.add(terms.source, terms.target);
  if (config.use_soft_ctr || config.use_hard_ctr) {
    const ContrastiveBatch cb = make_contrastive_batch(g, v.weak_features, v.strong_features, config.tau);
    terms.contrastive = config.use_soft_ctr ? soft_contrastive_loss(g, cb, CaptionSimilarity{target.caption_sim})
                                            : hard_contrastive_loss(g, cb);
    if (config.ctr_reduction == ContrastiveReduction::kMean) {
      terms.contrastive = g.scale(*terms.contrastive, 1.0 / static_cast<double>(cb.size));
    }
    terms.total = g.add(terms.total, *terms.contrastive);
  }
  return terms;
}

double evaluate(const VisionModel& model, const EmbeddingDataset& dataset) {
  if (!dataset.labels) throw ConfigError("evaluate: dataset has no labels");
  if (dataset.size() == 0) throw ConfigError("evaluate: empty dataset");
  return pseudo_label_accuracy(row_argmax(model.logits(dataset.image_emb)), *dataset.labels);
}

TrainResult train(const EmbeddingDataset& source, const EmbeddingDataset& target, const PseudoLabels& pseudo,
                  const ReliabilityWeights& weights, const TrainConfig& config) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  if (!source.labels) throw ConfigError("train: source dataset must be labelled");
  if (source.image_emb.cols() != target.image_emb.cols()) {
    throw ShapeError("train: source image dim " + std::to_string(source.image_emb.cols()) +
                     " vs target image dim " + std::to_string(target.image_emb.cols()));
  }
  if (source.num_classes != target.num_classes) {
    throw ShapeError("train: source has " + std::to_string(source.num_classes) + " classes, target " +
                     std::to_string(target.num_classes));
  }
  if (pseudo.labels.size() != target.size() || weights.size() != target.size()) {
    throw ShapeError("train: pseudo-labels / weights do not cover the target set");
  }

  TrainResult result;
  result.report.config = config;
  result.model = VisionModel::init(source.image_emb.cols(), config.hidden, config.feature_dim,
                                   source.num_classes, derive_seed(config.seed, {kModelInit}));

  const bool has_target_truth = target.labels.has_value();
  if (has_target_truth) result.report.initial_target_accuracy = evaluate(result.model, target);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto source_batches = batch_iter(source, config.batch_size, derive_seed(config.seed, {kSourceOrder}), epoch);
    const auto target_batches = batch_iter(target, config.batch_size, derive_seed(config.seed, {kTargetOrder}), epoch);
    const std::size_t steps = std::max(source_batches.size(), target_batches.size());

    EpochMetrics metrics;
    metrics.epoch = epoch;
    for (std::size_t step = 0; step < steps; ++step) {
      const SourceBatch sb = make_source_batch(source, source_batches[step % source_batches.size()]);
      const TargetBatch tb = make_target_batch(target, pseudo, weights, target_batches[step % target_batches.size()]);
      const StepSeeds seeds{derive_seed(config.seed, {kSourceWeak, epoch, step}),
                            derive_seed(config.seed, {kTargetWeak, epoch, step}),
                            derive_seed(config.seed, {kTargetStrong, epoch, step})};

      Graph g;
      const BoundModel bound = bind(g, result.model);
      try {
        const LossTerms terms = total_loss(g, bound, sb, tb, config, seeds);
        g.backward(terms.total);
        metrics.source_loss += g.value(terms.source).item();
        metrics.target_loss += g.value(terms.target).item();
        if (terms.contrastive) metrics.contrastive_loss += g.value(*terms.contrastive).item();
      } catch (const NumericError& e) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(step) + ": " + e.what());
      }

      auto params = result.model.parameters();
      const auto ids = bound.parameters();
      for (std::size_t k = 0; k < params.size(); ++k) {
        auto dst = params[k]->data();
        auto grad = g.grad(ids[k]).data();
        for (std::size_t q = 0; q < dst.size(); ++q) dst[q] -= config.lr * grad[q];
      }
    }
    const double denom = static_cast<double>(steps);
    metrics.source_loss /= denom;
    metrics.target_loss /= denom;
    metrics.contrastive_loss /= denom;
    if (has_target_truth) metrics.target_accuracy = evaluate(result.model, target);
    result.report.epochs.push_back(metrics);
  }

  result.report.final_target_accuracy =
      result.report.epochs.empty() ? result.report.initial_target_accuracy : result.report.epochs.back().target_accuracy;
  result.report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

TargetSupervision prepare_target_supervision(const EmbeddingDataset& source, const EmbeddingDataset& target,
                                             const TrainConfig& config) {
  config.validate();
  const TextClassifier clf =
      train_text_classifier(source, TextClassifierOptions{config.text_epochs, config.text_lr, config.seed});
  TargetSupervision sup;
  sup.pseudo = generate_pseudo_labels(clf, target);
  sup.weights = score_dataset(target, ScoringOptions{config.scoring_batch_size, config.gamma, config.seed});
  return sup;
}

TrainResult train_pipeline(const EmbeddingDataset& source, const EmbeddingDataset& target,
                           const TrainConfig& config) {
  const TargetSupervision sup = prepare_target_supervision(source, target, config);
  TrainResult result = train(source, target, sup.pseudo, sup.weights, config);
  if (target.labels) result.report.pseudo_label_accuracy = pseudo_label_accuracy(sup.pseudo.labels, *target.labels);
  return result;
}

AblationTable ablate(const EmbeddingDataset& source, const EmbeddingDataset& target, const TrainConfig& base) {
  if (!target.labels) throw ConfigError("ablate: target ground truth is required to score the rows");
  TrainConfig probe = base;
  probe.use_soft_ctr = probe.use_hard_ctr = false;
  const TargetSupervision sup = prepare_target_supervision(source, target, probe);

  AblationTable table;
  table.base_config = base;
  table.pseudo_label_accuracy = pseudo_label_accuracy(sup.pseudo.labels, *target.labels);

  const AblationRow layout[] = {
      {"none", false, false, false},
      {"hard_ctr", true, false, false},
      {"soft_ctr", false, true, false},
      {"uncertainty", false, false, true},
      {"soft_ctr+uncertainty", false, true, true},
  };
  for (AblationRow row : layout) {
    TrainConfig cfg = base;
    cfg.use_hard_ctr = row.hard_ctr;
    cfg.use_soft_ctr = row.soft_ctr;
    cfg.use_uncertainty = row.uncertainty;
    const TrainResult r = train(source, target, sup.pseudo, sup.weights, cfg);
    row.target_accuracy = r.report.final_target_accuracy.value_or(0.0);
    table.rows.push_back(row);
  }
  return table;
}

}  // namespace trust

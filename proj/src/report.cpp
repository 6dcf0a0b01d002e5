#include "trust/report.hpp"

namespace trust {

using nlohmann::json;

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

json to_json(const AugmentationConfig& c) {
  return {{"sigma_weak", c.sigma_weak}, {"sigma_strong", c.sigma_strong}, {"dropout_strong", c.dropout_strong}};
}

json to_json(const SynthConfig& c) {
  return {{"classes", c.classes},         {"n_per_class", c.n_per_class},   {"dim_image", c.dim_image},
          {"dim_caption", c.dim_caption}, {"dim_clip", c.dim_clip},         {"shift_angle", c.shift_angle},
          {"shift_offset", c.shift_offset}, {"noise_img", c.noise_img},     {"noise_txt", c.noise_txt},
          {"noise_clip", c.noise_clip},   {"rho", c.rho},                   {"seed", c.seed}};
}

json to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"lr", c.lr},
          {"tau", c.tau},
          {"gamma", c.gamma},
          {"scoring_batch_size", c.scoring_batch_size},
          {"augmentation", to_json(c.augmentation)},
          {"seed", c.seed},
          {"use_soft_ctr", c.use_soft_ctr},
          {"use_hard_ctr", c.use_hard_ctr},
          {"use_uncertainty", c.use_uncertainty},
          {"ctr_reduction", c.ctr_reduction == ContrastiveReduction::kMean ? "mean" : "sum"},
          {"hidden", c.hidden},
          {"feature_dim", c.feature_dim},
          {"text_epochs", c.text_epochs},
          {"text_lr", c.text_lr}};
}

json to_json(const TrainReport& r) {
  json epochs = json::array();
  for (const auto& e : r.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"source_loss", e.source_loss},
                      {"target_loss", e.target_loss},
                      {"contrastive_loss", e.contrastive_loss},
                      {"target_accuracy", optional_number(e.target_accuracy)}});
  }
  return {{"config", to_json(r.config)},
          {"initial_target_accuracy", optional_number(r.initial_target_accuracy)},
          {"pseudo_label_accuracy", optional_number(r.pseudo_label_accuracy)},
          {"epochs", epochs},
          {"final_target_accuracy", optional_number(r.final_target_accuracy)}};
}

json to_json(const AblationTable& t) {
  json rows = json::array();
  for (const auto& r : t.rows) {
    rows.push_back({{"name", r.name},
                    {"hard_ctr", r.hard_ctr},
                    {"soft_ctr", r.soft_ctr},
                    {"uncertainty", r.uncertainty},
                    {"target_accuracy", r.target_accuracy}});
  }
  return {{"config", to_json(t.base_config)},
          {"pseudo_label_accuracy", optional_number(t.pseudo_label_accuracy)},
          {"rows", rows}};
}

json to_json(const WeightHistogram& h) {
  json edges = json::array();
  for (std::size_t k = 0; k <= kHistogramBins; ++k) edges.push_back(static_cast<double>(k) / kHistogramBins);
  return {{"bins", kHistogramBins},
          {"edges", edges},
          {"clean", h.clean},
          {"corrupted", h.corrupted},
          {"auroc", optional_number(h.auroc)}};
}

}  // namespace trust

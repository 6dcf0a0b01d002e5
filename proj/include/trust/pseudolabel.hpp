#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "trust/dataset.hpp"
#include "trust/matrix.hpp"

namespace trust {

/// Linear softmax head over frozen caption embeddings.
struct TextClassifier {
  Matrix weight;  // C x D_txt
  Matrix bias;    // 1 x C

  std::size_t num_classes() const noexcept { return weight.rows(); }
  std::size_t input_dim() const noexcept { return weight.cols(); }
  /// N x C logits for the given caption embeddings.
  Matrix logits(const Matrix& captions) const;

  friend bool operator==(const TextClassifier&, const TextClassifier&) = default;
};

struct TextClassifierOptions {
  std::size_t epochs = 200;
  double lr = 0.5;
  std::uint64_t seed = 0;
};

/// Full-batch gradient descent on mean cross-entropy of (caption_emb, labels),
/// starting from zero parameters. The class count is inferred from the labels
/// and every class in [0, C) must be present. If `loss_history` is non-null it
/// receives the loss before each update and after the last one (epochs + 1
/// entries).
TextClassifier train_text_classifier(const EmbeddingDataset& source, const TextClassifierOptions& options,
                                     std::vector<double>* loss_history = nullptr);

struct PseudoLabels {
  std::vector<int> labels;  // row-argmax of logits
  Matrix logits;            // N x C
};

PseudoLabels generate_pseudo_labels(const TextClassifier& clf, const EmbeddingDataset& target);

/// Fraction of exact matches. Throws ShapeError on length mismatch.
double pseudo_label_accuracy(const std::vector<int>& predicted, const std::vector<int>& truth);

}  // namespace trust

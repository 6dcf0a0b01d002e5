#include "trust/pseudolabel.hpp"

#include <algorithm>
#include <set>

#include "trust/error.hpp"
#include "trust/graph.hpp"

namespace trust {

Matrix TextClassifier::logits(const Matrix& captions) const {
  if (captions.cols() != input_dim()) {
    throw ShapeError("text classifier expects caption dim " + std::to_string(input_dim()) + ", got " +
                     std::to_string(captions.cols()));
  }
  Matrix out = matmul(captions, transpose(weight));
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += bias(0, j);
  return out;
}

namespace {

std::size_t infer_classes(const std::vector<int>& labels) {
  if (labels.empty()) throw ConfigError("text classifier: empty source dataset");
  const std::set<int> present(labels.begin(), labels.end());
  const int max_label = *present.rbegin();
  if (*present.begin() < 0) throw ConfigError("text classifier: negative label");
  if (present.size() < 2) throw ConfigError("text classifier: source labels cover a single class");
  if (present.size() != static_cast<std::size_t>(max_label) + 1) {
    for (int c = 0; c <= max_label; ++c) {
      if (!present.contains(c)) {
        throw ConfigError("text classifier: class " + std::to_string(c) + " missing from source labels");
      }
    }
  }
  return present.size();
}

}  // namespace

TextClassifier train_text_classifier(const EmbeddingDataset& source, const TextClassifierOptions& options,
                                     std::vector<double>* loss_history) {
  if (!source.labels) throw ConfigError("text classifier: source dataset has no labels");
  const std::vector<int>& labels = *source.labels;
  const std::size_t classes = infer_classes(labels);
  const std::size_t n = source.size();

  Matrix onehot(n, classes);
  for (std::size_t i = 0; i < n; ++i) onehot(i, static_cast<std::size_t>(labels[i])) = 1.0;

  TextClassifier clf{Matrix(classes, source.caption_emb.cols()), Matrix(1, classes)};
  if (loss_history) loss_history->clear();

  // The objective is convex and the parameters start at zero, so the seed has
  // nothing to randomise; it is accepted for interface symmetry.
  for (std::size_t epoch = 0; epoch <= options.epochs; ++epoch) {
    Graph g;
    const NodeId x = g.constant(source.caption_emb);
    const NodeId w = g.leaf(clf.weight);
    const NodeId b = g.leaf(clf.bias);
    const NodeId logits = g.add(g.matmul(x, g.transpose(w)), b);
    const NodeId ce = g.scale(g.sum(g.hadamard(g.constant(onehot), g.log_softmax(logits))),
                              -1.0 / static_cast<double>(n));
    if (loss_history) loss_history->push_back(g.value(ce).item());
    if (epoch == options.epochs) break;
    g.backward(ce);
    for (std::size_t k = 0; k < clf.weight.size(); ++k) clf.weight.data()[k] -= options.lr * g.grad(w).data()[k];
    for (std::size_t k = 0; k < clf.bias.size(); ++k) clf.bias.data()[k] -= options.lr * g.grad(b).data()[k];
  }
  return clf;
}

PseudoLabels generate_pseudo_labels(const TextClassifier& clf, const EmbeddingDataset& target) {
  PseudoLabels out;
  out.logits = clf.logits(target.caption_emb);
  out.labels = row_argmax(out.logits);
  return out;
}

double pseudo_label_accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size()) {
    throw ShapeError("accuracy: " + std::to_string(predicted.size()) + " predictions vs " +
                     std::to_string(truth.size()) + " labels");
  }
  if (truth.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

}  // namespace trust

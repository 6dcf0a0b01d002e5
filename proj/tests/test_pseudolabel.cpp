#include <cmath>

#include "doctest.h"
#include "support.hpp"
#include "trust/error.hpp"
#include "trust/pseudolabel.hpp"
#include "trust/synth.hpp"

using namespace trust;

namespace {

EmbeddingDataset captions_only(Matrix captions, std::vector<int> labels, std::size_t classes) {
  EmbeddingDataset ds;
  ds.num_classes = classes;
  const std::size_t n = captions.rows();
  ds.image_emb = Matrix(n, 1);
  ds.clip_img = Matrix(n, 1);
  ds.clip_txt = Matrix(n, 1);
  ds.caption_emb = std::move(captions);
  ds.labels = std::move(labels);
  return ds;
}

}  // namespace

TEST_CASE("caption classifier separates clean classes") {
  SynthConfig cfg;
  cfg.classes = 2;
  const DomainPair p = gen_synthetic(cfg);
  std::vector<double> history;
  const TextClassifier clf = train_text_classifier(p.source, {}, &history);
  CHECK(history.size() == 201);
  CHECK(history.front() == doctest::Approx(std::log(2.0)));
  CHECK(history.back() < history.front());
  const PseudoLabels pl = generate_pseudo_labels(clf, p.source);
  CHECK(pseudo_label_accuracy(pl.labels, *p.source.labels) >= 0.99);
}

TEST_CASE("zero epochs leaves a zero classifier") {
  const EmbeddingDataset ds = captions_only(Matrix{{1, 0}, {0, 1}, {1, 1}}, {0, 1, 2}, 3);
  const TextClassifier clf = train_text_classifier(ds, {0, 0.5, 0});
  CHECK(clf.weight == Matrix(3, 2));
  CHECK(clf.bias == Matrix(1, 3));
  const PseudoLabels pl = generate_pseudo_labels(clf, ds);
  CHECK(pl.labels == std::vector<int>{0, 0, 0});
  CHECK(row_softmax(pl.logits)(1, 2) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("classifier input errors") {
  CHECK_THROWS(train_text_classifier(captions_only(Matrix{{1}, {2}}, {0, 2}, 3), {}));
  CHECK_THROWS(train_text_classifier(captions_only(Matrix{{1}, {2}}, {0, 0}, 1), {}));
  EmbeddingDataset unlabeled = captions_only(Matrix{{1}, {2}}, {0, 1}, 2);
  unlabeled.labels.reset();
  CHECK_THROWS_AS(train_text_classifier(unlabeled, {}), ConfigError);

  const TextClassifier clf{Matrix(2, 3), Matrix(1, 2)};
  CHECK_THROWS_AS(generate_pseudo_labels(clf, captions_only(Matrix{{1, 2}}, {0}, 2)), ShapeError);
}

TEST_CASE("pseudo-labels are the logit argmax") {
  const TextClassifier clf{Matrix::identity(3), Matrix(1, 3)};
  const EmbeddingDataset ds = captions_only(Matrix{{0.1, 0.9, 0.3}, {0.5, 0.5, 0.0}}, {1, 0}, 3);
  const PseudoLabels pl = generate_pseudo_labels(clf, ds);
  CHECK(pl.labels == std::vector<int>{1, 0});
  CHECK(pl.logits == ds.caption_emb);
}

TEST_CASE("pseudo-label accuracy") {
  CHECK(pseudo_label_accuracy({1, 2, 3}, {1, 2, 3}) == 1.0);
  CHECK(pseudo_label_accuracy({1, 2}, {0, 0}) == 0.0);
  CHECK(pseudo_label_accuracy({1, 2, 3, 4}, {1, 0, 3, 0}) == 0.5);
  CHECK_THROWS_AS(pseudo_label_accuracy({1}, {1, 2}), ShapeError);
}

TEST_CASE("synthetic target pseudo-labels track the clean caption rate") {
  const DomainPair p = gen_synthetic(SynthConfig{});
  const TextClassifier clf = train_text_classifier(p.source, {});
  const PseudoLabels pl = generate_pseudo_labels(clf, p.target);
  const double acc = pseudo_label_accuracy(pl.labels, *p.target.labels);
  std::size_t corrupted = 0;
  for (auto b : *p.target.corrupted_mask) corrupted += b;
  const double clean_rate = 1.0 - static_cast<double>(corrupted) / static_cast<double>(p.target.size());
  CHECK(std::abs(acc - clean_rate) <= 0.05);
  CHECK(std::abs(acc - 0.7) <= 0.05);

  CHECK(train_text_classifier(p.source, {}) == clf);
}

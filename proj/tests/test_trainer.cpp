#include <cmath>

#include "doctest.h"
#include "support.hpp"
#include "trust/contrastive.hpp"
#include "trust/error.hpp"
#include "trust/format.hpp"
#include "trust/gradcheck.hpp"
#include "trust/synth.hpp"
#include "trust/trainer.hpp"

using namespace trust;
using trust::testing::random_matrix;
using trust::testing::TempDir;

namespace {

struct Fixture {
  VisionModel model = VisionModel::init(6, 5, 8, 3, 1);
  SourceBatch source{random_matrix(4, 6, 2), {0, 1, 2, 1}};
  TargetBatch target{random_matrix(4, 6, 3), {2, 0, 1, 1}, {0.9, 0.2, 0.6, 0.35},
                     caption_similarity_matrix(random_matrix(4, 5, 4)).sim};
  StepSeeds seeds{5, 6, 7};
};

double entropy_of_rows(const Matrix& logits) {
  const Matrix p = row_softmax(logits);
  double h = 0.0;
  for (double v : p.data()) h -= v * std::log(v);
  return h / static_cast<double>(logits.rows());
}

SynthConfig small_synth() {
  SynthConfig cfg;
  cfg.classes = 3;
  cfg.n_per_class = 12;
  cfg.dim_image = 8;
  cfg.dim_caption = 6;
  cfg.dim_clip = 6;
  return cfg;
}

TrainConfig small_train() {
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.epochs = 3;
  cfg.hidden = 6;
  cfg.feature_dim = 4;
  cfg.scoring_batch_size = 12;
  cfg.text_epochs = 50;
  return cfg;
}

}  // namespace

TEST_CASE("source loss baselines") {
  Fixture f;
  f.model = VisionModel{f.model.w1, f.model.b1, f.model.w2, f.model.b2, Matrix(8, 4), Matrix(1, 4)};
  Graph g;
  CHECK(g.value(source_cls_loss(g, bind(g, f.model), f.source, {}, 0)).item() ==
        doctest::Approx(std::log(4.0)).epsilon(1e-14));

  VisionModel sure = f.model;
  sure.bh(0, 2) = 60.0;
  const SourceBatch all_two{f.source.x, {2, 2, 2, 2}};
  Graph g2;
  CHECK(g2.value(source_cls_loss(g2, bind(g2, sure), all_two, {}, 0)).item() < 1e-20);
}

TEST_CASE("reweighted target loss limits") {
  Fixture f;
  const AugmentationConfig none{0.0, 0.0, 0.0};

  SUBCASE("w = 1 is plain pseudo-label cross-entropy") {
    TargetBatch t = f.target;
    t.weights.assign(4, 1.0);
    Graph g;
    const BoundModel m = bind(g, f.model);
    const double loss = g.value(target_cls_loss(g, m, t, none, 1, 2)).item();
    const double ce = g.value(cross_entropy(g, classify(g, m, extract_features(g, m, g.constant(t.x))),
                                            t.pseudo_labels)).item();
    CHECK(loss == doctest::Approx(ce).epsilon(1e-14));
  }
  SUBCASE("w = 0 without augmentation is the prediction entropy") {
    TargetBatch t = f.target;
    t.weights.assign(4, 0.0);
    Graph g;
    const double loss = g.value(target_cls_loss(g, bind(g, f.model), t, none, 1, 2)).item();
    CHECK(loss == doctest::Approx(entropy_of_rows(f.model.logits(t.x))).epsilon(1e-13));
  }
  SUBCASE("each sample is a convex combination of its two terms") {
    for (std::size_t i = 0; i < 4; ++i) {
      const IndexBatch one{i};
      const auto single = [&](double w) {
        TargetBatch t{gather_rows(f.target.x, one), {f.target.pseudo_labels[i]}, {w}, Matrix{{1.0}}};
        Graph g;
        return g.value(target_cls_loss(g, bind(g, f.model), t, {}, 1, 2)).item();
      };
      const double hard = single(1.0), soft = single(0.0), mixed = single(f.target.weights[i]);
      CHECK(mixed >= std::min(hard, soft) - 1e-12);
      CHECK(mixed <= std::max(hard, soft) + 1e-12);
      CHECK(mixed == doctest::Approx(f.target.weights[i] * hard + (1 - f.target.weights[i]) * soft).epsilon(1e-12));
    }
  }
  SUBCASE("weights outside [0, 1] are rejected") {
    TargetBatch t = f.target;
    t.weights[0] = 1.5;
    Graph g;
    CHECK_THROWS_AS(target_cls_loss(g, bind(g, f.model), t, {}, 1, 2), ConfigError);
  }
}

TEST_CASE("total loss is the sum of its parts") {
  Fixture f;
  for (const auto& [soft, hard, unc] : {std::tuple{true, false, true}, std::tuple{false, true, false},
                                        std::tuple{false, false, true}}) {
    for (auto red : {ContrastiveReduction::kMean, ContrastiveReduction::kSum}) {
      TrainConfig cfg;
      cfg.use_soft_ctr = soft;
      cfg.use_hard_ctr = hard;
      cfg.use_uncertainty = unc;
      cfg.ctr_reduction = red;
      Graph g;
      const LossTerms t = total_loss(g, bind(g, f.model), f.source, f.target, cfg, f.seeds);
      double parts = g.value(t.source).item() + g.value(t.target).item();
      CHECK(t.contrastive.has_value() == (soft || hard));
      if (t.contrastive) parts += g.value(*t.contrastive).item();
      CHECK(std::isfinite(g.value(t.total).item()));
      CHECK(std::abs(g.value(t.total).item() - parts) <= 1e-12);
    }
  }
}

TEST_CASE("contrastive reduction divides by the batch size") {
  Fixture f;
  TrainConfig mean_cfg, sum_cfg;
  sum_cfg.ctr_reduction = ContrastiveReduction::kSum;
  Graph g1, g2;
  const LossTerms a = total_loss(g1, bind(g1, f.model), f.source, f.target, mean_cfg, f.seeds);
  const LossTerms b = total_loss(g2, bind(g2, f.model), f.source, f.target, sum_cfg, f.seeds);
  CHECK(g1.value(*a.contrastive).item() * 4.0 == doctest::Approx(g2.value(*b.contrastive).item()).epsilon(1e-14));
}

TEST_CASE("uncertainty off means unit weights") {
  Fixture f;
  TrainConfig cfg;
  cfg.use_soft_ctr = false;
  cfg.use_uncertainty = false;
  TargetBatch ones = f.target;
  ones.weights.assign(4, 1.0);
  Graph g1, g2;
  const LossTerms a = total_loss(g1, bind(g1, f.model), f.source, f.target, cfg, f.seeds);
  const LossTerms b = total_loss(g2, bind(g2, f.model), f.source, ones, cfg, f.seeds);
  CHECK(g1.value(a.total).item() == g2.value(b.total).item());
}

TEST_CASE("stopped teacher branch: value counts, gradient does not") {
  Fixture f;
  TrainConfig cfg;

  // Teacher evaluated once at the base point.
  Graph probe;
  const BoundModel pm = bind(probe, f.model);
  const TargetViews v = target_views(probe, pm, f.target.x, cfg.augmentation, f.seeds.target_weak,
                                     f.seeds.target_strong);
  const Matrix teacher = row_softmax(probe.value(v.strong_logits));

  Graph live;
  const BoundModel lm = bind(live, f.model);
  const LossTerms lt = total_loss(live, lm, f.source, f.target, cfg, f.seeds);
  live.backward(lt.total);
  Graph frozen;
  const BoundModel fm = bind(frozen, f.model);
  const LossTerms ft = total_loss(frozen, fm, f.source, f.target, cfg, f.seeds, &teacher);
  frozen.backward(ft.total);

  CHECK(live.value(lt.total).item() == doctest::Approx(frozen.value(ft.total).item()).epsilon(1e-14));
  for (std::size_t k = 0; k < 6; ++k) {
    const Matrix& a = live.grad(lm.parameters()[k]);
    const Matrix& b = frozen.grad(fm.parameters()[k]);
    for (std::size_t q = 0; q < a.size(); ++q) CHECK(std::abs(a.data()[q] - b.data()[q]) <= 1e-12);
  }

  // Finite differences of the frozen objective agree with the live analytic gradient...
  std::vector<Matrix> params;
  for (const Matrix* p : f.model.parameters()) params.push_back(*p);
  const LossBuilder frozen_fn = [&](Graph& g, std::span<const NodeId> p, std::uint64_t) {
    const BoundModel m{p[0], p[1], p[2], p[3], p[4], p[5]};
    return total_loss(g, m, f.source, f.target, cfg, f.seeds, &teacher).total;
  };
  CHECK(grad_check(frozen_fn, params, 1e-5, 0) <= 1e-4);

  // ...while the live objective's value does move through the teacher, so its
  // finite differences disagree with the stopped gradient.
  const LossBuilder live_fn = [&](Graph& g, std::span<const NodeId> p, std::uint64_t) {
    const BoundModel m{p[0], p[1], p[2], p[3], p[4], p[5]};
    return total_loss(g, m, f.source, f.target, cfg, f.seeds).total;
  };
  CHECK(grad_check(live_fn, params, 1e-5, 0) > 1e-3);
}

TEST_CASE("config validation") {
  TrainConfig cfg;
  cfg.use_hard_ctr = true;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.tau = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.batch_size = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("evaluate") {
  const SynthConfig sc = [] {
    SynthConfig c;
    c.n_per_class = 100;
    return c;
  }();
  const DomainPair p = gen_synthetic(sc);
  const VisionModel random_model = VisionModel::init(p.target.image_emb.cols(), 64, 32, 10, 3);
  const double acc = evaluate(random_model, p.target);
  CHECK(std::abs(acc - 0.1) <= 3.0 * std::sqrt(0.1 * 0.9 / 1000.0));

  std::vector<std::size_t> perm(p.target.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = (i * 7 + 3) % perm.size();
  EmbeddingDataset shuffled = p.target;
  shuffled.image_emb = gather_rows(p.target.image_emb, perm);
  for (std::size_t i = 0; i < perm.size(); ++i) (*shuffled.labels)[i] = (*p.target.labels)[perm[i]];
  CHECK(evaluate(random_model, shuffled) == acc);

  // One-hot inputs routed straight through: an exact lookup.
  EmbeddingDataset lookup;
  lookup.num_classes = 4;
  lookup.image_emb = Matrix::identity(4);
  lookup.labels = std::vector<int>{0, 1, 2, 3};
  Matrix w1 = Matrix::identity(4);
  for (double& v : w1.data()) v *= 3.0;
  const VisionModel oracle{w1, Matrix(1, 4), Matrix::identity(4), Matrix(1, 4), Matrix::identity(4), Matrix(1, 4)};
  CHECK(evaluate(oracle, lookup) == 1.0);

  lookup.labels.reset();
  CHECK_THROWS_AS(evaluate(oracle, lookup), ConfigError);
}

TEST_CASE("train") {
  const DomainPair p = gen_synthetic(small_synth());
  const TrainConfig cfg = small_train();

  SUBCASE("zero epochs reports only the initial evaluation") {
    TrainConfig zero = cfg;
    zero.epochs = 0;
    const TrainResult r = train_pipeline(p.source, p.target, zero);
    CHECK(r.report.epochs.empty());
    REQUIRE(r.report.initial_target_accuracy.has_value());
    CHECK(r.report.final_target_accuracy == r.report.initial_target_accuracy);
  }
  SUBCASE("deterministic") {
    const TrainResult a = train_pipeline(p.source, p.target, cfg);
    const TrainResult b = train_pipeline(p.source, p.target, cfg);
    CHECK(a.model == b.model);
    CHECK(a.report.epochs == b.report.epochs);
    CHECK(a.report.epochs.size() == 3);
  }
  SUBCASE("target labels only feed evaluation") {
    const TargetSupervision sup = prepare_target_supervision(p.source, p.target, cfg);
    EmbeddingDataset blind = p.target;
    blind.labels.reset();
    const TrainResult a = train(p.source, p.target, sup.pseudo, sup.weights, cfg);
    const TrainResult b = train(p.source, blind, sup.pseudo, sup.weights, cfg);
    CHECK(a.model == b.model);
    CHECK_FALSE(b.report.final_target_accuracy.has_value());
  }
  SUBCASE("mismatched inputs") {
    const TargetSupervision sup = prepare_target_supervision(p.source, p.target, cfg);
    PseudoLabels short_pl = sup.pseudo;
    short_pl.labels.pop_back();
    CHECK_THROWS_AS(train(p.source, p.target, short_pl, sup.weights, cfg), ShapeError);
    EmbeddingDataset unlabeled = p.source;
    unlabeled.labels.reset();
    CHECK_THROWS_AS(train(unlabeled, p.target, sup.pseudo, sup.weights, cfg), ConfigError);
  }
  SUBCASE("divergence names the step") {
    TrainConfig wild = cfg;
    wild.lr = 1e300;
    try {
      train_pipeline(p.source, p.target, wild);
      FAIL("expected divergence");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    }
  }
}

TEST_CASE("full method beats pseudo-labels alone on the default synthetic task") {
  const DomainPair p = gen_synthetic(SynthConfig{});
  TrainConfig full;
  TrainConfig none;
  none.use_soft_ctr = false;
  none.use_uncertainty = false;
  const TargetSupervision sup = prepare_target_supervision(p.source, p.target, full);
  const double a = *train(p.source, p.target, sup.pseudo, sup.weights, full).report.final_target_accuracy;
  const double b = *train(p.source, p.target, sup.pseudo, sup.weights, none).report.final_target_accuracy;
  CHECK(a - b >= 0.02);
}

TEST_CASE("ablate has five rows") {
  const DomainPair p = gen_synthetic(small_synth());
  const AblationTable t = ablate(p.source, p.target, small_train());
  REQUIRE(t.rows.size() == 5);
  CHECK(t.rows[0].name == "none");
  CHECK(t.rows[4].soft_ctr);
  CHECK(t.rows[4].uncertainty);
  CHECK(t.pseudo_label_accuracy.has_value());
}

TEST_CASE("model checkpoint round-trip") {
  TempDir tmp("model");
  const VisionModel m = VisionModel::init(6, 5, 4, 3, 9);
  save_model(m, tmp / "m");
  const VisionModel back = load_model(tmp / "m");
  auto expect = m;
  for (Matrix* p : expect.parameters()) *p = quantize_f32(*p);
  CHECK(back == expect);
  CHECK_THROWS(load_model(tmp / "absent"));
}

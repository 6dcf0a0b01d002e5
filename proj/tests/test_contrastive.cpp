#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "support.hpp"
#include "trust/contrastive.hpp"
#include "trust/error.hpp"
#include "trust/gradcheck.hpp"

using namespace trust;
using trust::testing::random_matrix;

namespace {

// Direct transcription with explicit loops, used as an independent oracle.
double soft_oracle(const Matrix& z_raw, const Matrix& zb_raw, const Matrix& sim, double tau) {
  const Matrix z = l2_normalize_rows(z_raw);
  const Matrix zb = l2_normalize_rows(zb_raw);
  const std::size_t b = z.rows();
  double loss = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    double attract = 0.0, repel = 0.0;
    for (std::size_t p = 0; p < b; ++p) attract += sim(i, p) * std::exp(dot(z.row(i), zb.row(p)) / tau);
    for (std::size_t j = 0; j < b; ++j) {
      if (j != i) repel += (1.0 - sim(i, j)) * std::exp(dot(z.row(i), z.row(j)) / tau);
    }
    loss -= std::log((attract / static_cast<double>(b)) / repel);
  }
  return loss;
}

double hard_value(const Matrix& z, const Matrix& zb, double tau) {
  Graph g;
  return g.value(hard_contrastive_loss(g, make_contrastive_batch(g, g.leaf(z), g.leaf(zb), tau))).item();
}

double soft_value(const Matrix& z, const Matrix& zb, const Matrix& sim, double tau) {
  Graph g;
  const ContrastiveBatch cb = make_contrastive_batch(g, g.leaf(z), g.leaf(zb), tau);
  return g.value(soft_contrastive_loss(g, cb, CaptionSimilarity{sim})).item();
}

}  // namespace

TEST_CASE("caption_similarity_matrix") {
  const Matrix same{{1, 2, 3}, {1, 2, 3}, {2, 4, 6}};
  CHECK(caption_similarity_matrix(same).sim == Matrix(3, 3, 1.0));

  CHECK(caption_similarity_matrix(Matrix::identity(4)).sim == Matrix::identity(4));

  const Matrix deg45{{1, 0}, {1, 1}};
  const Matrix s = caption_similarity_matrix(deg45).sim;
  CHECK(s(0, 1) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-14));
  CHECK(s(1, 0) == s(0, 1));

  const Matrix opposite{{1, 0}, {-1, 0.1}};
  CHECK(caption_similarity_matrix(opposite).sim(0, 1) == 0.0);

  const Matrix r = caption_similarity_matrix(random_matrix(6, 4, 9)).sim;
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(r(i, i) == 1.0);
    for (std::size_t j = 0; j < 6; ++j) {
      CHECK(r(i, j) == r(j, i));
      CHECK(r(i, j) >= 0.0);
      CHECK(r(i, j) <= 1.0);
    }
  }
}

TEST_CASE("hard contrastive loss") {
  CHECK(hard_value(Matrix::identity(2), Matrix::identity(2), 1.0) == doctest::Approx(-2.0).epsilon(1e-15));

  const Matrix z = random_matrix(5, 8, 1);
  const Matrix zb = random_matrix(5, 8, 2);
  const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  CHECK(hard_value(gather_rows(z, perm), gather_rows(zb, perm), 0.1) ==
        doctest::Approx(hard_value(z, zb, 0.1)).epsilon(1e-13));
  CHECK(hard_value(z, zb, 0.5) == doctest::Approx(soft_oracle(z, zb, Matrix::identity(5), 0.5) -
                                                   5.0 * std::log(5.0)).epsilon(1e-12));
}

TEST_CASE("soft contrastive loss matches the loop oracle") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Matrix z = random_matrix(6, 8, 10 + seed);
    const Matrix zb = random_matrix(6, 8, 20 + seed);
    const Matrix sim = caption_similarity_matrix(random_matrix(6, 5, 30 + seed)).sim;
    CHECK(soft_value(z, zb, sim, 0.1) == doctest::Approx(soft_oracle(z, zb, sim, 0.1)).epsilon(1e-12));
  }
}

TEST_CASE("soft reduces to hard under identity similarity") {
  for (std::size_t b : {2, 4, 16}) {
    const Matrix z = random_matrix(b, 8, b);
    const Matrix zb = random_matrix(b, 8, b + 1);
    const double gap = soft_value(z, zb, Matrix::identity(b), 0.1) - hard_value(z, zb, 0.1);
    CHECK(std::abs(gap - static_cast<double>(b) * std::log(static_cast<double>(b))) <= 1e-9);
  }
}

TEST_CASE("soft contrastive rejects an anchor with no repulsion") {
  const Matrix z = random_matrix(3, 4, 1);
  CHECK_THROWS_AS(soft_value(z, z, Matrix(3, 3, 1.0), 0.1), NumericError);
  Matrix partial = Matrix::identity(3);
  partial(1, 0) = partial(1, 2) = 1.0;
  try {
    soft_value(z, z, partial, 0.1);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("anchor 1") != std::string::npos);
  }
}

TEST_CASE("contrastive batch validation") {
  Graph g;
  CHECK_THROWS(make_contrastive_batch(g, g.leaf(Matrix(1, 3, 1.0)), g.leaf(Matrix(1, 3, 1.0)), 0.1));
  CHECK_THROWS(make_contrastive_batch(g, g.leaf(random_matrix(2, 3, 1)), g.leaf(random_matrix(2, 4, 2)), 0.1));
  CHECK_THROWS(make_contrastive_batch(g, g.leaf(random_matrix(2, 3, 1)), g.leaf(random_matrix(2, 3, 2)), 0.0));
  const ContrastiveBatch cb = make_contrastive_batch(g, g.leaf(random_matrix(2, 3, 1)), g.leaf(random_matrix(2, 3, 2)), 0.1);
  CHECK_THROWS_AS(soft_contrastive_loss(g, cb, CaptionSimilarity{Matrix::identity(3)}), ShapeError);
}

TEST_CASE("contrastive gradients agree with finite differences") {
  const LossBuilder soft = [](Graph& g, std::span<const NodeId> p, std::uint64_t) {
    return soft_contrastive_loss(g, make_contrastive_batch(g, p[0], p[1], 0.5), p[2]);
  };
  const LossBuilder hard = [](Graph& g, std::span<const NodeId> p, std::uint64_t) {
    return hard_contrastive_loss(g, make_contrastive_batch(g, p[0], p[1], 0.5));
  };
  // Interior similarities so the perturbed weights stay non-negative.
  Matrix sim = row_softmax(random_matrix(4, 4, 3));
  for (double& v : sim.data()) v = 0.2 + 0.6 * v;
  const Matrix params[] = {random_matrix(4, 8, 1), random_matrix(4, 8, 2), sim};
  CHECK(grad_check(soft, params, 1e-5, 0) <= 1e-6);
  CHECK(grad_check(hard, std::span(params, 2), 1e-5, 0) <= 1e-6);
}

TEST_CASE("pair_weights_report") {
  const Matrix sim{{1.0, 0.7}, {0.7, 1.0}};
  const auto r = pair_weights_report({sim});
  CHECK(r[0][1].positiveness == 0.7);
  CHECK(r[0][1].negativeness == doctest::Approx(0.3));
  CHECK(r[0][0].positiveness == 1.0);
  CHECK(r[0][0].negativeness == 0.0);
  const auto zero = pair_weights_report({Matrix(2, 2)});
  CHECK(zero[1][0].positiveness == 0.0);
  CHECK(zero[1][0].negativeness == 1.0);
}

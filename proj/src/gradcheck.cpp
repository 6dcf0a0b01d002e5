#include "trust/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "trust/error.hpp"

namespace trust {

namespace {

double evaluate(const LossBuilder& loss_fn, const std::vector<Matrix>& params, std::uint64_t seed) {
  Graph g;
  std::vector<NodeId> ids;
  ids.reserve(params.size());
  for (const auto& p : params) ids.push_back(g.leaf(p));
  return g.value(loss_fn(g, ids, seed)).item();
}

}  // namespace

GradCheckResult grad_check_detailed(const LossBuilder& loss_fn, std::span<const Matrix> params,
                                    double h, std::uint64_t seed) {
  if (!(h > 0.0)) throw ConfigError("grad_check: step h must be positive");

  std::vector<Matrix> work(params.begin(), params.end());
  std::vector<Matrix> analytic;
  {
    Graph g;
    std::vector<NodeId> ids;
    for (const auto& p : work) ids.push_back(g.leaf(p));
    g.backward(loss_fn(g, ids, seed));
    for (NodeId id : ids) analytic.push_back(g.grad(id));
  }

  GradCheckResult result;
  for (std::size_t p = 0; p < work.size(); ++p) {
    for (std::size_t k = 0; k < work[p].size(); ++k) {
      const double original = work[p].data()[k];
      work[p].data()[k] = original + h;
      const double plus = evaluate(loss_fn, work, seed);
      work[p].data()[k] = original - h;
      const double minus = evaluate(loss_fn, work, seed);
      work[p].data()[k] = original;

      const double numeric = (plus - minus) / (2.0 * h);
      const double a = analytic[p].data()[k];
      const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      if (err > result.max_relative_error) {
        result = {err, p, k, a, numeric};
      }
    }
  }
  return result;
}

double grad_check(const LossBuilder& loss_fn, std::span<const Matrix> params, double h,
                  std::uint64_t seed) {
  return grad_check_detailed(loss_fn, params, h, seed).max_relative_error;
}

}  // namespace trust

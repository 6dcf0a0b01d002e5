#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "trust/graph.hpp"

namespace trust {

/// Builds a scalar loss on `graph` from parameter leaves bound in the same
/// order as the matrices handed to grad_check. `seed` is forwarded unchanged
/// to every evaluation so stochastic losses replay identically.
using LossBuilder =
    std::function<NodeId(Graph& graph, std::span<const NodeId> params, std::uint64_t seed)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

/// Compares reverse-mode gradients against central differences over every
/// coordinate of every parameter. Relative error per coordinate is
/// |analytic - numeric| / max(1, |analytic|, |numeric|).
GradCheckResult grad_check_detailed(const LossBuilder& loss_fn, std::span<const Matrix> params,
                                    double h, std::uint64_t seed);

double grad_check(const LossBuilder& loss_fn, std::span<const Matrix> params, double h,
                  std::uint64_t seed);

}  // namespace trust

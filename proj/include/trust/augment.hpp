#pragma once

#include <cstdint>

#include "trust/matrix.hpp"

namespace trust {

/// Embedding-space stand-ins for the weak / strong view distributions.
struct AugmentationConfig {
  double sigma_weak = 0.01;
  double sigma_strong = 0.1;
  double dropout_strong = 0.2;

  void validate() const;
};

enum class AugmentKind { kWeak, kStrong };

/// weak:   x + N(0, sigma_weak^2)
/// strong: inverted dropout at rate dropout_strong, then + N(0, sigma_strong^2)
/// Deterministic in `seed`.
Matrix augment(const Matrix& x, AugmentKind kind, const AugmentationConfig& config, std::uint64_t seed);

}  // namespace trust

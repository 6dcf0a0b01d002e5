#include "trust/augment.hpp"

#include <cmath>

#include "trust/error.hpp"
#include "trust/random.hpp"

namespace trust {

void AugmentationConfig::validate() const {
  if (!(sigma_weak >= 0.0) || !(sigma_strong >= 0.0)) {
    throw ConfigError("augmentation sigmas must be non-negative");
  }
  if (!(dropout_strong >= 0.0 && dropout_strong < 1.0)) {
    throw ConfigError("augmentation dropout must lie in [0, 1)");
  }
}

Matrix augment(const Matrix& x, AugmentKind kind, const AugmentationConfig& config, std::uint64_t seed) {
  config.validate();
  require_finite(x, "augment input");
  Rng rng(seed);
  Matrix out = x;
  if (kind == AugmentKind::kWeak) {
    if (config.sigma_weak > 0.0) {
      std::normal_distribution<double> noise(0.0, config.sigma_weak);
      for (double& v : out.data()) v += noise(rng);
    }
    return out;
  }

  if (config.dropout_strong > 0.0) {
    std::bernoulli_distribution drop(config.dropout_strong);
    const double keep_scale = 1.0 / (1.0 - config.dropout_strong);
    for (double& v : out.data()) v = drop(rng) ? 0.0 : v * keep_scale;
  }
  if (config.sigma_strong > 0.0) {
    std::normal_distribution<double> noise(0.0, config.sigma_strong);
    for (double& v : out.data()) v += noise(rng);
  }
  return out;
}

}  // namespace trust

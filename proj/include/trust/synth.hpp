#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>

#include "trust/dataset.hpp"

namespace trust {

/// Two-domain synthetic generator settings. Target image embeddings are a
/// rotated and translated copy of the source geometry; target captions are
/// replaced by a wrong-class caption with probability `rho`.
struct SynthConfig {
  std::size_t classes = 10;
  std::size_t n_per_class = 50;
  std::size_t dim_image = 128;
  std::size_t dim_caption = 32;
  std::size_t dim_clip = 32;
  double shift_angle = 0.9;   // radians, applied in each Givens plane
  double shift_offset = 0.5;  // norm of the target translation
  double noise_img = 0.25;    // per-coordinate std
  double noise_txt = 0.05;
  double noise_clip = 0.05;
  double rho = 0.3;
  std::uint64_t seed = 0;

  void validate() const;
};

struct DomainPair {
  EmbeddingDataset source;
  EmbeddingDataset target;
};

/// Deterministic in `config.seed`. All stored values are float32-exact, so a
/// save/load cycle reproduces the returned datasets bit for bit.
DomainPair gen_synthetic(const SynthConfig& config);

}  // namespace trust

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "trust/matrix.hpp"

namespace trust {

enum class Domain { kSource, kTarget };

std::string_view domain_name(Domain d);
/// Throws FormatError for anything other than "source" or "target".
Domain parse_domain(std::string_view s);

/// Aligned per-sample embeddings for one domain.
///
/// Target `labels` are ground truth reserved for evaluation; the training
/// path only ever hands them to evaluate().
struct EmbeddingDataset {
  Domain domain = Domain::kSource;
  std::size_t num_classes = 0;
  Matrix image_emb;    // N x D_img, input to the vision feature extractor
  Matrix caption_emb;  // N x D_txt, text-encoder caption features
  Matrix clip_img;     // N x D_clip
  Matrix clip_txt;     // N x D_clip
  std::optional<std::vector<int>> labels;
  std::optional<std::vector<std::uint8_t>> corrupted_mask;
  std::optional<std::uint64_t> seed;

  std::size_t size() const noexcept { return image_emb.rows(); }

  /// Checks every structural invariant; throws ShapeError / FormatError /
  /// NumericError describing the first violation.
  void validate() const;

  friend bool operator==(const EmbeddingDataset&, const EmbeddingDataset&) = default;
};

}  // namespace trust

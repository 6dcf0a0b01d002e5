#include "trust/dataset.hpp"

#include "trust/error.hpp"

namespace trust {

std::string_view domain_name(Domain d) { return d == Domain::kSource ? "source" : "target"; }

Domain parse_domain(std::string_view s) {
  if (s == "source") return Domain::kSource;
  if (s == "target") return Domain::kTarget;
  throw FormatError("unknown domain tag '" + std::string(s) + "'");
}

void EmbeddingDataset::validate() const {
  const std::size_t n = image_emb.rows();
  auto check_rows = [n](const Matrix& m, const char* name) {
    if (m.rows() != n) {
      throw ShapeError(std::string(name) + " has " + std::to_string(m.rows()) + " rows, expected " +
                       std::to_string(n));
    }
  };
  check_rows(caption_emb, "caption_emb");
  check_rows(clip_img, "clip_img");
  check_rows(clip_txt, "clip_txt");
  if (clip_img.cols() != clip_txt.cols()) {
    throw ShapeError("clip_img and clip_txt dimensions differ: " + std::to_string(clip_img.cols()) +
                     " vs " + std::to_string(clip_txt.cols()));
  }
  require_finite(image_emb, "image_emb");
  require_finite(caption_emb, "caption_emb");
  require_finite(clip_img, "clip_img");
  require_finite(clip_txt, "clip_txt");

  if (domain == Domain::kSource && !labels) throw FormatError("source dataset must carry labels");
  if (labels) {
    if (labels->size() != n) {
      throw ShapeError("labels has " + std::to_string(labels->size()) + " entries, expected " +
                       std::to_string(n));
    }
    for (std::size_t i = 0; i < n; ++i) {
      const int y = (*labels)[i];
      if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
        throw FormatError("label " + std::to_string(y) + " at index " + std::to_string(i) +
                          " outside [0, " + std::to_string(num_classes) + ")");
      }
    }
  }
  if (corrupted_mask) {
    if (corrupted_mask->size() != n) {
      throw ShapeError("corrupted_mask has " + std::to_string(corrupted_mask->size()) +
                       " entries, expected " + std::to_string(n));
    }
    for (std::size_t i = 0; i < n; ++i) {
      if ((*corrupted_mask)[i] > 1) {
        throw FormatError("corrupted_mask entry at index " + std::to_string(i) + " is not 0/1");
      }
    }
  }
}

}  // namespace trust

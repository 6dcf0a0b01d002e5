#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "trust/dataset.hpp"
#include "trust/matrix.hpp"

namespace trust {

// Binary layout (all integers and floats little-endian):
//   embedding  "TRSTEMB1" | u32 rows | u32 cols | rows*cols f32, row-major
//   labels     "TRSTLBL1" | u32 n    | n u32 class ids
//   mask       "TRSTMSK1" | u32 n    | n bytes (0/1)
// Matrices are promoted to double on load; saving rounds to float32.

inline constexpr char kEmbeddingMagic[] = "TRSTEMB1";
inline constexpr char kLabelsMagic[] = "TRSTLBL1";
inline constexpr char kMaskMagic[] = "TRSTMSK1";
inline constexpr int kFormatVersion = 1;

void write_matrix_file(const std::filesystem::path& path, const Matrix& m);
/// Throws FormatError (with byte offset) on bad magic, truncation, trailing
/// bytes or non-finite payload; IoError when the file cannot be opened.
Matrix read_matrix_file(const std::filesystem::path& path);

void write_labels_file(const std::filesystem::path& path, const std::vector<int>& labels);
std::vector<int> read_labels_file(const std::filesystem::path& path);

void write_mask_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& mask);
std::vector<std::uint8_t> read_mask_file(const std::filesystem::path& path);

/// Writes manifest.json plus the binaries. The dataset is validated before
/// anything touches the filesystem.
void save_dataset(const EmbeddingDataset& dataset, const std::filesystem::path& dir);
EmbeddingDataset load_dataset(const std::filesystem::path& dir);

/// Rounds every entry to the nearest float32, i.e. what a save/load cycle yields.
Matrix quantize_f32(const Matrix& m);

}  // namespace trust

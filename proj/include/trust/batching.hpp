#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "trust/dataset.hpp"

namespace trust {

using IndexBatch = std::vector<std::size_t>;

/// Seeded per-epoch shuffle of [0, n) cut into full batches of `batch_size`;
/// the trailing short batch is dropped. Throws ConfigError if batch_size < 2
/// or batch_size > n.
std::vector<IndexBatch> batch_iter(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                   std::uint64_t epoch);

inline std::vector<IndexBatch> batch_iter(const EmbeddingDataset& ds, std::size_t batch_size,
                                          std::uint64_t seed, std::uint64_t epoch) {
  return batch_iter(ds.size(), batch_size, seed, epoch);
}

}  // namespace trust

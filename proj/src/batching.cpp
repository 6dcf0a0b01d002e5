#include "trust/batching.hpp"

#include <algorithm>
#include <numeric>

#include "trust/error.hpp"
#include "trust/random.hpp"

namespace trust {

std::vector<IndexBatch> batch_iter(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                   std::uint64_t epoch) {
  if (batch_size < 2) throw ConfigError("batch size must be >= 2");
  if (batch_size > n) {
    throw ConfigError("batch size " + std::to_string(batch_size) + " exceeds dataset size " +
                      std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, {epoch}));
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<IndexBatch> batches;
  for (std::size_t start = 0; start + batch_size <= n; start += batch_size) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(start + batch_size));
  }
  return batches;
}

}  // namespace trust

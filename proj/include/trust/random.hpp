#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "trust/matrix.hpp"

namespace trust {

using Rng = std::mt19937_64;

/// Mixes a base seed with stream tags into an independent child seed
/// (splitmix64 finalizer applied per tag).
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags);

/// rows x cols matrix of i.i.d. N(0, stddev^2) draws, row-major draw order.
Matrix gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols, double stddev);

}  // namespace trust

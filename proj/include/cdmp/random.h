#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace cdmp {

/// Mixes a base seed with stream identifiers (fold, stage, ...) into an
/// independent seed using the splitmix64 finalizer.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> stream);

/// Fisher-Yates permutation of [0, n) drawn from `rng`. Uses only raw engine
/// output so the result does not depend on the standard library's
/// distribution implementations.
std::vector<std::size_t> random_permutation(std::size_t n, std::mt19937_64& rng);

/// Uniform integer in [0, bound) by rejection sampling on raw engine output.
std::uint64_t uniform_below(std::uint64_t bound, std::mt19937_64& rng);

/// Uniform real in [0, 1) with 53 random bits.
double uniform_unit(std::mt19937_64& rng);

}  // namespace cdmp

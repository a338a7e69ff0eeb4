#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace abmuq {

// All stochastic components draw from this engine. Its output sequence is
// fixed by the standard, so runs replay bit-for-bit across platforms as long
// as only the helpers below are used to turn raw draws into variates.
using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

// Seed for child stream `stream` of `base`. Distinct streams give
// statistically independent engines.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

// Named derivation, used for per-stage seeds in the pipeline.
std::uint64_t derive_seed(std::uint64_t base, std::string_view name);

// Uniform on [0, 1) with 53 random bits.
double uniform01(Rng& rng);

// Uniform integer on [0, n). n must be > 0.
std::size_t uniform_index(Rng& rng, std::size_t n);

bool bernoulli(Rng& rng, double p);

// Standard normal via Box-Muller.
double standard_normal(Rng& rng);

template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = uniform_index(rng, i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace abmuq

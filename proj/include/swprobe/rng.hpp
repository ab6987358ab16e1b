#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace swprobe {

// All randomness in the library flows through this engine. Its output
// sequence is fixed by the standard, unlike the std distributions, so the
// helpers below are used instead of <random> distributions.
using Rng = std::mt19937_64;

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);
std::uint64_t splitmix64(std::uint64_t x);

// Seed for one job: hash(global seed, job key).
std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view job_key);

// Uniform double in [0, 1) with 53 random bits.
double uniform01(Rng& rng);

// Uniform integer in [0, bound), bound > 0, unbiased.
std::uint64_t uniform_below(Rng& rng, std::uint64_t bound);

template <class T>
void shuffle(std::span<T> items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(uniform_below(rng, i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace swprobe

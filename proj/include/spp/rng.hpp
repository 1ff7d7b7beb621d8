#pragma once

#include <cstdint>
#include <random>

namespace spp {

/// Independent consumers of randomness. Each (seed, iteration, purpose)
/// triple keys its own stream so two engines replaying the same run see
/// identical draws regardless of the order in which they ask for them.
enum class Purpose : std::uint64_t {
  mask = 1,
  topology = 2,
  vr = 3,
  partition = 4,
  geometry = 5,
  data = 6,
};

using Stream = std::mt19937_64;

std::uint64_t mix64(std::uint64_t x) noexcept;

Stream make_stream(std::uint64_t seed, std::uint64_t iteration, Purpose purpose);

/// Uniform double in [0, 1) built from the top 53 bits of one draw.
double uniform01(Stream& stream);

/// Standard normal via Box-Muller; consumes two draws.
double standard_normal(Stream& stream);

}  // namespace spp

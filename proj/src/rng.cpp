#include "spp/rng.hpp"

#include <cmath>
#include <numbers>

namespace spp {

std::uint64_t mix64(std::uint64_t x) noexcept {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Stream make_stream(std::uint64_t seed, std::uint64_t iteration, Purpose purpose) {
  std::uint64_t key = mix64(seed);
  key = mix64(key ^ iteration);
  key = mix64(key ^ static_cast<std::uint64_t>(purpose));
  std::seed_seq seq{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32),
                    static_cast<std::uint32_t>(iteration), static_cast<std::uint32_t>(purpose)};
  return Stream(seq);
}

double uniform01(Stream& stream) {
  return static_cast<double>(stream() >> 11) * 0x1.0p-53;
}

double standard_normal(Stream& stream) {
  double u1 = uniform01(stream);
  const double u2 = uniform01(stream);
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace spp

#pragma once

#include <cstdint>
#include <limits>

namespace cntco {

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Keyed hash of (seed, stream, counter). Two mixing rounds per word keep
// neighbouring keys decorrelated.
inline std::uint64_t hash3(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
  std::uint64_t h = mix64(seed ^ 0x6a09e667f3bcc908ULL);
  h = mix64(h ^ mix64(stream + 0xbb67ae8584caa73bULL));
  h = mix64(h ^ mix64(counter + 0x3c6ef372fe94f82bULL));
  return h;
}

// Uniform on the open interval (0, 1) from 53 random bits.
inline double to_open_unit(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

// Counter-based generator for one substream; satisfies
// UniformRandomBitGenerator so it plugs into <random> distributions.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

  result_type operator()() { return hash3(seed_, stream_, counter_++); }
  double uniform() { return to_open_unit((*this)()); }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

// Stream id for a (key, trial) cell of a sampled matrix.
inline std::uint64_t cell_stream(std::uint64_t key, std::uint64_t trial) {
  return mix64(key * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL) ^ trial;
}

}  // namespace cntco

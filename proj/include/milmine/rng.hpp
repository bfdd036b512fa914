// Deterministic random number generation.
//
// All randomness in the library flows through Rng so that runs are
// bitwise reproducible across platforms. std::mt19937_64 has a
// standardized output sequence; the distributions below are hand-rolled
// because the std:: distribution templates are implementation-defined.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <random>

namespace milmine {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent seed for a named sub-stream (init, shuffle, synth,
// ...) so components stay individually reproducible under one master seed.
inline std::uint64_t derive_stream(std::uint64_t seed, const std::string& name) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char c : name) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return splitmix64(seed ^ h);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  Rng(std::uint64_t seed, const std::string& stream)
      : gen_(derive_stream(seed, stream)) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on [0, 1).
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Modulo bias is irrelevant at the n used here;
  // determinism is what matters.
  std::uint64_t below(std::uint64_t n) { return gen_() % n; }

  // In-place Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace milmine

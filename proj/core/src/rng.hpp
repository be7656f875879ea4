#pragma once
// Small counter-based RNG used wherever seeded determinism must hold across
// platforms. std::mt19937_64 itself is portable but the standard
// distributions are not, so all transforms are spelled out here.

#include <cmath>
#include <cstdint>

namespace exitrisk::detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives an independent stream root from (seed, stream). Used for per-trial
// and per-sample substreams so that adding trials or samples never perturbs
// earlier ones.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t s = seed ^ (0x9e3779b97f4a7c15ULL * (stream + 0x51ed2701ULL));
  std::uint64_t a = splitmix64(s);
  std::uint64_t state = a ^ stream;
  return splitmix64(state);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  // Uniform in (0, 1); never returns an exact endpoint.
  double next_unit() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  std::uint64_t next_below(std::uint64_t bound) { return next_u64() % bound; }

  double next_normal() {
    const double u1 = next_unit();
    const double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

 private:
  std::uint64_t state_;
};

}  // namespace exitrisk::detail

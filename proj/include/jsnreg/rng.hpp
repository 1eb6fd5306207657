#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace jsnreg {

// 64-bit finalizer used for seed scrambling and coordinate hashing.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seeded RNG. The engine is std::mt19937_64 but uniform/normal mapping is
// done by hand so that emitted records are bit-identical across standard
// library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  // Uniform in [0, 1).
  double uniform01() { return double(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via Box-Muller; second value of each pair is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

namespace detail {

// Hashed lattice value in [-1, 1), stable in (seed, ix, iy).
inline double lattice_value(std::uint64_t seed, std::int64_t ix, std::int64_t iy) {
  std::uint64_t h = splitmix64(seed ^ 0x5bf0f3b2a9d4c1e7ULL);
  h = splitmix64(h ^ static_cast<std::uint64_t>(ix));
  h = splitmix64(h ^ static_cast<std::uint64_t>(iy));
  return double(h >> 11) * 0x1.0p-52 - 1.0;
}

inline double quintic_fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

}  // namespace detail

// Band-limited value noise: C2 interpolation of hashed lattice values with
// lattice spacing corr_len. Range (-1, 1), zero-mean in expectation, smooth
// enough for gradient-based optimization.
inline double value_noise(std::uint64_t seed, double x, double y, double corr_len) {
  const double gx = x / corr_len;
  const double gy = y / corr_len;
  const double fx = std::floor(gx);
  const double fy = std::floor(gy);
  const auto ix = static_cast<std::int64_t>(fx);
  const auto iy = static_cast<std::int64_t>(fy);
  const double tx = detail::quintic_fade(gx - fx);
  const double ty = detail::quintic_fade(gy - fy);
  const double v00 = detail::lattice_value(seed, ix, iy);
  const double v10 = detail::lattice_value(seed, ix + 1, iy);
  const double v01 = detail::lattice_value(seed, ix, iy + 1);
  const double v11 = detail::lattice_value(seed, ix + 1, iy + 1);
  const double a = v00 + (v10 - v00) * tx;
  const double b = v01 + (v11 - v01) * tx;
  return a + (b - a) * ty;
}

}  // namespace jsnreg

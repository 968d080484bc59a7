#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

#include <Eigen/Core>

namespace pnpkit {

// Stateless 64-bit mixer used to derive independent sub-seeds from a master
// seed plus stream indices (instance index, trial index, batch slot, ...).
// Deriving sub-streams this way keeps every sample independent of evaluation
// order, which is what makes multi-threaded runs bit-identical to serial ones.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                              std::uint64_t c = 0) {
  std::uint64_t h = splitmix64(seed ^ 0x5851f42d4c957f2dULL);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  return splitmix64(h ^ c);
}

// mt19937_64 with explicit output transforms.  The standard pins the engine's
// output sequence exactly; the <random> distributions do not, so the
// transforms are written out here to keep streams identical across compilers.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t raw() { return eng_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Box-Muller without caching: always two engine draws per variate, so the
  // stream layout does not depend on call parity.
  double normal(double mean = 0.0, double stddev = 1.0) {
    const double u1 = 1.0 - uniform01();  // (0, 1], keeps log() finite
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * M_PI * u2);
  }

  // Unbiased integer in [0, n) by rejection.
  std::uint64_t uniform_index(std::uint64_t n) {
    const std::uint64_t reject_below = (0ULL - n) % n;  // 2^64 mod n
    std::uint64_t x = eng_();
    while (x < reject_below) x = eng_();
    return x % n;
  }

  // Isotropic unit vector from three normal draws.
  Eigen::Vector3d unit_sphere() {
    while (true) {
      Eigen::Vector3d v(normal(), normal(), normal());
      const double n = v.norm();
      if (n > 1e-12) return v / n;
    }
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace pnpkit

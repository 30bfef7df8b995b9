#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>

namespace rlmg {

// Counter-based deterministic generator (splitmix64 output function over an
// advancing counter). Substreams are derived by hashing logical tags into the
// counter, so results do not depend on call interleaving across streams.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : counter_(mix(seed + kGamma)) {}

  std::uint64_t next_u64() {
    counter_ += kGamma;
    return mix(counter_);
  }

  // Uniform in [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform over {0, ..., n-1}.
  int next_index(int n) {
    if (n <= 0) throw std::invalid_argument("Rng::next_index: n must be positive");
    return static_cast<int>(next_double() * n) % n;
  }

  // Draw from a probability vector. Weights are assumed nonnegative and
  // summing to ~1; the last positive entry absorbs rounding residue.
  int next_categorical(std::span<const double> probs) {
    if (probs.empty()) throw std::invalid_argument("Rng::next_categorical: empty support");
    const double u = next_double();
    double cum = 0.0;
    int last_positive = 0;
    for (int i = 0; i < static_cast<int>(probs.size()); ++i) {
      if (probs[i] > 0.0) last_positive = i;
      cum += probs[i];
      if (u < cum) return i;
    }
    return last_positive;
  }

  double next_gaussian() {
    // Box-Muller; u1 shifted away from zero so log stays finite.
    const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // New independent stream keyed by (this stream's origin, tags...).
  [[nodiscard]] Rng substream(std::initializer_list<std::uint64_t> tags) const {
    std::uint64_t s = counter_;
    std::uint64_t salt = 0x243F6A8885A308D3ULL;  // fractional pi digits
    for (std::uint64_t t : tags) {
      salt += kGamma;
      s = mix(s ^ mix(t + salt));
    }
    return Rng(s);
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t counter_;
};

}  // namespace rlmg

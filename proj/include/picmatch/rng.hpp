#pragma once

#include <cmath>
#include <cstdint>

namespace picmatch {

// Fixed-increment splittable generator (Steele, Lea & Flood 2014; Vigna's
// fixed-gamma variant). The state walks a counter in increments of the
// golden-ratio constant and the output is a bijective hash of the counter,
// so independent streams can be derived from (master seed, stream id)
// without coordination between threads.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  // Stream r of a master seed. Replicate r always sees the same stream no
  // matter which thread runs it or in what order.
  static SplitMix64 stream(std::uint64_t master, std::uint64_t stream_id) {
    return SplitMix64(mix(master + kGamma * (stream_id + 1)));
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~std::uint64_t{0}; }

  std::uint64_t operator()() {
    state_ += kGamma;
    return mix(state_);
  }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  bool bernoulli(double prob) { return uniform() < prob; }

  // Marsaglia polar method with a cached spare; self-contained so output is
  // identical across standard libraries.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  // Student t via normal / sqrt(chi^2_df / df); df need not be integral.
  double student_t(double df) {
    double chisq = 0.0;
    const int whole = static_cast<int>(df);
    for (int k = 0; k < whole; ++k) {
      const double g = normal();
      chisq += g * g;
    }
    const double frac = df - whole;
    if (frac > 0.0) {
      // Gamma(frac/2, 2) tail by Ahrens-Dieter; df is integral in all
      // shipped configurations so this branch is rarely taken.
      chisq += 2.0 * gamma_small(frac / 2.0);
    }
    return normal() / std::sqrt(chisq / df);
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  double gamma_small(double shape) {
    // Ahrens-Dieter for shape < 1.
    const double e = 2.718281828459045;
    const double b = (shape + e) / e;
    for (;;) {
      const double u = uniform();
      const double p = b * u;
      if (p <= 1.0) {
        const double x = std::pow(p, 1.0 / shape);
        if (uniform() <= std::exp(-x)) return x;
      } else {
        const double x = -std::log((b - p) / shape);
        if (uniform() <= std::pow(x, shape - 1.0)) return x;
      }
    }
  }

  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace picmatch

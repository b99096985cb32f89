#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace relattr {

/// Seeded PRNG with self-contained uniform/normal transforms.
/// std::mt19937_64 output is fully specified by the standard; the
/// distributions here avoid the implementation-defined std ones so
/// fixtures regenerate identically everywhere.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller; consumes two uniforms per call.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.28318530717958647692 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

  private:
    std::mt19937_64 gen_;
};

}  // namespace relattr

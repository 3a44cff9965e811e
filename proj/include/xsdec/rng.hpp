#pragma once

#include <cmath>
#include <cstdint>

namespace xsdec {

// Counter-based pseudo-random generator (SplitMix64 output function over a
// per-stream key plus a running counter). Streams derived from the same seed
// with distinct stream ids are statistically independent, and a stream's
// output depends only on (seed, stream, number of draws so far) -- never on
// which thread advanced it. One stream must be owned by one thread at a time.
class CounterRng {
  public:
    CounterRng() : CounterRng(0, 0) {}
    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : key_(mix(mix(seed + 0x9E3779B97F4A7C15ull) ^ mix(stream + 0xBF58476D1CE4E5B9ull))),
          counter_(0) {}

    std::uint64_t next_u64() {
        std::uint64_t z = key_ + counter_ * 0x9E3779B97F4A7C15ull;
        ++counter_;
        return mix(z);
    }

    // Uniform on the open interval (0, 1): 53 random bits centered in the bin.
    double uniform01() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Standard normal via Box-Muller; the second variate of each pair is cached.
    double normal01() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        double radius = std::sqrt(-2.0 * std::log(u1));
        double angle = 6.283185307179586476925286766559 * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

    double normal(double mu, double sigma) { return mu + sigma * normal01(); }

    // Marsaglia-Tsang squeeze method; exact for all shape > 0 (the shape < 1
    // case uses the standard power-of-uniform boost).
    double gamma(double shape, double scale) {
        if (shape < 1.0) {
            double u = uniform01();
            return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
        }
        double d = shape - 1.0 / 3.0;
        double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = normal01();
            double t = 1.0 + c * x;
            if (t <= 0.0) continue;
            double v = t * t * t;
            double u = uniform01();
            double x2 = x * x;
            if (u < 1.0 - 0.0331 * x2 * x2 ||
                std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) {
                return d * v * scale;
            }
        }
    }

  private:
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ull;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBull;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t key_;
    std::uint64_t counter_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace xsdec

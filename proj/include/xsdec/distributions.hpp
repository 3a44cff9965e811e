#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "xsdec/errors.hpp"
#include "xsdec/rng.hpp"

namespace xsdec {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

enum class Dist { Uniform, Normal, Gamma };

// One prior density family. Parameter meaning depends on kind:
//   Uniform: a = lower bound, b = upper bound
//   Normal:  a = mean,        b = standard deviation
//   Gamma:   a = shape kappa, b = scale theta
struct DistributionSpec {
    Dist kind = Dist::Uniform;
    double a = 0.0;
    double b = 1.0;

    static DistributionSpec uniform(double lo, double hi) { return {Dist::Uniform, lo, hi}; }
    static DistributionSpec normal(double mu, double sigma) { return {Dist::Normal, mu, sigma}; }
    static DistributionSpec gamma(double shape, double scale) { return {Dist::Gamma, shape, scale}; }

    bool valid() const {
        switch (kind) {
            case Dist::Uniform: return a < b;
            case Dist::Normal: return b > 0.0 && std::isfinite(a) && std::isfinite(b);
            case Dist::Gamma: return a > 0.0 && b > 0.0 && std::isfinite(a) && std::isfinite(b);
        }
        return false;
    }

    friend bool operator==(const DistributionSpec&, const DistributionSpec&) = default;
};

inline const char* dist_name(Dist d) {
    switch (d) {
        case Dist::Uniform: return "uniform";
        case Dist::Normal: return "normal";
        case Dist::Gamma: return "gamma";
    }
    return "?";
}

// Natural-log density; -inf outside the support.
inline double log_density(const DistributionSpec& spec, double x) {
    if (std::isnan(x)) throw invalid_input("log_density: NaN input");
    if (!spec.valid()) throw invalid_input("log_density: invalid distribution parameters");
    switch (spec.kind) {
        case Dist::Uniform:
            return (x < spec.a || x > spec.b) ? kNegInf : -std::log(spec.b - spec.a);
        case Dist::Normal: {
            double z = (x - spec.a) / spec.b;
            return -0.5 * std::log(2.0 * M_PI * spec.b * spec.b) - 0.5 * z * z;
        }
        case Dist::Gamma: {
            if (x <= 0.0) return kNegInf;
            return -std::lgamma(spec.a) - spec.a * std::log(spec.b) +
                   (spec.a - 1.0) * std::log(x) - x / spec.b;
        }
    }
    return kNegInf;
}

inline double sample(const DistributionSpec& spec, CounterRng& rng) {
    if (!spec.valid()) throw invalid_input("sample: invalid distribution parameters");
    switch (spec.kind) {
        case Dist::Uniform: return rng.uniform(spec.a, spec.b);
        case Dist::Normal: return rng.normal(spec.a, spec.b);
        case Dist::Gamma: return rng.gamma(spec.a, spec.b);
    }
    return 0.0;
}

// Characteristic scale used to seed Metropolis proposal widths: range width
// for uniforms, sigma for normals, theta*sqrt(kappa) (the standard deviation)
// for gammas.
inline double scale_of(const DistributionSpec& spec) {
    switch (spec.kind) {
        case Dist::Uniform: return spec.b - spec.a;
        case Dist::Normal: return spec.b;
        case Dist::Gamma: return spec.b * std::sqrt(spec.a);
    }
    return 1.0;
}

inline double mean_of(const DistributionSpec& spec) {
    switch (spec.kind) {
        case Dist::Uniform: return 0.5 * (spec.a + spec.b);
        case Dist::Normal: return spec.a;
        case Dist::Gamma: return spec.a * spec.b;
    }
    return 0.0;
}

} // namespace xsdec

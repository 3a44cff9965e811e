#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "xsdec/errors.hpp"

namespace xsdec {

inline constexpr double kFourLn2 = 2.7725887222397812376689284858327; // 4 ln 2

// Absorption edge plus white line. The edge is an arctangent step of height H
// centered at E0 with width Gamma; the white line is a Gaussian of height A
// and FWHM omega centered at E0 + DeltaE.
struct StepParams {
    double H = 0.0;
    double E0 = 0.0;
    double Gamma = 1.0;
    double A = 0.0;
    double DeltaE = 0.0;
    double omega = 1.0;
};

// One Gaussian peak. dE is the signed center offset from the edge position;
// W is a full width at half maximum.
struct Peak {
    double F = 0.0;
    double dE = 0.0;
    double W = 1.0;
};

// Peak-count configuration. The two-population model uses (k1, k2) for the
// below/above-edge populations; the single-population model carries all peaks
// in the first slot as (k, 0).
struct PeakConfig {
    int k1 = 0;
    int k2 = 0;
    int total() const { return k1 + k2; }
    friend bool operator==(const PeakConfig&, const PeakConfig&) = default;
};

struct SpectralParams {
    StepParams step;
    std::vector<Peak> below;
    std::vector<Peak> above;

    PeakConfig config() const {
        return {static_cast<int>(below.size()), static_cast<int>(above.size())};
    }
};

struct Dataset {
    std::vector<double> energy;
    std::vector<double> intensity;

    std::size_t size() const { return energy.size(); }
};

namespace detail {

inline bool finite(double x) { return std::isfinite(x); }

inline void require_finite_step(const StepParams& p) {
    if (!(finite(p.H) && finite(p.E0) && finite(p.Gamma) && finite(p.A) &&
          finite(p.DeltaE) && finite(p.omega))) {
        throw invalid_input("step parameters must be finite");
    }
}

inline void require_finite_params(const SpectralParams& p) {
    require_finite_step(p.step);
    for (const auto* pop : {&p.below, &p.above}) {
        for (const Peak& pk : *pop) {
            if (!(finite(pk.F) && finite(pk.dE) && finite(pk.W))) {
                throw invalid_input("peak parameters must be finite");
            }
        }
    }
}

} // namespace detail

// Gaussian lineshape in the FWHM convention: value is F/2 at distance W/2
// from the center.
inline double gaussian_fwhm(double F, double center, double W, double E) {
    double t = (E - center) / W;
    return F * std::exp(-kFourLn2 * t * t);
}

inline double evaluate_step(const StepParams& p, double E) {
    detail::require_finite_step(p);
    if (!detail::finite(E)) throw invalid_input("energy must be finite");
    double edge = p.H * (0.5 + std::atan((E - p.E0) / (p.Gamma * 0.5)) / M_PI);
    double wl = gaussian_fwhm(p.A, p.E0 + p.DeltaE, p.omega, E);
    return edge + wl;
}

inline double evaluate_peaks(const SpectralParams& params, double E) {
    detail::require_finite_params(params);
    if (!detail::finite(E)) throw invalid_input("energy must be finite");
    double sum = 0.0;
    for (const auto* pop : {&params.below, &params.above}) {
        for (const Peak& pk : *pop) {
            sum += gaussian_fwhm(pk.F, params.step.E0 + pk.dE, pk.W, E);
        }
    }
    return sum;
}

inline double evaluate_model(const SpectralParams& params, double E) {
    return evaluate_step(params.step, E) + evaluate_peaks(params, E);
}

// Mean squared residual over the dataset divided by two:
//   (1/2N) * sum_i (I_i - f(E_i))^2
inline double error_function(const SpectralParams& params, const Dataset& data) {
    if (data.size() == 0) throw invalid_input("error_function: empty dataset");
    if (data.energy.size() != data.intensity.size()) {
        throw invalid_input("error_function: energy/intensity length mismatch");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        double r = data.intensity[i] - evaluate_model(params, data.energy[i]);
        sum += r * r;
    }
    return sum / (2.0 * static_cast<double>(data.size()));
}

} // namespace xsdec

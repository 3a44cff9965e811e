#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "xsdec/priors.hpp"
#include "xsdec/rng.hpp"
#include "xsdec/spectrum.hpp"

namespace xsdec {

// Ground truth plus measurement design for synthesizing a noisy spectrum.
struct TruthSpec {
    SpectralParams params;
    double b_true = 3000.0;
    EnergyWindow window;
    std::size_t n_points = 703;
    std::uint64_t noise_seed = 1;
    bool noiseless = false;
};

namespace detail {

inline bool well_separated(const SpectralParams& p, double min_gap) {
    std::vector<double> centers;
    for (const Peak& pk : p.below) centers.push_back(p.step.E0 + pk.dE);
    for (const Peak& pk : p.above) centers.push_back(p.step.E0 + pk.dE);
    for (std::size_t i = 0; i < centers.size(); ++i) {
        for (std::size_t j = i + 1; j < centers.size(); ++j) {
            if (std::abs(centers[i] - centers[j]) < min_gap) return false;
        }
    }
    return true;
}

} // namespace detail

inline constexpr std::uint64_t kDefaultTruthSeed = 4;
inline constexpr double kTruthMinSeparation = 1.5; // eV between any two peak centers

// Fixed-seed draw from the two-population priors with the edge pinned at its
// prior mean; redrawn until every pair of peak centers is at least
// kTruthMinSeparation apart.
inline SpectralParams draw_truth_params(PeakConfig peaks, EnergyWindow window,
                                        std::uint64_t seed) {
    ModelSpec model = make_model(Regime::Proposed, peaks, window);
    CounterRng rng(seed, 0x54525554ull);
    for (;;) {
        SpectralParams cand = sample_prior(model, rng);
        cand.step.E0 = model.priors.step.E0.a; // pin the edge at the prior mean
        if (detail::well_separated(cand, kTruthMinSeparation)) return cand;
    }
}

inline TruthSpec default_truth() {
    TruthSpec spec;
    spec.window = EnergyWindow{530.0, 590.0};
    spec.params = draw_truth_params(PeakConfig{5, 5}, spec.window, kDefaultTruthSeed);
    spec.b_true = 3000.0;
    spec.n_points = 703;
    spec.noise_seed = 1;
    return spec;
}

// I_i = f(E_i; truth) + eps_i with iid Gaussian noise of variance 1/b_true on
// an even grid across the window. Bit-reproducible for a fixed noise seed.
inline Dataset synthesize(const TruthSpec& spec) {
    if (spec.n_points < 1) throw invalid_input("synthesize: need at least one point");
    if (!(spec.b_true > 0.0)) throw invalid_input("synthesize: noise precision must be positive");
    Dataset data;
    data.energy.resize(spec.n_points);
    data.intensity.resize(spec.n_points);
    double lo = spec.window.lo, hi = spec.window.hi;
    double h = spec.n_points > 1 ? (hi - lo) / static_cast<double>(spec.n_points - 1) : 0.0;
    CounterRng rng(spec.noise_seed, 0x4E4F495345ull);
    double sigma = spec.noiseless ? 0.0 : 1.0 / std::sqrt(spec.b_true);
    for (std::size_t i = 0; i < spec.n_points; ++i) {
        double e = lo + h * static_cast<double>(i);
        data.energy[i] = e;
        double noise = spec.noiseless ? 0.0 : sigma * rng.normal01();
        data.intensity[i] = evaluate_model(spec.params, e) + noise;
    }
    return data;
}

} // namespace xsdec

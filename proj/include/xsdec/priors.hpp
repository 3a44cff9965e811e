#pragma once

#include <string>
#include <vector>

#include "xsdec/distributions.hpp"
#include "xsdec/spectrum.hpp"

namespace xsdec {

// Proposed: two peak populations split at the edge, positions parametrized as
// signed offsets from E0, population-specific height/width priors.
// Conventional: one undifferentiated population, absolute positions, a single
// role set shared by every peak.
enum class Regime { Conventional, Proposed };

inline const char* regime_name(Regime r) {
    return r == Regime::Proposed ? "proposed" : "conventional";
}

struct StepPriors {
    DistributionSpec H = DistributionSpec::uniform(0.8, 0.9);
    DistributionSpec E0 = DistributionSpec::normal(543.1, 2.0);
    DistributionSpec Gamma = DistributionSpec::uniform(0.5, 1.4);
    DistributionSpec A = DistributionSpec::gamma(2.6, 0.6);
    DistributionSpec DeltaE = DistributionSpec::normal(0.0, 2.0);
    DistributionSpec omega = DistributionSpec::uniform(2.0, 4.0);

    friend bool operator==(const StepPriors&, const StepPriors&) = default;
};

// Priors for one peak population. `pos` is over the signed offset dE in the
// proposed regime and over the absolute position E in the conventional one.
struct PeakRolePriors {
    DistributionSpec F;
    DistributionSpec pos;
    DistributionSpec W;

    friend bool operator==(const PeakRolePriors&, const PeakRolePriors&) = default;
};

struct PriorSet {
    StepPriors step;
    PeakRolePriors below;
    PeakRolePriors above;

    friend bool operator==(const PriorSet&, const PriorSet&) = default;
};

struct EnergyWindow {
    double lo = 530.0;
    double hi = 590.0;

    friend bool operator==(const EnergyWindow&, const EnergyWindow&) = default;
};

struct ModelSpec {
    Regime regime = Regime::Proposed;
    PeakConfig peaks;
    PriorSet priors;
    EnergyWindow window;
};

// Offset supports are anchored to the E0 prior: a below-edge peak may sit as
// far as sigma_E0 below the window start once the edge itself has wandered,
// and symmetrically above.
inline PriorSet proposed_priors(EnergyWindow w, StepPriors step = {}) {
    PriorSet p;
    p.step = step;
    double mu = step.E0.a, sigma = step.E0.b;
    p.below = {DistributionSpec::gamma(2.6, 0.6),
               DistributionSpec::uniform(w.lo - mu - sigma, 0.0),
               DistributionSpec::gamma(3.0, 1.0)};
    p.above = {DistributionSpec::gamma(4.0, 0.1),
               DistributionSpec::uniform(0.0, w.hi - mu + sigma),
               DistributionSpec::gamma(11.0, 0.8)};
    return p;
}

inline PriorSet conventional_priors(EnergyWindow w, StepPriors step = {}) {
    PriorSet p;
    p.step = step;
    PeakRolePriors role{DistributionSpec::uniform(0.0, 1.4),
                        DistributionSpec::uniform(w.lo, w.hi),
                        DistributionSpec::uniform(0.5, 15.0)};
    p.below = role;
    p.above = role;
    return p;
}

inline PriorSet default_hyperparams(Regime regime, EnergyWindow w = {}) {
    return regime == Regime::Proposed ? proposed_priors(w) : conventional_priors(w);
}

inline ModelSpec make_model(Regime regime, PeakConfig peaks, EnergyWindow w = {}) {
    ModelSpec m;
    m.regime = regime;
    m.peaks = peaks;
    m.window = w;
    m.priors = default_hyperparams(regime, w);
    return m;
}

// Conventional models keep every peak in the first population slot.
inline ModelSpec make_conventional_model(int k, EnergyWindow w = {}) {
    return make_model(Regime::Conventional, PeakConfig{k, 0}, w);
}

// ---------------------------------------------------------------------------
// Flat parameter layout
//
// Canonical order: the six step parameters, then below-edge peaks (F, pos, W
// per peak), then above-edge peaks. Positions are exposed in each regime's
// natural coordinate: signed offset dE for proposed, absolute E for
// conventional.
// ---------------------------------------------------------------------------

enum class ParamKind {
    StepH, StepE0, StepGamma, StepA, StepDeltaE, StepOmega,
    PeakF, PeakPos, PeakW
};

struct ParamRef {
    ParamKind kind;
    int pop = 0;   // 0 = below, 1 = above
    int index = 0; // peak index within its population
};

inline int param_count(const PeakConfig& peaks) { return 6 + 3 * peaks.total(); }

inline std::vector<ParamRef> param_layout(const PeakConfig& peaks) {
    std::vector<ParamRef> out;
    out.reserve(param_count(peaks));
    out.push_back({ParamKind::StepH});
    out.push_back({ParamKind::StepE0});
    out.push_back({ParamKind::StepGamma});
    out.push_back({ParamKind::StepA});
    out.push_back({ParamKind::StepDeltaE});
    out.push_back({ParamKind::StepOmega});
    for (int pop = 0; pop < 2; ++pop) {
        int n = pop == 0 ? peaks.k1 : peaks.k2;
        for (int k = 0; k < n; ++k) {
            out.push_back({ParamKind::PeakF, pop, k});
            out.push_back({ParamKind::PeakPos, pop, k});
            out.push_back({ParamKind::PeakW, pop, k});
        }
    }
    return out;
}

inline std::string param_name(const ModelSpec& model, const ParamRef& ref) {
    switch (ref.kind) {
        case ParamKind::StepH: return "step.H";
        case ParamKind::StepE0: return "step.E0";
        case ParamKind::StepGamma: return "step.Gamma";
        case ParamKind::StepA: return "step.A";
        case ParamKind::StepDeltaE: return "step.DeltaE";
        case ParamKind::StepOmega: return "step.omega";
        default: break;
    }
    std::string base;
    if (model.regime == Regime::Conventional) {
        base = "peak." + std::to_string(ref.index);
    } else {
        base = (ref.pop == 0 ? "below." : "above.") + std::to_string(ref.index);
    }
    switch (ref.kind) {
        case ParamKind::PeakF: return base + ".F";
        case ParamKind::PeakPos:
            return base + (model.regime == Regime::Conventional ? ".E" : ".dE");
        case ParamKind::PeakW: return base + ".W";
        default: break;
    }
    return base;
}

inline const DistributionSpec& prior_for(const ModelSpec& model, const ParamRef& ref) {
    const PriorSet& p = model.priors;
    switch (ref.kind) {
        case ParamKind::StepH: return p.step.H;
        case ParamKind::StepE0: return p.step.E0;
        case ParamKind::StepGamma: return p.step.Gamma;
        case ParamKind::StepA: return p.step.A;
        case ParamKind::StepDeltaE: return p.step.DeltaE;
        case ParamKind::StepOmega: return p.step.omega;
        default: break;
    }
    const PeakRolePriors& role = ref.pop == 0 ? p.below : p.above;
    switch (ref.kind) {
        case ParamKind::PeakF: return role.F;
        case ParamKind::PeakW: return role.W;
        default: return role.pos;
    }
}

inline double get_param(const SpectralParams& params, const ModelSpec& model, const ParamRef& ref) {
    switch (ref.kind) {
        case ParamKind::StepH: return params.step.H;
        case ParamKind::StepE0: return params.step.E0;
        case ParamKind::StepGamma: return params.step.Gamma;
        case ParamKind::StepA: return params.step.A;
        case ParamKind::StepDeltaE: return params.step.DeltaE;
        case ParamKind::StepOmega: return params.step.omega;
        default: break;
    }
    const Peak& pk = ref.pop == 0 ? params.below[ref.index] : params.above[ref.index];
    switch (ref.kind) {
        case ParamKind::PeakF: return pk.F;
        case ParamKind::PeakW: return pk.W;
        default:
            return model.regime == Regime::Conventional ? params.step.E0 + pk.dE : pk.dE;
    }
}

inline void set_param(SpectralParams& params, const ModelSpec& model, const ParamRef& ref, double v) {
    switch (ref.kind) {
        case ParamKind::StepH: params.step.H = v; return;
        case ParamKind::StepE0: params.step.E0 = v; return;
        case ParamKind::StepGamma: params.step.Gamma = v; return;
        case ParamKind::StepA: params.step.A = v; return;
        case ParamKind::StepDeltaE: params.step.DeltaE = v; return;
        case ParamKind::StepOmega: params.step.omega = v; return;
        default: break;
    }
    Peak& pk = ref.pop == 0 ? params.below[ref.index] : params.above[ref.index];
    switch (ref.kind) {
        case ParamKind::PeakF: pk.F = v; return;
        case ParamKind::PeakW: pk.W = v; return;
        default:
            pk.dE = model.regime == Regime::Conventional ? v - params.step.E0 : v;
            return;
    }
}

inline void require_shape(const ModelSpec& model, const SpectralParams& params) {
    if (params.config() != model.peaks) {
        throw invalid_input("parameter vector shape does not match the model's peak configuration");
    }
}

// Sum of per-component log densities, each evaluated in its regime's natural
// coordinate. In the proposed regime offsets make the step and peak blocks
// independent; in the conventional regime the density is over absolute
// positions, so moving E0 with offsets held fixed does change it.
inline double log_prior(const ModelSpec& model, const SpectralParams& params) {
    require_shape(model, params);
    double sum = 0.0;
    for (const ParamRef& ref : param_layout(model.peaks)) {
        sum += log_density(prior_for(model, ref), get_param(params, model, ref));
        if (sum == kNegInf) return kNegInf;
    }
    return sum;
}

inline SpectralParams sample_prior(const ModelSpec& model, CounterRng& rng) {
    SpectralParams out;
    out.step.H = sample(model.priors.step.H, rng);
    out.step.E0 = sample(model.priors.step.E0, rng);
    out.step.Gamma = sample(model.priors.step.Gamma, rng);
    out.step.A = sample(model.priors.step.A, rng);
    out.step.DeltaE = sample(model.priors.step.DeltaE, rng);
    out.step.omega = sample(model.priors.step.omega, rng);
    out.below.resize(model.peaks.k1);
    out.above.resize(model.peaks.k2);
    for (int pop = 0; pop < 2; ++pop) {
        const PeakRolePriors& role = pop == 0 ? model.priors.below : model.priors.above;
        auto& peaks = pop == 0 ? out.below : out.above;
        for (Peak& pk : peaks) {
            pk.F = sample(role.F, rng);
            double pos = sample(role.pos, rng);
            pk.dE = model.regime == Regime::Conventional ? pos - out.step.E0 : pos;
            pk.W = sample(role.W, rng);
        }
    }
    return out;
}

// Structural invariants of a parameter vector under a model: positive widths
// and heights where required, and in the proposed regime the sign constraint
// that population membership implies.
inline bool params_valid(const ModelSpec& model, const SpectralParams& p) {
    if (p.config() != model.peaks) return false;
    if (!(p.step.Gamma > 0.0 && p.step.omega > 0.0 && p.step.H >= 0.0 && p.step.A >= 0.0)) {
        return false;
    }
    for (int pop = 0; pop < 2; ++pop) {
        const auto& peaks = pop == 0 ? p.below : p.above;
        for (const Peak& pk : peaks) {
            if (!(pk.F > 0.0 && pk.W > 0.0)) return false;
            if (!std::isfinite(p.step.E0 + pk.dE)) return false;
            if (model.regime == Regime::Proposed) {
                if (pop == 0 && !(pk.dE < 0.0)) return false;
                if (pop == 1 && !(pk.dE > 0.0)) return false;
            }
        }
    }
    return true;
}

inline void validate_model(const ModelSpec& model) {
    if (model.peaks.k1 < 0 || model.peaks.k2 < 0) {
        throw config_error("peak counts must be non-negative");
    }
    if (!(model.window.lo < model.window.hi)) {
        throw config_error("energy window must satisfy lo < hi");
    }
    for (const ParamRef& ref : param_layout(model.peaks)) {
        if (!prior_for(model, ref).valid()) {
            throw config_error("invalid prior for parameter " + param_name(model, ref));
        }
    }
    if (model.regime == Regime::Conventional && !(model.priors.below == model.priors.above)) {
        throw config_error("conventional regime requires a single peak role set");
    }
}

} // namespace xsdec

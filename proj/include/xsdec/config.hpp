#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>

#include <json.hpp>

#include "xsdec/csv.hpp"
#include "xsdec/ladder.hpp"
#include "xsdec/priors.hpp"
#include "xsdec/sampler.hpp"
#include "xsdec/synthetic.hpp"

namespace xsdec {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// JSON encodings shared by run configs and emitted reports.
// ---------------------------------------------------------------------------

inline json to_json(const DistributionSpec& d) {
    return json{{"dist", dist_name(d.kind)}, {"a", d.a}, {"b", d.b}};
}

inline DistributionSpec distribution_from_json(const json& j) {
    std::string kind = j.at("dist").get<std::string>();
    DistributionSpec d;
    if (kind == "uniform") {
        d.kind = Dist::Uniform;
    } else if (kind == "normal") {
        d.kind = Dist::Normal;
    } else if (kind == "gamma") {
        d.kind = Dist::Gamma;
    } else {
        throw config_error("unknown distribution kind '" + kind + "'");
    }
    d.a = j.at("a").get<double>();
    d.b = j.at("b").get<double>();
    if (!d.valid()) throw config_error("invalid parameters for " + kind + " distribution");
    return d;
}

inline json to_json(const SpectralParams& p) {
    json step{{"H", p.step.H},           {"E0", p.step.E0},   {"Gamma", p.step.Gamma},
              {"A", p.step.A},           {"DeltaE", p.step.DeltaE}, {"omega", p.step.omega}};
    json below = json::array();
    for (const Peak& pk : p.below) below.push_back({{"F", pk.F}, {"dE", pk.dE}, {"W", pk.W}});
    json above = json::array();
    for (const Peak& pk : p.above) above.push_back({{"F", pk.F}, {"dE", pk.dE}, {"W", pk.W}});
    return json{{"step", step}, {"below", below}, {"above", above}};
}

inline SpectralParams params_from_json(const json& j) {
    SpectralParams p;
    const json& s = j.at("step");
    p.step.H = s.at("H").get<double>();
    p.step.E0 = s.at("E0").get<double>();
    p.step.Gamma = s.at("Gamma").get<double>();
    p.step.A = s.at("A").get<double>();
    p.step.DeltaE = s.at("DeltaE").get<double>();
    p.step.omega = s.at("omega").get<double>();
    for (const json& e : j.at("below")) {
        p.below.push_back({e.at("F").get<double>(), e.at("dE").get<double>(), e.at("W").get<double>()});
    }
    for (const json& e : j.at("above")) {
        p.above.push_back({e.at("F").get<double>(), e.at("dE").get<double>(), e.at("W").get<double>()});
    }
    return p;
}

inline json to_json(const TruthSpec& t) {
    return json{{"params", to_json(t.params)},
                {"b_true", t.b_true},
                {"window", {t.window.lo, t.window.hi}},
                {"n_points", t.n_points},
                {"noise_seed", t.noise_seed},
                {"noiseless", t.noiseless}};
}

inline TruthSpec truth_from_json(const json& j) {
    TruthSpec t;
    t.params = params_from_json(j.at("params"));
    t.b_true = j.at("b_true").get<double>();
    t.window = {j.at("window").at(0).get<double>(), j.at("window").at(1).get<double>()};
    t.n_points = j.at("n_points").get<std::size_t>();
    t.noise_seed = j.at("noise_seed").get<std::uint64_t>();
    t.noiseless = j.at("noiseless").get<bool>();
    return t;
}

// ---------------------------------------------------------------------------
// Run configuration: one JSON file of record per run, flag overrides on top.
// ---------------------------------------------------------------------------

struct LadderSpec {
    int L = 92;
    double xi = 1.18;
    double anchor = 3000.0;
};

struct GridSpec {
    int k1_min = 0, k1_max = 8; // proposed
    int k2_min = 0, k2_max = 8;
    int k_min = 1, k_max = 16; // conventional
};

struct TruthConfig {
    int k1 = 5, k2 = 5;
    double b = 3000.0;
    std::size_t n = 703;
    std::uint64_t truth_seed = kDefaultTruthSeed;
    std::uint64_t noise_seed = 1;
    bool noiseless = false;
};

struct RunConfig {
    Regime regime = Regime::Proposed;
    PeakConfig peaks{5, 5};
    GridSpec grid;
    EnergyWindow window;
    LadderSpec ladder;
    SamplerConfig sampler;
    std::map<std::string, DistributionSpec> prior_overrides;
    std::string data_path;
    std::string out_dir = ".";
    TruthConfig truth;
    int diag_rung = 0; // 1-based rung; 0 = ladder anchor
    int diag_max_lag = 500;
    // Optional non-uniform hyperpriors for the peak-count posterior. Keys are
    // "k1,k2" (proposed) or "k" (conventional); rung weights apply to ladder
    // rungs l >= 2 in order.
    std::map<std::string, double> k_weights;
    std::vector<double> b_weights;
};

inline void apply_prior_override(PriorSet& priors, Regime regime, const std::string& key,
                                 const DistributionSpec& d) {
    if (key == "step.H") priors.step.H = d;
    else if (key == "step.E0") priors.step.E0 = d;
    else if (key == "step.Gamma") priors.step.Gamma = d;
    else if (key == "step.A") priors.step.A = d;
    else if (key == "step.DeltaE") priors.step.DeltaE = d;
    else if (key == "step.omega") priors.step.omega = d;
    else if (key == "below.F") priors.below.F = d;
    else if (key == "below.pos") priors.below.pos = d;
    else if (key == "below.W") priors.below.W = d;
    else if (key == "above.F") priors.above.F = d;
    else if (key == "above.pos") priors.above.pos = d;
    else if (key == "above.W") priors.above.W = d;
    else if (key == "peak.F" && regime == Regime::Conventional) priors.below.F = priors.above.F = d;
    else if (key == "peak.E" && regime == Regime::Conventional) priors.below.pos = priors.above.pos = d;
    else if (key == "peak.W" && regime == Regime::Conventional) priors.below.W = priors.above.W = d;
    else throw config_error("unknown prior override key '" + key + "'");
}

inline ModelSpec build_model(const RunConfig& cfg) {
    PeakConfig peaks = cfg.regime == Regime::Conventional ? PeakConfig{cfg.peaks.total(), 0}
                                                          : cfg.peaks;
    ModelSpec model = make_model(cfg.regime, peaks, cfg.window);
    for (const auto& [key, dist] : cfg.prior_overrides) {
        apply_prior_override(model.priors, cfg.regime, key, dist);
    }
    validate_model(model);
    return model;
}

inline ReplicaLadder build_ladder(const RunConfig& cfg) {
    return build_ladder(cfg.ladder.L, cfg.ladder.xi, cfg.ladder.anchor);
}

inline RunConfig config_from_json(const json& j) {
    RunConfig cfg;
    if (j.contains("model")) {
        std::string m = j.at("model").get<std::string>();
        if (m == "proposed") cfg.regime = Regime::Proposed;
        else if (m == "conventional") cfg.regime = Regime::Conventional;
        else throw config_error("model must be 'proposed' or 'conventional'");
    }
    if (j.contains("k1")) cfg.peaks.k1 = j.at("k1").get<int>();
    if (j.contains("k2")) cfg.peaks.k2 = j.at("k2").get<int>();
    if (j.contains("k")) cfg.peaks = {j.at("k").get<int>(), 0};
    if (j.contains("window")) {
        cfg.window = {j.at("window").at(0).get<double>(), j.at("window").at(1).get<double>()};
    }
    if (j.contains("grid")) {
        const json& g = j.at("grid");
        if (g.contains("k1")) {
            cfg.grid.k1_min = g.at("k1").at(0).get<int>();
            cfg.grid.k1_max = g.at("k1").at(1).get<int>();
        }
        if (g.contains("k2")) {
            cfg.grid.k2_min = g.at("k2").at(0).get<int>();
            cfg.grid.k2_max = g.at("k2").at(1).get<int>();
        }
        if (g.contains("k")) {
            cfg.grid.k_min = g.at("k").at(0).get<int>();
            cfg.grid.k_max = g.at("k").at(1).get<int>();
        }
    }
    if (j.contains("ladder")) {
        const json& l = j.at("ladder");
        if (l.contains("L")) cfg.ladder.L = l.at("L").get<int>();
        if (l.contains("xi")) cfg.ladder.xi = l.at("xi").get<double>();
        if (l.contains("anchor")) cfg.ladder.anchor = l.at("anchor").get<double>();
    }
    if (j.contains("sampler")) {
        const json& s = j.at("sampler");
        if (s.contains("mcs")) cfg.sampler.total_mcs = s.at("mcs").get<long>();
        if (s.contains("burnin")) cfg.sampler.burnin_mcs = s.at("burnin").get<long>();
        if (s.contains("sweeps_per_mcs")) cfg.sampler.sweeps_per_mcs = s.at("sweeps_per_mcs").get<int>();
        if (s.contains("thin")) cfg.sampler.thin = s.at("thin").get<long>();
        if (s.contains("seed")) cfg.sampler.seed = s.at("seed").get<std::uint64_t>();
        if (s.contains("threads")) cfg.sampler.threads = s.at("threads").get<int>();
        if (s.contains("tune")) cfg.sampler.tune = s.at("tune").get<bool>();
        if (s.contains("step_fraction")) {
            cfg.sampler.initial_step_fraction = s.at("step_fraction").get<double>();
        }
    }
    if (j.contains("priors")) {
        for (const auto& [key, value] : j.at("priors").items()) {
            cfg.prior_overrides[key] = distribution_from_json(value);
        }
    }
    if (j.contains("data")) cfg.data_path = j.at("data").get<std::string>();
    if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
    if (j.contains("truth")) {
        const json& t = j.at("truth");
        if (t.contains("k1")) cfg.truth.k1 = t.at("k1").get<int>();
        if (t.contains("k2")) cfg.truth.k2 = t.at("k2").get<int>();
        if (t.contains("b")) cfg.truth.b = t.at("b").get<double>();
        if (t.contains("n")) cfg.truth.n = t.at("n").get<std::size_t>();
        if (t.contains("truth_seed")) cfg.truth.truth_seed = t.at("truth_seed").get<std::uint64_t>();
        if (t.contains("noise_seed")) cfg.truth.noise_seed = t.at("noise_seed").get<std::uint64_t>();
        if (t.contains("noiseless")) cfg.truth.noiseless = t.at("noiseless").get<bool>();
    }
    if (j.contains("diag")) {
        const json& d = j.at("diag");
        if (d.contains("rung")) cfg.diag_rung = d.at("rung").get<int>();
        if (d.contains("max_lag")) cfg.diag_max_lag = d.at("max_lag").get<int>();
    }
    if (j.contains("hyperprior")) {
        const json& h = j.at("hyperprior");
        if (h.contains("k_weights")) {
            for (const auto& [key, value] : h.at("k_weights").items()) {
                cfg.k_weights[key] = value.get<double>();
            }
        }
        if (h.contains("b_weights")) {
            cfg.b_weights = h.at("b_weights").get<std::vector<double>>();
        }
    }
    return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw config_error("config parse failure in " + path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

// Build the truth spec a config describes. The (5,5) defaults reproduce the
// shipped ground truth exactly.
inline TruthSpec build_truth(const RunConfig& cfg) {
    TruthSpec spec;
    spec.window = cfg.window;
    spec.params = draw_truth_params({cfg.truth.k1, cfg.truth.k2}, cfg.window, cfg.truth.truth_seed);
    spec.b_true = cfg.truth.b;
    spec.n_points = cfg.truth.n;
    spec.noise_seed = cfg.truth.noise_seed;
    spec.noiseless = cfg.truth.noiseless;
    return spec;
}

} // namespace xsdec

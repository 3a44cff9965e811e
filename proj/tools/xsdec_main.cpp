// Command-line front end: synthesize spectra, run EMC fits, select models by
// Bayesian free energy, and emit sampler diagnostics. All outputs are plain
// CSV/JSON for external plotting.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "xsdec/config.hpp"
#include "xsdec/csv.hpp"
#include "xsdec/diagnostics.hpp"
#include "xsdec/evidence.hpp"
#include "xsdec/sampler.hpp"
#include "xsdec/synthetic.hpp"

namespace fs = std::filesystem;
using namespace xsdec;

namespace {

struct CliOverrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::string> model;
    std::optional<int> k1, k2, k;
    std::optional<std::string> ladder;
    std::optional<long> mcs, burnin;
    std::optional<long> thin;
    std::optional<int> threads;
    std::optional<std::string> data;
    bool quiet = false;
    bool json_errors = false;
};

void add_common_options(CLI::App* cmd, CliOverrides& o) {
    cmd->add_option("--config", o.config_path, "JSON run configuration file");
    cmd->add_option("--seed", o.seed, "RNG seed");
    cmd->add_option("--out-dir", o.out_dir, "output directory");
    cmd->add_option("--model", o.model, "model regime: proposed|conventional");
    cmd->add_option("--k1", o.k1, "below-edge peak count");
    cmd->add_option("--k2", o.k2, "above-edge peak count");
    cmd->add_option("--k", o.k, "total peak count (conventional regime)");
    cmd->add_option("--ladder", o.ladder, "ladder as L,xi,anchor");
    cmd->add_option("--mcs", o.mcs, "total Monte Carlo steps");
    cmd->add_option("--burnin", o.burnin, "burn-in Monte Carlo steps");
    cmd->add_option("--thin", o.thin, "record thinning interval");
    cmd->add_option("--threads", o.threads, "worker threads for replica sweeps");
    cmd->add_option("--data", o.data, "input dataset CSV");
    cmd->add_flag("--quiet", o.quiet, "suppress progress output");
    cmd->add_flag("--json-errors", o.json_errors, "emit errors as JSON on stderr");
}

RunConfig resolve_config(const CliOverrides& o) {
    RunConfig cfg;
    if (!o.config_path.empty()) cfg = load_config(o.config_path);
    if (o.model) {
        if (*o.model == "proposed") cfg.regime = Regime::Proposed;
        else if (*o.model == "conventional") cfg.regime = Regime::Conventional;
        else throw config_error("--model must be proposed or conventional");
    }
    if (o.k1) cfg.peaks.k1 = *o.k1;
    if (o.k2) cfg.peaks.k2 = *o.k2;
    if (o.k) cfg.peaks = {*o.k, 0};
    if (o.ladder) {
        LadderSpec ls;
        if (std::sscanf(o.ladder->c_str(), "%d,%lf,%lf", &ls.L, &ls.xi, &ls.anchor) != 3) {
            throw config_error("--ladder expects L,xi,anchor");
        }
        cfg.ladder = ls;
    }
    if (o.seed) cfg.sampler.seed = *o.seed;
    if (o.mcs) cfg.sampler.total_mcs = *o.mcs;
    if (o.burnin) cfg.sampler.burnin_mcs = *o.burnin;
    if (o.thin) cfg.sampler.thin = *o.thin;
    if (o.threads) cfg.sampler.threads = *o.threads;
    if (o.data) cfg.data_path = *o.data;
    if (o.out_dir) cfg.out_dir = *o.out_dir;
    return cfg;
}

void attach_progress(SamplerConfig& sc, const std::string& tag, bool quiet) {
    if (quiet) return;
    long stride = std::max(1L, sc.total_mcs / 20);
    sc.progress = [tag, stride](long mcs, long total) {
        if (mcs % stride == 0 || mcs == total) {
            std::fprintf(stderr, "[%s] mcs %ld/%ld\n", tag.c_str(), mcs, total);
        }
    };
}

json acceptance_summary(const SampleRecord& rec) {
    json out;
    double att = 0.0, acc = 0.0;
    for (int l = 0; l < rec.L; ++l) {
        for (std::size_t j = 0; j < rec.metropolis_attempts[l].size(); ++j) {
            att += static_cast<double>(rec.metropolis_attempts[l][j]);
            acc += static_cast<double>(rec.metropolis_accepts[l][j]);
        }
    }
    out["metropolis_rate"] = att > 0 ? acc / att : 0.0;
    double xatt = 0.0, xacc = 0.0;
    json pair_rates = json::array();
    for (std::size_t i = 0; i < rec.exchange_attempts.size(); ++i) {
        xatt += static_cast<double>(rec.exchange_attempts[i]);
        xacc += static_cast<double>(rec.exchange_accepts[i]);
        double r = rec.exchange_attempts[i] > 0
                       ? static_cast<double>(rec.exchange_accepts[i]) / rec.exchange_attempts[i]
                       : 0.0;
        pair_rates.push_back(r);
    }
    out["exchange_rate"] = xatt > 0 ? xacc / xatt : 0.0;
    out["exchange_rate_per_pair"] = pair_rates;
    out["max_chi2_drift"] = rec.max_chi2_drift;
    out["max_log_prior_drift"] = rec.max_log_prior_drift;
    return out;
}

Dataset load_data(const RunConfig& cfg) {
    if (cfg.data_path.empty()) throw config_error("no input dataset (use --data or config 'data')");
    return parse_dataset(cfg.data_path);
}

int cmd_generate(const CliOverrides& o) {
    RunConfig cfg = resolve_config(o);
    if (o.seed) cfg.truth.noise_seed = *o.seed;
    if (o.k1) cfg.truth.k1 = *o.k1;
    if (o.k2) cfg.truth.k2 = *o.k2;
    TruthSpec truth = build_truth(cfg);
    Dataset data = synthesize(truth);
    fs::create_directories(cfg.out_dir);
    write_dataset(fs::path(cfg.out_dir) / "dataset.csv", data);
    atomic_write(fs::path(cfg.out_dir) / "truth.json", to_json(truth).dump(2) + "\n");
    if (!o.quiet) {
        std::fprintf(stderr, "[generate] wrote %zu points to %s\n", data.size(),
                     cfg.out_dir.c_str());
    }
    return 0;
}

int cmd_fit(const CliOverrides& o) {
    RunConfig cfg = resolve_config(o);
    Dataset data = load_data(cfg);
    ModelSpec model = build_model(cfg);
    ReplicaLadder ladder = build_ladder(cfg);

    SamplerConfig sc = cfg.sampler;
    sc.record_theta = true;
    double mem = static_cast<double>((sc.total_mcs - sc.burnin_mcs) / sc.thin) * ladder.L *
                 (param_count(model.peaks) + 2) * 8.0;
    if (mem > 1.5e9) {
        throw config_error("sample record would exceed 1.5 GB; increase 'thin'");
    }
    attach_progress(sc, "fit", o.quiet);

    SampleRecord rec = run_emc(model, data, ladder, sc);

    EvidenceTable table;
    table.n_data = data.size();
    table.ladder = ladder;
    table.rows.push_back(build_evidence_row(model.peaks, rec, ladder, data.size()));
    GridPoint best = select_model(table);
    MapEstimate map = map_estimate(rec, model, best.rung);

    fs::create_directories(cfg.out_dir);
    write_record_csv(fs::path(cfg.out_dir) / "samples.csv", rec);
    write_evidence_csv(fs::path(cfg.out_dir) / "evidence.csv", table);
    write_curves_csv(fs::path(cfg.out_dir) / "fit_curves.csv", model, map.params, data.energy);

    json report;
    report["model"] = regime_name(model.regime);
    report["k1"] = model.peaks.k1;
    report["k2"] = model.peaks.k2;
    report["n_data"] = data.size();
    report["rung"] = best.rung + 1;
    report["b"] = ladder.b[best.rung];
    report["F"] = table.rows[0].f[best.rung];
    report["map"] = to_json(map.params);
    report["map_score"] = map.score;
    report["map_error_function"] = map.e_n;
    report["acceptance"] = acceptance_summary(rec);
    atomic_write(fs::path(cfg.out_dir) / "fit_report.json", report.dump(2) + "\n");
    return 0;
}

int cmd_select(const CliOverrides& o) {
    RunConfig cfg = resolve_config(o);
    Dataset data = load_data(cfg);
    ReplicaLadder ladder = build_ladder(cfg);

    std::vector<PeakConfig> grid;
    if (cfg.regime == Regime::Proposed) {
        if (cfg.grid.k1_min > cfg.grid.k1_max || cfg.grid.k2_min > cfg.grid.k2_max) {
            throw config_error("empty (k1,k2) grid");
        }
        for (int k1 = cfg.grid.k1_min; k1 <= cfg.grid.k1_max; ++k1) {
            for (int k2 = cfg.grid.k2_min; k2 <= cfg.grid.k2_max; ++k2) {
                grid.push_back({k1, k2});
            }
        }
    } else {
        if (cfg.grid.k_min > cfg.grid.k_max) throw config_error("empty k grid");
        for (int k = cfg.grid.k_min; k <= cfg.grid.k_max; ++k) grid.push_back({k, 0});
    }

    EvidenceTable table;
    table.n_data = data.size();
    table.ladder = ladder;
    struct PerModel {
        int rung = 0;
        MapEstimate map;
    };
    std::vector<PerModel> maps;
    maps.reserve(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        RunConfig mcfg = cfg;
        mcfg.peaks = grid[i];
        ModelSpec model = build_model(mcfg);
        SamplerConfig sc = cfg.sampler;
        sc.seed = cfg.sampler.seed + i; // independent streams per grid model
        sc.record_theta = true;
        std::string tag = "select " + std::to_string(i + 1) + "/" + std::to_string(grid.size());
        attach_progress(sc, tag, o.quiet);
        SampleRecord rec = run_emc(model, data, ladder, sc);
        EvidenceRow row = build_evidence_row(model.peaks, rec, ladder, data.size());

        EvidenceTable single;
        single.n_data = data.size();
        single.ladder = ladder;
        single.rows.push_back(row);
        GridPoint own = select_model(single);
        PerModel pm;
        pm.rung = own.rung;
        pm.map = map_estimate(rec, model, own.rung);
        maps.push_back(std::move(pm));
        table.rows.push_back(std::move(row));
    }

    GridPoint best = select_model(table);
    HyperPriorWeights weights;
    if (!cfg.k_weights.empty()) {
        weights.model.reserve(grid.size());
        for (const PeakConfig& pc : grid) {
            std::string key = cfg.regime == Regime::Proposed
                                  ? std::to_string(pc.k1) + "," + std::to_string(pc.k2)
                                  : std::to_string(pc.total());
            auto it = cfg.k_weights.find(key);
            weights.model.push_back(it != cfg.k_weights.end() ? it->second : 1.0);
        }
    }
    weights.rung = cfg.b_weights;
    PeakCountPosterior post = peak_count_posterior(table, weights);
    PeakCountMarginals marg = marginals(post.models, post.model_prob);

    fs::create_directories(cfg.out_dir);
    write_evidence_csv(fs::path(cfg.out_dir) / "evidence.csv", table);

    std::ostringstream pj;
    pj << "K1,K2,prob\n";
    for (std::size_t i = 0; i < post.models.size(); ++i) {
        pj << post.models[i].k1 << ',' << post.models[i].k2 << ','
           << detail::format_double(post.model_prob[i]) << '\n';
    }
    atomic_write(fs::path(cfg.out_dir) / "p_joint.csv", pj.str());

    std::ostringstream pm;
    pm << "which,K,prob\n";
    auto emit = [&pm](const char* which, const std::map<int, double>& m) {
        for (const auto& [k, p] : m) {
            pm << which << ',' << k << ',' << detail::format_double(p) << '\n';
        }
    };
    if (cfg.regime == Regime::Proposed) {
        emit("k1", marg.k1);
        emit("k2", marg.k2);
    }
    emit("k", marg.k);
    atomic_write(fs::path(cfg.out_dir) / "p_marginals.csv", pm.str());

    const PerModel& chosen = maps[best.row];
    const ModelSpec chosen_model = [&] {
        RunConfig mcfg = cfg;
        mcfg.peaks = table.rows[best.row].peaks;
        return build_model(mcfg);
    }();

    json report;
    report["model"] = regime_name(cfg.regime);
    report["n_data"] = data.size();
    report["samples_per_rung"] = table.rows.empty() ? 0 : table.rows[0].n_samples;
    report["ladder"] = {{"L", cfg.ladder.L}, {"xi", cfg.ladder.xi}, {"anchor", cfg.ladder.anchor}};
    report["chosen"] = {{"k1", table.rows[best.row].peaks.k1},
                        {"k2", table.rows[best.row].peaks.k2},
                        {"rung", best.rung + 1},
                        {"b", ladder.b[best.rung]},
                        {"F", table.rows[best.row].f[best.rung]}};
    report["map"] = to_json(chosen.map.params);
    report["map_score"] = chosen.map.score;
    report["map_error_function"] = chosen.map.e_n;
    json probs = json::array();
    for (std::size_t i = 0; i < post.models.size(); ++i) {
        probs.push_back({{"k1", post.models[i].k1},
                         {"k2", post.models[i].k2},
                         {"prob", post.model_prob[i]}});
    }
    report["p_joint"] = probs;
    auto to_obj = [](const std::map<int, double>& m) {
        json o = json::object();
        for (const auto& [k, p] : m) o[std::to_string(k)] = p;
        return o;
    };
    if (cfg.regime == Regime::Proposed) {
        report["p_k1"] = to_obj(marg.k1);
        report["p_k2"] = to_obj(marg.k2);
    }
    report["p_k"] = to_obj(marg.k);
    atomic_write(fs::path(cfg.out_dir) / "selection.json", report.dump(2) + "\n");

    write_curves_csv(fs::path(cfg.out_dir) / "map_curves.csv", chosen_model, chosen.map.params,
                     data.energy);
    return 0;
}

int cmd_diag(const CliOverrides& o, const std::string& samples_path) {
    RunConfig cfg = resolve_config(o);
    int rung_1based = cfg.diag_rung; // 0 means "anchor rung"

    std::vector<double> series;
    std::vector<long> mcs;
    if (!samples_path.empty()) {
        RecordCsv rec = read_record_csv(samples_path);
        if (rung_1based == 0) rung_1based = std::max(1, static_cast<int>(rec.e_n.size()) - 2);
        if (rung_1based < 1 || rung_1based > static_cast<int>(rec.e_n.size())) {
            throw config_error("diag: rung out of range for record file");
        }
        series = rec.e_n[rung_1based - 1];
        mcs = rec.mcs;
    } else {
        Dataset data = load_data(cfg);
        ModelSpec model = build_model(cfg);
        ReplicaLadder ladder = build_ladder(cfg);
        if (rung_1based == 0) rung_1based = ladder.L - 2;
        if (rung_1based < 1 || rung_1based > ladder.L) throw config_error("diag: rung out of range");
        SamplerConfig sc = cfg.sampler;
        sc.record_theta = false;
        sc.record_burnin = true; // keep the transient visible in the trace
        sc.thin = 1;
        attach_progress(sc, "diag", o.quiet);
        SampleRecord rec = run_emc(model, data, ladder, sc);
        series = rec.e_n[rung_1based - 1];
        mcs = rec.mcs;
    }

    fs::create_directories(cfg.out_dir);
    std::ostringstream trace;
    trace << "mcs,e_n\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
        trace << (i < mcs.size() ? mcs[i] : static_cast<long>(i + 1)) << ','
              << detail::format_double(series[i]) << '\n';
    }
    atomic_write(fs::path(cfg.out_dir) / "en_trace.csv", trace.str());

    // Autocorrelation over the post-burn-in portion only.
    std::size_t skip = 0;
    for (std::size_t i = 0; i < mcs.size(); ++i) {
        if (mcs[i] <= cfg.sampler.burnin_mcs) skip = i + 1;
    }
    if (series.size() <= skip + 2) throw degenerate_input("diag: too few post-burn-in samples");
    std::vector<double> post(series.begin() + skip, series.end());
    std::size_t max_lag = std::min<std::size_t>(cfg.diag_max_lag, post.size() - 1);
    auto rho = autocorrelation(post, max_lag);
    std::ostringstream ac;
    ac << "lag,rho\n";
    for (std::size_t t = 0; t < rho.size(); ++t) {
        ac << t << ',' << detail::format_double(rho[t]) << '\n';
    }
    atomic_write(fs::path(cfg.out_dir) / "autocorr.csv", ac.str());
    if (!o.quiet) {
        std::fprintf(stderr, "[diag] rung %d: %zu samples, lag range 0..%zu\n", rung_1based,
                     series.size(), max_lag);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian spectral deconvolution of absorption spectra via exchange Monte Carlo"};
    app.require_subcommand(1);

    CliOverrides o;
    std::string samples_path;

    CLI::App* generate = app.add_subcommand("generate", "synthesize a dataset and truth sidecar");
    add_common_options(generate, o);
    CLI::App* fit = app.add_subcommand("fit", "run EMC for one peak configuration");
    add_common_options(fit, o);
    CLI::App* select = app.add_subcommand("select", "run EMC over a peak-count grid and select");
    add_common_options(select, o);
    CLI::App* diag = app.add_subcommand("diag", "error-function trace and autocorrelation");
    add_common_options(diag, o);
    diag->add_option("--samples", samples_path, "reuse an existing samples.csv");

    CLI11_PARSE(app, argc, argv);

    try {
        if (generate->parsed()) return cmd_generate(o);
        if (fit->parsed()) return cmd_fit(o);
        if (select->parsed()) return cmd_select(o);
        if (diag->parsed()) return cmd_diag(o, samples_path);
    } catch (const std::exception& e) {
        if (o.json_errors) {
            json err{{"error", e.what()}};
            std::fprintf(stderr, "%s\n", err.dump().c_str());
        } else {
            std::fprintf(stderr, "error: %s\n", e.what());
        }
        return 1;
    }
    return 0;
}

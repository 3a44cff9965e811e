#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <tuple>
#include <vector>

#include "xsdec/ladder.hpp"
#include "xsdec/priors.hpp"
#include "xsdec/sampler.hpp"

namespace xsdec {

// log of the mean of exp(values), computed with a max shift.
inline double log_mean_exp(std::span<const double> values) {
    if (values.empty()) throw insufficient_samples("log_mean_exp: no samples");
    double m = values[0];
    for (double v : values) m = std::max(m, v);
    if (!std::isfinite(m)) return m; // all -inf, or a contaminating +inf/NaN
    double s = 0.0;
    for (double v : values) s += std::exp(v - m);
    return m + std::log(s / static_cast<double>(values.size()));
}

// Telescoping estimator of the tempered partition function: each factor is an
// importance-sampling ratio between adjacent rungs, estimated from the lower
// rung's recorded samples. log_ztilde[0] = 0 by construction and the sequence
// is non-increasing.
inline std::vector<double> estimate_log_ztilde(const SampleRecord& record,
                                               const ReplicaLadder& ladder, std::size_t n) {
    if (record.L != ladder.L) throw invalid_input("estimate_log_ztilde: ladder/record mismatch");
    if (n < 1) throw invalid_input("estimate_log_ztilde: n must be >= 1");
    std::vector<double> out(ladder.L, 0.0);
    std::vector<double> terms;
    double acc = 0.0;
    for (int l = 0; l + 1 < ladder.L; ++l) {
        const auto& samples = record.e_n[l];
        if (samples.empty()) {
            throw insufficient_samples("estimate_log_ztilde: replica " + std::to_string(l + 1) +
                                       " has no recorded samples");
        }
        double c = -static_cast<double>(n) * (ladder.b[l + 1] - ladder.b[l]);
        terms.resize(samples.size());
        for (std::size_t m = 0; m < samples.size(); ++m) terms[m] = c * samples[m];
        acc += log_mean_exp(terms);
        out[l + 1] = acc;
    }
    return out;
}

// Bayesian free energy at a positive rung:
//   F_N(b) = -(N/2) log(b / 2 pi) - log Ztilde(b)
inline double free_energy(double log_ztilde, double b, std::size_t n) {
    if (!(b > 0.0)) throw invalid_input("free_energy: b must be positive");
    return -0.5 * static_cast<double>(n) * std::log(b / (2.0 * M_PI)) - log_ztilde;
}

// Evidence across the ladder for one peak configuration. f[0] (the b = 0
// rung) is not defined and stored as NaN.
struct EvidenceRow {
    PeakConfig peaks;
    std::vector<double> log_ztilde;
    std::vector<double> f;
    std::size_t n_samples = 0; // recorded samples per rung behind the estimates
};

struct EvidenceTable {
    std::size_t n_data = 0;
    ReplicaLadder ladder;
    std::vector<EvidenceRow> rows;
};

inline EvidenceRow build_evidence_row(PeakConfig peaks, const SampleRecord& record,
                                      const ReplicaLadder& ladder, std::size_t n) {
    EvidenceRow row;
    row.peaks = peaks;
    row.n_samples = record.samples_per_replica();
    row.log_ztilde = estimate_log_ztilde(record, ladder, n);
    row.f.assign(ladder.L, std::numeric_limits<double>::quiet_NaN());
    for (int l = 1; l < ladder.L; ++l) {
        row.f[l] = free_energy(row.log_ztilde[l], ladder.b[l], n);
    }
    return row;
}

struct GridPoint {
    std::size_t row = 0; // index into EvidenceTable::rows
    int rung = 0;        // 0-based ladder index, rung >= 1
};

// Empirical-Bayes selection: the grid argmin of F. Ties break toward fewer
// peaks, then the smaller rung, then smaller K1.
inline GridPoint select_model(const EvidenceTable& table) {
    bool found = false;
    GridPoint best;
    double best_f = 0.0;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const EvidenceRow& row = table.rows[r];
        for (int l = 1; l < table.ladder.L; ++l) {
            double f = row.f[l];
            if (std::isnan(f)) continue;
            bool better = false;
            if (!found || f < best_f) {
                better = true;
            } else if (f == best_f) {
                const PeakConfig& cand = row.peaks;
                const PeakConfig& cur = table.rows[best.row].peaks;
                auto key = [](const PeakConfig& p, int rung) {
                    return std::tuple(p.total(), rung, p.k1);
                };
                better = key(cand, l) < key(cur, best.rung);
            }
            if (better) {
                found = true;
                best = {r, l};
                best_f = f;
            }
        }
    }
    if (!found) throw config_error("select_model: empty evidence grid");
    return best;
}

// Recorded sample with the highest unnormalized log posterior at one rung.
struct MapEstimate {
    SpectralParams params;
    double score = 0.0;
    double e_n = 0.0;
    std::size_t sample_index = 0;
};

inline MapEstimate map_estimate(const SampleRecord& record, const ModelSpec& model, int rung) {
    if (rung < 0 || rung >= record.L) throw invalid_input("map_estimate: rung out of range");
    std::size_t m_count = record.samples_per_replica();
    if (m_count == 0 || record.theta[rung].empty()) {
        throw insufficient_samples("map_estimate: no recorded parameter samples at this rung");
    }
    double b = record.b[rung];
    double n = static_cast<double>(record.n_data);
    bool found = false;
    std::size_t best = 0;
    double best_score = 0.0;
    for (std::size_t m = 0; m < m_count; ++m) {
        double lp = record.log_prior[rung][m];
        if (lp == kNegInf) continue;
        double score = -n * b * record.e_n[rung][m] + lp;
        if (!found || score > best_score) {
            found = true;
            best = m;
            best_score = score;
        }
    }
    if (!found) throw insufficient_samples("map_estimate: no in-support samples at this rung");
    std::span<const double> flat(record.theta[rung].data() + best * record.n_params,
                                 static_cast<std::size_t>(record.n_params));
    MapEstimate out;
    out.params = unflatten_params(flat, model);
    out.score = best_score;
    out.e_n = record.e_n[rung][best];
    out.sample_index = best;
    return out;
}

// Posterior over peak configurations and rungs: p(K, b_l | D) proportional to
// p(K) p(b_l) exp(-F), with trapezoidal weights in b standing in for the
// integral over noise precision (rungs l >= 2). Both hyperpriors default to
// uniform; non-uniform weights can be supplied per model and per rung.
struct PeakCountPosterior {
    std::vector<PeakConfig> models;
    std::vector<double> b;                  // ladder values for rungs >= 2
    std::vector<std::vector<double>> joint; // [model][rung] mass, sums to 1
    std::vector<double> model_prob;         // p(K | D)
};

struct HyperPriorWeights {
    std::vector<double> model;  // one weight per table row; empty = uniform
    std::vector<double> rung;   // one weight per rung l >= 2; empty = uniform
};

inline PeakCountPosterior peak_count_posterior(const EvidenceTable& table,
                                               const HyperPriorWeights& weights = {}) {
    if (table.rows.empty() || table.ladder.L < 2) {
        throw config_error("peak_count_posterior: empty grid");
    }
    int L = table.ladder.L;
    if (!weights.model.empty() && weights.model.size() != table.rows.size()) {
        throw config_error("peak_count_posterior: model weight count mismatch");
    }
    if (!weights.rung.empty() && weights.rung.size() != static_cast<std::size_t>(L - 1)) {
        throw config_error("peak_count_posterior: rung weight count mismatch");
    }
    std::vector<double> w(L, 0.0);
    for (int l = 1; l < L; ++l) {
        double lo = l == 1 ? table.ladder.b[l] : table.ladder.b[l - 1];
        double hi = l == L - 1 ? table.ladder.b[l] : table.ladder.b[l + 1];
        w[l] = 0.5 * (hi - lo);
        if (!weights.rung.empty()) w[l] *= weights.rung[l - 1];
        if (!(w[l] >= 0.0)) throw config_error("peak_count_posterior: negative rung weight");
    }

    auto model_weight = [&](std::size_t r) {
        return weights.model.empty() ? 1.0 : weights.model[r];
    };
    double shift = kNegInf;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        if (!(model_weight(r) >= 0.0)) {
            throw config_error("peak_count_posterior: negative model weight");
        }
        for (int l = 1; l < L; ++l) {
            double f = table.rows[r].f[l];
            if (std::isnan(f) || f == kNegInf) continue;
            if (w[l] == 0.0 || model_weight(r) == 0.0) continue;
            double v = -f + std::log(w[l]) + std::log(model_weight(r));
            if (v > shift) shift = v;
        }
    }
    if (!std::isfinite(shift)) {
        throw degenerate_input("peak_count_posterior: no finite free energies");
    }

    PeakCountPosterior out;
    out.b.assign(table.ladder.b.begin() + 1, table.ladder.b.end());
    double total = 0.0;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const EvidenceRow& row = table.rows[r];
        out.models.push_back(row.peaks);
        std::vector<double> mass(L - 1, 0.0);
        double mw = model_weight(r);
        for (int l = 1; l < L; ++l) {
            double f = row.f[l];
            if (std::isnan(f) || !std::isfinite(f) || w[l] == 0.0 || mw == 0.0) continue;
            mass[l - 1] = std::exp(-f + std::log(w[l]) + std::log(mw) - shift);
            total += mass[l - 1];
        }
        out.joint.push_back(std::move(mass));
    }
    for (auto& mass : out.joint) {
        double row_sum = 0.0;
        for (double& v : mass) {
            v /= total;
            row_sum += v;
        }
        out.model_prob.push_back(row_sum);
    }
    return out;
}

struct PeakCountMarginals {
    std::map<int, double> k1;
    std::map<int, double> k2;
    std::map<int, double> k; // total peak count
};

inline PeakCountMarginals marginals(const std::vector<PeakConfig>& models,
                                    const std::vector<double>& prob) {
    if (models.size() != prob.size()) throw invalid_input("marginals: size mismatch");
    PeakCountMarginals out;
    for (std::size_t i = 0; i < models.size(); ++i) {
        out.k1[models[i].k1] += prob[i];
        out.k2[models[i].k2] += prob[i];
        out.k[models[i].total()] += prob[i];
    }
    return out;
}

} // namespace xsdec

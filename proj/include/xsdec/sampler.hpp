#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "xsdec/ladder.hpp"
#include "xsdec/priors.hpp"
#include "xsdec/rng.hpp"
#include "xsdec/spectrum.hpp"

namespace xsdec {

struct SamplerConfig {
    long total_mcs = 60000;
    long burnin_mcs = 30000;
    int sweeps_per_mcs = 50;
    long thin = 1;
    std::uint64_t seed = 1;
    int threads = 1;

    // Proposal widths start at a fraction of each prior's scale and, when
    // tuning is on, adapt during burn-in toward the acceptance band and are
    // frozen afterwards.
    bool tune = true;
    int tune_interval = 25;
    double accept_lo = 0.25;
    double accept_hi = 0.50;
    double tune_grow = 1.6;
    double tune_shrink = 0.625;
    double initial_step_fraction = 0.05;

    bool record_theta = true;
    bool record_burnin = false; // record from the first MCS (diagnostic traces)
    bool exchange = true;       // disable to compare against independent chains
    std::optional<SpectralParams> init; // start every replica here instead of a prior draw
    std::map<std::string, double> step_overrides; // per-parameter proposal sigma; 0 freezes
    std::function<void(long mcs, long total)> progress; // optional per-MCS callback
};

// Everything a downstream estimator needs from one EMC run: the thinned
// post-burn-in series per replica plus acceptance bookkeeping.
struct SampleRecord {
    int L = 0;
    int n_params = 0;
    std::size_t n_data = 0;
    long thin = 1;
    std::vector<double> b;
    std::vector<std::string> param_names;
    std::vector<long> mcs;

    std::vector<std::vector<double>> e_n;       // [replica][sample]
    std::vector<std::vector<double>> log_prior; // [replica][sample]
    std::vector<std::vector<double>> theta;     // [replica][sample * n_params], peaks sorted by position

    std::vector<long> exchange_attempts; // per adjacent pair
    std::vector<long> exchange_accepts;
    std::vector<std::vector<long>> metropolis_attempts; // [replica][param]
    std::vector<std::vector<long>> metropolis_accepts;

    double max_chi2_drift = 0.0;     // worst relative cache drift seen at MCS refresh
    double max_log_prior_drift = 0.0;

    std::size_t samples_per_replica() const { return mcs.size(); }
};

inline double exchange_probability(double e_low, double e_high, double b_low, double b_high,
                                   std::size_t n) {
    if (b_high < b_low) throw invalid_input("exchange_probability: b_high < b_low");
    if (n < 1) throw invalid_input("exchange_probability: n must be >= 1");
    double x = static_cast<double>(n) * (b_high - b_low) * (e_high - e_low);
    return x >= 0.0 ? 1.0 : std::exp(x);
}

inline std::vector<double> flatten_params(const SpectralParams& p, const ModelSpec& model) {
    std::vector<double> out;
    auto refs = param_layout(p.config());
    out.reserve(refs.size());
    for (const ParamRef& ref : refs) out.push_back(get_param(p, model, ref));
    return out;
}

inline SpectralParams unflatten_params(std::span<const double> flat, const ModelSpec& model) {
    SpectralParams p;
    p.below.resize(model.peaks.k1);
    p.above.resize(model.peaks.k2);
    auto refs = param_layout(model.peaks);
    if (flat.size() != refs.size()) throw invalid_input("unflatten_params: wrong length");
    // Layout places step.E0 before every peak position, so the conventional
    // absolute->offset conversion sees the right edge position.
    for (std::size_t i = 0; i < refs.size(); ++i) set_param(p, model, refs[i], flat[i]);
    return p;
}

// Peaks within each population ordered by center; removes label ambiguity
// from recorded samples and reports.
inline SpectralParams sorted_by_position(SpectralParams p) {
    auto cmp = [](const Peak& x, const Peak& y) {
        if (x.dE != y.dE) return x.dE < y.dE;
        if (x.F != y.F) return x.F < y.F;
        return x.W < y.W;
    };
    std::sort(p.below.begin(), p.below.end(), cmp);
    std::sort(p.above.begin(), p.above.end(), cmp);
    return p;
}

namespace detail {

inline constexpr double kGaussCut = 37.5; // exponent beyond which a peak is treated as zero

// Chebyshev-fitted series for atan(x)/x on |x| <= tan(pi/8); combined with
// the usual two-stage range reduction this gives atan to |error| < 3e-15
// over the full real line.
inline constexpr double kTanPi8 = 4.14213562373095034452e-01;
inline constexpr double kTan3Pi8 = 2.41421356237309492343e+00;
inline constexpr double kPi2 = 1.57079632679489661923;
inline constexpr double kPi4 = 0.78539816339744830962;

inline double atan_core(double z) {
    constexpr double c[13] = {
        1.00000000000000022204e+00,  -3.33333333331818859602e-01, 1.99999999644635828577e-01,
        -1.42857110099935069591e-01, 1.11109557440563055941e-01,  -9.08659469354483606551e-02,
        7.61724717836683717920e-02,  -5.82162000130924672803e-02, -3.07827553948991639032e-03,
        2.35817450718332044524e-01,  -7.54564276044375925601e-01, 1.10395481646474502568e+00,
        -5.19349907991128789675e-01};
    double p = c[12];
    p = p * z + c[11];
    p = p * z + c[10];
    p = p * z + c[9];
    p = p * z + c[8];
    p = p * z + c[7];
    p = p * z + c[6];
    p = p * z + c[5];
    p = p * z + c[4];
    p = p * z + c[3];
    p = p * z + c[2];
    p = p * z + c[1];
    p = p * z + c[0];
    return p;
}

inline double fast_atan(double x) {
    double ax = std::abs(x);
    double y, base, sign_inner;
    if (ax <= kTanPi8) {
        y = ax;
        base = 0.0;
        sign_inner = 1.0;
    } else if (ax <= kTan3Pi8) {
        y = (ax - 1.0) / (ax + 1.0);
        base = kPi4;
        sign_inner = 1.0;
    } else {
        y = 1.0 / ax;
        base = kPi2;
        sign_inner = -1.0;
    }
    double r = base + sign_inner * y * atan_core(y * y);
    return x < 0.0 ? -r : r;
}

// One additive piece of the model curve on the data grid; zero outside [lo, hi).
struct Component {
    std::vector<double> v;
    int lo = 0, hi = 0;

    void reset(std::size_t n) {
        v.assign(n, 0.0);
        lo = hi = 0;
    }
    void clear_window() {
        std::fill(v.begin() + lo, v.begin() + hi, 0.0);
        lo = hi = 0;
    }
};

// Data grid with uniform-spacing detection. Uniform grids get an exp-free
// recurrence for Gaussian fills; anything else falls back to direct
// evaluation.
class Grid {
  public:
    explicit Grid(const Dataset& data) : e_(data.energy) {
        n_ = static_cast<int>(e_.size());
        sorted_ = std::is_sorted(e_.begin(), e_.end());
        uniform_ = n_ >= 2;
        if (n_ >= 2) {
            e0_ = e_.front();
            h_ = (e_.back() - e_.front()) / static_cast<double>(n_ - 1);
            if (h_ <= 0.0) {
                uniform_ = false;
            } else {
                double tol = 1e-9 * std::max({std::abs(e_.front()), std::abs(e_.back()), 1.0});
                for (int i = 0; i < n_; ++i) {
                    if (std::abs(e_[i] - (e0_ + h_ * i)) > tol) {
                        uniform_ = false;
                        break;
                    }
                }
            }
        }
    }

    int n() const { return n_; }
    double energy(int i) const { return e_[i]; }
    const std::vector<double>& energies() const { return e_; }
    bool uniform() const { return uniform_; }

    // Index range covering |E - c| <= radius. An unsorted grid gets no
    // windowing at all.
    std::pair<int, int> window(double c, double radius) const {
        if (n_ == 0) return {0, 0};
        if (uniform_) {
            int lo = static_cast<int>(std::ceil((c - radius - e0_) / h_));
            int hi = static_cast<int>(std::floor((c + radius - e0_) / h_)) + 1;
            return {std::clamp(lo, 0, n_), std::clamp(hi, 0, n_)};
        }
        if (!sorted_) return {0, n_};
        auto lo_it = std::lower_bound(e_.begin(), e_.end(), c - radius);
        auto hi_it = std::upper_bound(e_.begin(), e_.end(), c + radius);
        return {static_cast<int>(lo_it - e_.begin()), static_cast<int>(hi_it - e_.begin())};
    }

    void fill_gaussian(Component& out, double F, double c, double W) const {
        fill_gaussian_impl<false>(out, F, c, W, nullptr, nullptr);
    }

    // Fill the proposal curve and accumulate the chi-squared change against
    // the current residuals and the component being replaced, in one pass
    // over the union of the two windows.
    double fill_gaussian_fused(Component& out, double F, double c, double W, const double* resid,
                               const Component& old) const {
        double dchi2 = 0.0;
        fill_gaussian_impl<true>(out, F, c, W, resid, old.v.data(), &dchi2);
        const double* ov = old.v.data();
        auto side = [&](int from, int to) {
            double acc = 0.0;
            for (int i = from; i < to; ++i) acc += ov[i] * (ov[i] + 2.0 * resid[i]);
            return acc;
        };
        // Regions where the old curve lived but the new one is zero.
        dchi2 += side(std::min(old.lo, out.lo), std::min(old.hi, out.lo));
        dchi2 += side(std::max(out.hi, old.lo), std::max(old.hi, out.hi));
        return dchi2;
    }

    // The reduced-argument regions are contiguous runs of the (sorted) energy
    // grid, so each gets a branch-free loop the compiler can vectorize.
    void fill_edge(Component& out, double H, double E0, double Gamma) const {
        out.clear_window();
        out.lo = 0;
        out.hi = n_;
        double inv = 2.0 / Gamma;
        constexpr double inv_pi = 0.31830988618379067154;
        const double* e = e_.data();
        double* v = out.v.data();
        if (!sorted_) {
            for (int i = 0; i < n_; ++i) {
                v[i] = H * (0.5 + fast_atan((e[i] - E0) * inv) * inv_pi);
            }
            return;
        }
        auto bound = [&](double t) {
            return (int)(std::lower_bound(e_.begin(), e_.end(), E0 + t / inv) - e_.begin());
        };
        int i1 = bound(-kTan3Pi8), i2 = bound(-kTanPi8), i3 = bound(kTanPi8), i4 = bound(kTan3Pi8);
        for (int i = 0; i < i1; ++i) { // t <= -tan(3pi/8)
            double y = 1.0 / ((e[i] - E0) * inv);
            v[i] = H * (0.5 + (-kPi2 - y * atan_core(y * y)) * inv_pi);
        }
        for (int i = i1; i < i2; ++i) { // -tan(3pi/8) < t <= -tan(pi/8)
            double a = -(e[i] - E0) * inv;
            double w = (a - 1.0) / (a + 1.0);
            v[i] = H * (0.5 - (kPi4 + w * atan_core(w * w)) * inv_pi);
        }
        for (int i = i2; i < i3; ++i) { // |t| < tan(pi/8)
            double t = (e[i] - E0) * inv;
            v[i] = H * (0.5 + t * atan_core(t * t) * inv_pi);
        }
        for (int i = i3; i < i4; ++i) {
            double t = (e[i] - E0) * inv;
            double w = (t - 1.0) / (t + 1.0);
            v[i] = H * (0.5 + (kPi4 + w * atan_core(w * w)) * inv_pi);
        }
        for (int i = i4; i < n_; ++i) {
            double y = 1.0 / ((e[i] - E0) * inv);
            v[i] = H * (0.5 + (kPi2 - y * atan_core(y * y)) * inv_pi);
        }
    }

  private:
    // u_{i+1} = u_i * r_i with r_{i+1} = r_i * q; four interleaved chains keep
    // the multiply latency off the critical path. When Fused is set, the
    // chi-squared delta against (resid, oldv) is accumulated in the same pass.
    template <bool Fused>
    void fill_gaussian_impl(Component& out, double F, double c, double W, const double* resid,
                            const double* oldv, double* dchi2 = nullptr) const {
        out.clear_window();
        double a = kFourLn2 / (W * W);
        double radius = W * std::sqrt(kGaussCut / kFourLn2);
        auto [lo, hi] = window(c, radius);
        out.lo = lo;
        out.hi = hi;
        if (lo >= hi) return;
        double* v = out.v.data();
        if (!uniform_ || hi - lo < 16) {
            double acc = 0.0;
            for (int i = lo; i < hi; ++i) {
                double d = e_[i] - c;
                double u = F * std::exp(-a * d * d);
                v[i] = u;
                if constexpr (Fused) {
                    double dv = u - oldv[i];
                    acc += dv * (dv - 2.0 * resid[i]);
                }
            }
            if constexpr (Fused) *dchi2 += acc;
            return;
        }
        double q = std::exp(-2.0 * a * h_ * h_);
        constexpr int kChains = 4;
        int len = hi - lo;
        int clen = (len + kChains - 1) / kChains;
        double u[kChains], r[kChains];
        int base[kChains];
        for (int k = 0; k < kChains; ++k) {
            base[k] = lo + k * clen;
            if (base[k] >= hi) {
                base[k] = hi;
                u[k] = 0.0;
                r[k] = 1.0;
                continue;
            }
            double d = e0_ + h_ * base[k] - c;
            u[k] = F * std::exp(-a * d * d);
            r[k] = std::exp(-a * (2.0 * d * h_ + h_ * h_));
        }
        int tail_len = hi - base[kChains - 1];          // last chain's length
        double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
        for (int j = 0; j < tail_len; ++j) {            // all chains active
            int i0 = base[0] + j, i1 = base[1] + j, i2 = base[2] + j, i3 = base[3] + j;
            v[i0] = u[0];
            v[i1] = u[1];
            v[i2] = u[2];
            v[i3] = u[3];
            if constexpr (Fused) {
                double d0 = u[0] - oldv[i0], d1 = u[1] - oldv[i1];
                double d2 = u[2] - oldv[i2], d3 = u[3] - oldv[i3];
                acc0 += d0 * (d0 - 2.0 * resid[i0]);
                acc1 += d1 * (d1 - 2.0 * resid[i1]);
                acc2 += d2 * (d2 - 2.0 * resid[i2]);
                acc3 += d3 * (d3 - 2.0 * resid[i3]);
            }
            u[0] *= r[0];
            r[0] *= q;
            u[1] *= r[1];
            r[1] *= q;
            u[2] *= r[2];
            r[2] *= q;
            u[3] *= r[3];
            r[3] *= q;
        }
        for (int k = 0; k < kChains - 1; ++k) {         // remainders
            int end_k = std::min(hi, base[k] + clen);
            for (int i = base[k] + tail_len; i < end_k; ++i) {
                v[i] = u[k];
                if constexpr (Fused) {
                    double d = u[k] - oldv[i];
                    acc0 += d * (d - 2.0 * resid[i]);
                }
                u[k] *= r[k];
                r[k] *= q;
            }
        }
        if constexpr (Fused) *dchi2 += acc0 + acc1 + acc2 + acc3;
    }

    std::vector<double> e_;
    int n_ = 0;
    bool uniform_ = false;
    bool sorted_ = false;
    double e0_ = 0.0, h_ = 1.0;
};

// Log density with the normalizer precomputed; avoids lgamma in the sweep.
struct PriorEval {
    Dist kind;
    double a, b, lognorm;

    explicit PriorEval(const DistributionSpec& s) : kind(s.kind), a(s.a), b(s.b) {
        switch (kind) {
            case Dist::Uniform: lognorm = -std::log(b - a); break;
            case Dist::Normal: lognorm = -0.5 * std::log(2.0 * M_PI * b * b); break;
            case Dist::Gamma: lognorm = -std::lgamma(a) - a * std::log(b); break;
        }
    }

    double operator()(double x) const {
        switch (kind) {
            case Dist::Uniform: return (x < a || x > b) ? kNegInf : lognorm;
            case Dist::Normal: {
                double z = (x - a) / b;
                return lognorm - 0.5 * z * z;
            }
            case Dist::Gamma:
                if (x <= 0.0) return kNegInf;
                return lognorm + (a - 1.0) * std::log(x) - x / b;
        }
        return kNegInf;
    }
};

} // namespace detail

// Exchange Monte Carlo over a replica ladder. Replica sweeps are independent
// between exchange passes; each rung owns a counter-based RNG stream, so a
// run is bit-reproducible for a fixed seed regardless of thread count.
class EmcSampler {
  public:
    EmcSampler(const ModelSpec& model, const Dataset& data, const ReplicaLadder& ladder,
               const SamplerConfig& config)
        : model_(model), ladder_(ladder), config_(config), grid_(data),
          intensity_(data.intensity), layout_(param_layout(model.peaks)) {
        validate(data);
        n_ = grid_.n();
        p_ = static_cast<int>(layout_.size());
        for (const ParamRef& ref : layout_) priors_.emplace_back(prior_for(model_, ref));

        replicas_.resize(ladder_.L);
        for (int l = 0; l < ladder_.L; ++l) {
            Replica& rep = replicas_[l];
            rep.rng = CounterRng(config_.seed, static_cast<std::uint64_t>(l) + 1);
            rep.params = config_.init ? *config_.init : sample_prior(model_, rep.rng);
            rep.edge.reset(n_);
            rep.wl.reset(n_);
            rep.peaks.assign(model_.peaks.total(), {});
            for (auto& c : rep.peaks) c.reset(n_);
            rep.resid.assign(n_, 0.0);
            rep.scratch_a.reset(n_);
            rep.scratch_b.reset(n_);
            rep.scratch_peaks.assign(model_.peaks.total(), {});
            for (auto& c : rep.scratch_peaks) c.reset(n_);
            rep.scratch_f.assign(n_, 0.0);
            rep.step.resize(p_);
            for (int j = 0; j < p_; ++j) {
                auto it = config_.step_overrides.find(param_name(model_, layout_[j]));
                rep.step[j] = it != config_.step_overrides.end()
                                  ? it->second
                                  : config_.initial_step_fraction *
                                        scale_of(prior_for(model_, layout_[j]));
            }
            rep.att.assign(p_, 0);
            rep.acc.assign(p_, 0);
            rep.att_win.assign(p_, 0);
            rep.acc_win.assign(p_, 0);
            rebuild(rep);
        }
        exchange_rng_ = CounterRng(config_.seed, 0x45584348ull); // dedicated exchange stream
        exchange_attempts_.assign(std::max(0, ladder_.L - 1), 0);
        exchange_accepts_.assign(std::max(0, ladder_.L - 1), 0);
    }

    int n_params() const { return p_; }
    int n_replicas() const { return ladder_.L; }
    std::size_t n_data() const { return static_cast<std::size_t>(n_); }
    const ModelSpec& model() const { return model_; }
    const ReplicaLadder& ladder() const { return ladder_; }

    const SpectralParams& params(int l) const { return replicas_[l].params; }
    double error_of(int l) const { return replicas_[l].chi2 / (2.0 * n_); }
    double log_prior_of(int l) const { return replicas_[l].logp; }
    const std::vector<long>& metropolis_attempts(int l) const { return replicas_[l].att; }
    const std::vector<long>& metropolis_accepts(int l) const { return replicas_[l].acc; }

    void set_params(int l, const SpectralParams& p) {
        require_shape(model_, p);
        replicas_[l].params = p;
        rebuild(replicas_[l]);
    }

    // One Metropolis sweep (one proposal per scalar parameter) on every replica.
    void sweep_all() {
        run_parallel([this](int l) { sweep_replica(l); });
    }

    void sweep_replica(int l) {
        Replica& rep = replicas_[l];
        double b = ladder_.b[l];
        for (int j = 0; j < p_; ++j) {
            if (rep.step[j] <= 0.0) continue;
            propose(rep, b, j);
        }
    }

    // Attempt swaps between adjacent pairs (first pair index given by parity).
    void exchange_pass(int parity) {
        for (int l = parity & 1; l + 1 < ladder_.L; l += 2) {
            ++exchange_attempts_[l];
            Replica& lo = replicas_[l];
            Replica& hi = replicas_[l + 1];
            double x = 0.5 * (ladder_.b[l + 1] - ladder_.b[l]) * (hi.chi2 - lo.chi2);
            double u = exchange_rng_.uniform01(); // one draw per attempted pair
            if (x < 0.0 && !(u < std::exp(x))) continue;
            ++exchange_accepts_[l];
            std::swap(lo.params, hi.params);
            std::swap(lo.chi2, hi.chi2);
            std::swap(lo.logp, hi.logp);
            std::swap(lo.logdens, hi.logdens);
            std::swap(lo.edge, hi.edge);
            std::swap(lo.wl, hi.wl);
            std::swap(lo.peaks, hi.peaks);
            std::swap(lo.resid, hi.resid);
        }
    }

    SampleRecord run() {
        SampleRecord rec;
        rec.L = ladder_.L;
        rec.n_params = p_;
        rec.n_data = static_cast<std::size_t>(n_);
        rec.thin = config_.thin;
        rec.b = ladder_.b;
        for (const ParamRef& ref : layout_) rec.param_names.push_back(param_name(model_, ref));
        rec.e_n.resize(ladder_.L);
        rec.log_prior.resize(ladder_.L);
        rec.theta.resize(ladder_.L);

        long kept = (config_.total_mcs - config_.burnin_mcs) / config_.thin;
        for (int l = 0; l < ladder_.L; ++l) {
            rec.e_n[l].reserve(kept);
            rec.log_prior[l].reserve(kept);
            if (config_.record_theta) rec.theta[l].reserve(kept * p_);
        }

        for (long mcs = 1; mcs <= config_.total_mcs; ++mcs) {
            run_parallel([this](int l) {
                for (int s = 0; s < config_.sweeps_per_mcs; ++s) sweep_replica(l);
                refresh(replicas_[l]);
            });
            if (config_.exchange) exchange_pass(static_cast<int>(mcs & 1));

            bool in_burnin = mcs <= config_.burnin_mcs;
            if (in_burnin && config_.tune && mcs % config_.tune_interval == 0) {
                for (Replica& rep : replicas_) tune(rep);
            }
            bool keep = config_.record_burnin ? mcs % config_.thin == 0
                                              : !in_burnin &&
                                                    (mcs - config_.burnin_mcs) % config_.thin == 0;
            if (keep) {
                rec.mcs.push_back(mcs);
                for (int l = 0; l < ladder_.L; ++l) {
                    Replica& rep = replicas_[l];
                    rec.e_n[l].push_back(rep.chi2 / (2.0 * n_));
                    rec.log_prior[l].push_back(rep.logp);
                    if (config_.record_theta) {
                        auto flat = flatten_params(sorted_by_position(rep.params), model_);
                        rec.theta[l].insert(rec.theta[l].end(), flat.begin(), flat.end());
                    }
                }
            }
            if (config_.progress) config_.progress(mcs, config_.total_mcs);
        }

        rec.exchange_attempts = exchange_attempts_;
        rec.exchange_accepts = exchange_accepts_;
        rec.metropolis_attempts.resize(ladder_.L);
        rec.metropolis_accepts.resize(ladder_.L);
        for (int l = 0; l < ladder_.L; ++l) {
            rec.metropolis_attempts[l] = replicas_[l].att;
            rec.metropolis_accepts[l] = replicas_[l].acc;
        }
        rec.max_chi2_drift = max_chi2_drift();
        rec.max_log_prior_drift = max_log_prior_drift();
        return rec;
    }

    // Worst relative disagreement between incrementally maintained caches and
    // a fresh recomputation, accumulated at every MCS boundary.
    double max_chi2_drift() const {
        double m = 0.0;
        for (const Replica& rep : replicas_) m = std::max(m, rep.max_chi2_drift);
        return m;
    }
    double max_log_prior_drift() const {
        double m = 0.0;
        for (const Replica& rep : replicas_) m = std::max(m, rep.max_logp_drift);
        return m;
    }

  private:
    struct Replica {
        SpectralParams params;
        double chi2 = 0.0;
        double logp = 0.0;
        std::vector<double> logdens; // per-parameter prior log density at the current value
        detail::Component edge, wl;
        std::vector<detail::Component> peaks;
        std::vector<double> resid;

        detail::Component scratch_a, scratch_b;
        std::vector<detail::Component> scratch_peaks;
        std::vector<double> scratch_f;

        std::vector<double> step;
        std::vector<long> att, acc, att_win, acc_win;
        CounterRng rng;
        double max_chi2_drift = 0.0, max_logp_drift = 0.0;
    };

    void validate(const Dataset& data) {
        if (data.size() == 0) throw config_error("run_emc: empty dataset");
        if (data.energy.size() != data.intensity.size()) {
            throw config_error("run_emc: energy/intensity length mismatch");
        }
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (!std::isfinite(data.energy[i]) || !std::isfinite(data.intensity[i])) {
                throw config_error("run_emc: dataset contains non-finite values");
            }
        }
        validate_model(model_);
        if (ladder_.L < 3 || ladder_.b.size() != static_cast<std::size_t>(ladder_.L)) {
            throw config_error("run_emc: malformed ladder");
        }
        if (ladder_.b[0] != 0.0) throw config_error("run_emc: ladder must start at b = 0");
        for (int l = 2; l < ladder_.L; ++l) {
            if (!(ladder_.b[l] > ladder_.b[l - 1])) {
                throw config_error("run_emc: ladder must be strictly increasing from rung 2");
            }
        }
        if (config_.total_mcs < 1) throw config_error("run_emc: total MCS must be positive");
        if (config_.burnin_mcs < 0 || config_.burnin_mcs >= config_.total_mcs) {
            throw config_error("run_emc: burn-in must be shorter than the run");
        }
        if (config_.sweeps_per_mcs < 1) throw config_error("run_emc: sweeps per MCS must be >= 1");
        if (config_.thin < 1) throw config_error("run_emc: thinning interval must be >= 1");
        if (config_.threads < 1) throw config_error("run_emc: thread count must be >= 1");
        if (config_.initial_step_fraction <= 0.0) {
            throw config_error("run_emc: initial step fraction must be positive");
        }
        if (config_.init) {
            require_shape(model_, *config_.init);
            if (!params_valid(model_, *config_.init)) {
                throw config_error("run_emc: initial parameters violate model invariants");
            }
        }
    }

    template <typename F>
    void run_parallel(F&& fn) {
        int threads = std::min(config_.threads, ladder_.L);
        if (threads <= 1) {
            for (int l = 0; l < ladder_.L; ++l) fn(l);
            return;
        }
        std::atomic<int> next{0};
        auto worker = [&] {
            for (;;) {
                int l = next.fetch_add(1, std::memory_order_relaxed);
                if (l >= ladder_.L) break;
                fn(l);
            }
        };
        std::vector<std::thread> pool;
        pool.reserve(threads - 1);
        for (int t = 0; t < threads - 1; ++t) pool.emplace_back(worker);
        worker();
        for (auto& th : pool) th.join();
    }

    int component_index(const ParamRef& ref) const {
        return ref.pop == 0 ? ref.index : model_.peaks.k1 + ref.index;
    }

    // Structural bounds that hold regardless of the configured priors.
    bool structurally_ok(const ParamRef& ref, double x) const {
        switch (ref.kind) {
            case ParamKind::StepH:
            case ParamKind::StepA: return x >= 0.0;
            case ParamKind::StepGamma:
            case ParamKind::StepOmega:
            case ParamKind::PeakW: return x > 0.0;
            case ParamKind::PeakF: return x > 0.0;
            case ParamKind::PeakPos:
                if (model_.regime == Regime::Proposed) {
                    return ref.pop == 0 ? x < 0.0 : x > 0.0;
                }
                return true;
            default: return true;
        }
    }

    static double delta_chi2(const double* r, const double* oldv, const double* newv, int lo,
                             int hi) {
        double acc = 0.0;
        for (int i = lo; i < hi; ++i) {
            double d = newv[i] - oldv[i];
            acc += d * (d - 2.0 * r[i]);
        }
        return acc;
    }

    static void apply_delta(double* r, const double* oldv, const double* newv, int lo, int hi) {
        for (int i = lo; i < hi; ++i) r[i] -= newv[i] - oldv[i];
    }

    // Scaled-curve shortcut for pure height changes: new = ratio * old.
    static double delta_chi2_scaled(const double* r, const double* oldv, double ratio, int lo,
                                    int hi) {
        double m = ratio - 1.0;
        double acc = 0.0;
        for (int i = lo; i < hi; ++i) {
            double d = m * oldv[i];
            acc += d * (d - 2.0 * r[i]);
        }
        return acc;
    }

    static void apply_scaled(double* r, double* oldv, double ratio, int lo, int hi) {
        double m = ratio - 1.0;
        for (int i = lo; i < hi; ++i) {
            double d = m * oldv[i];
            r[i] -= d;
            oldv[i] += d;
        }
    }

    void propose(Replica& rep, double b, int j) {
        const ParamRef& ref = layout_[j];
        ++rep.att[j];
        ++rep.att_win[j];
        double x = get_param(rep.params, model_, ref);
        double xp = x + rep.step[j] * rep.rng.normal01();
        if (!structurally_ok(ref, xp)) return;
        double ld_new = priors_[j](xp);
        if (ld_new == kNegInf) return;
        double dlp = ld_new - rep.logdens[j];

        double dchi2 = 0.0;
        bool scaled = false;
        double ratio = 0.0;
        detail::Component* target = nullptr;
        detail::Component* scratch = nullptr;

        switch (ref.kind) {
            case ParamKind::StepH:
            case ParamKind::StepA: {
                target = ref.kind == ParamKind::StepH ? &rep.edge : &rep.wl;
                if (x != 0.0) {
                    scaled = true;
                    ratio = xp / x;
                    dchi2 = delta_chi2_scaled(rep.resid.data(), target->v.data(), ratio,
                                              target->lo, target->hi);
                } else {
                    scratch = &rep.scratch_a;
                    if (ref.kind == ParamKind::StepH) {
                        grid_.fill_edge(*scratch, xp, rep.params.step.E0, rep.params.step.Gamma);
                        dchi2 = delta_chi2(rep.resid.data(), target->v.data(), scratch->v.data(),
                                           0, n_);
                    } else {
                        dchi2 = grid_.fill_gaussian_fused(
                            *scratch, xp, rep.params.step.E0 + rep.params.step.DeltaE,
                            rep.params.step.omega, rep.resid.data(), *target);
                    }
                }
                break;
            }
            case ParamKind::StepGamma: {
                target = &rep.edge;
                scratch = &rep.scratch_a;
                grid_.fill_edge(*scratch, rep.params.step.H, rep.params.step.E0, xp);
                dchi2 = delta_chi2(rep.resid.data(), target->v.data(), scratch->v.data(), 0, n_);
                break;
            }
            case ParamKind::StepDeltaE:
            case ParamKind::StepOmega: {
                target = &rep.wl;
                scratch = &rep.scratch_a;
                double center = ref.kind == ParamKind::StepDeltaE ? rep.params.step.E0 + xp
                                                                  : rep.params.step.E0 +
                                                                        rep.params.step.DeltaE;
                double width = ref.kind == ParamKind::StepOmega ? xp : rep.params.step.omega;
                dchi2 = grid_.fill_gaussian_fused(*scratch, rep.params.step.A, center, width,
                                                  rep.resid.data(), *target);
                break;
            }
            case ParamKind::StepE0: {
                accept_or_reject_e0(rep, b, j, x, xp, dlp, ld_new);
                return;
            }
            case ParamKind::PeakF: {
                target = &rep.peaks[component_index(ref)];
                scaled = true;
                ratio = xp / x; // F > 0 structurally
                dchi2 = delta_chi2_scaled(rep.resid.data(), target->v.data(), ratio, target->lo,
                                          target->hi);
                break;
            }
            case ParamKind::PeakPos:
            case ParamKind::PeakW: {
                target = &rep.peaks[component_index(ref)];
                scratch = &rep.scratch_a;
                const Peak& pk = ref.pop == 0 ? rep.params.below[ref.index]
                                              : rep.params.above[ref.index];
                double center, width;
                if (ref.kind == ParamKind::PeakPos) {
                    center = model_.regime == Regime::Conventional ? xp
                                                                   : rep.params.step.E0 + xp;
                    width = pk.W;
                } else {
                    center = rep.params.step.E0 + pk.dE;
                    width = xp;
                }
                dchi2 = grid_.fill_gaussian_fused(*scratch, pk.F, center, width, rep.resid.data(),
                                                  *target);
                break;
            }
        }

        double log_ratio = -0.5 * b * dchi2 + dlp;
        if (!(log_ratio >= 0.0) && !(std::log(rep.rng.uniform01()) < log_ratio)) return;

        ++rep.acc[j];
        ++rep.acc_win[j];
        set_param(rep.params, model_, ref, xp);
        rep.chi2 += dchi2;
        rep.logp += dlp;
        rep.logdens[j] = ld_new;
        if (scaled) {
            apply_scaled(rep.resid.data(), target->v.data(), ratio, target->lo, target->hi);
        } else {
            auto [lo, hi] = union_window(*target, *scratch);
            apply_delta(rep.resid.data(), target->v.data(), scratch->v.data(), lo, hi);
            std::swap(*target, *scratch);
        }
    }

    // E0 moves everything that is anchored to the edge. In the proposed
    // regime peak offsets ride along (centers shift); in the conventional
    // regime absolute peak positions stay put and only the edge and white
    // line move.
    void accept_or_reject_e0(Replica& rep, double b, int j, double x, double xp, double dlp,
                             double ld_new) {
        double shift = xp - x;
        const StepParams& sp = rep.params.step;
        bool move_peaks = model_.regime == Regime::Proposed;

        grid_.fill_edge(rep.scratch_a, sp.H, xp, sp.Gamma);
        grid_.fill_gaussian(rep.scratch_b, sp.A, xp + sp.DeltaE, sp.omega);

        double dchi2;
        if (!move_peaks) {
            // Two-component delta over the union of affected windows.
            double* f = rep.scratch_f.data();
            auto [lo_w, hi_w] = union_window(rep.wl, rep.scratch_b);
            double acc = 0.0;
            const double* r = rep.resid.data();
            for (int i = 0; i < n_; ++i) {
                double d = rep.scratch_a.v[i] - rep.edge.v[i];
                if (i >= lo_w && i < hi_w) d += rep.scratch_b.v[i] - rep.wl.v[i];
                f[i] = d;
                acc += d * (d - 2.0 * r[i]);
            }
            dchi2 = acc;
        } else {
            int total = model_.peaks.total();
            for (int k = 0; k < total; ++k) {
                const Peak& pk = k < model_.peaks.k1 ? rep.params.below[k]
                                                     : rep.params.above[k - model_.peaks.k1];
                grid_.fill_gaussian(rep.scratch_peaks[k], pk.F, xp + pk.dE, pk.W);
            }
            double* f = rep.scratch_f.data();
            std::copy(rep.scratch_a.v.begin(), rep.scratch_a.v.end(), f);
            for (int i = rep.scratch_b.lo; i < rep.scratch_b.hi; ++i) f[i] += rep.scratch_b.v[i];
            for (int k = 0; k < total; ++k) {
                const auto& c = rep.scratch_peaks[k];
                for (int i = c.lo; i < c.hi; ++i) f[i] += c.v[i];
            }
            double acc = 0.0;
            for (int i = 0; i < n_; ++i) {
                double rp = intensity_[i] - f[i];
                acc += rp * rp;
            }
            dchi2 = acc - rep.chi2;
        }

        double log_ratio = -0.5 * b * dchi2 + dlp;
        if (!(log_ratio >= 0.0) && !(std::log(rep.rng.uniform01()) < log_ratio)) return;

        ++rep.acc[j];
        ++rep.acc_win[j];
        rep.chi2 += dchi2;
        rep.logp += dlp;
        rep.logdens[j] = ld_new;
        rep.params.step.E0 = xp;
        if (!move_peaks) {
            for (Peak& pk : rep.params.below) pk.dE -= shift;
            for (Peak& pk : rep.params.above) pk.dE -= shift;
            for (int i = 0; i < n_; ++i) rep.resid[i] -= rep.scratch_f[i];
            std::swap(rep.edge, rep.scratch_a);
            std::swap(rep.wl, rep.scratch_b);
        } else {
            for (int i = 0; i < n_; ++i) rep.resid[i] = intensity_[i] - rep.scratch_f[i];
            std::swap(rep.edge, rep.scratch_a);
            std::swap(rep.wl, rep.scratch_b);
            std::swap(rep.peaks, rep.scratch_peaks);
        }
    }

    static std::pair<int, int> union_window(const detail::Component& a,
                                            const detail::Component& b) {
        if (a.lo >= a.hi) return {b.lo, b.hi};
        if (b.lo >= b.hi) return {a.lo, a.hi};
        return {std::min(a.lo, b.lo), std::max(a.hi, b.hi)};
    }

    // Rebuild every cache from the parameter vector. Called per MCS to bound
    // incremental drift; the worst relative discrepancy is tracked per
    // replica so tests can audit cache coherence.
    void refresh(Replica& rep) {
        double chi2_before = rep.chi2;
        double logp_before = rep.logp;
        rebuild(rep);
        double chi2_err = std::abs(chi2_before - rep.chi2) / std::max(1.0, std::abs(rep.chi2));
        double logp_err =
            std::abs(logp_before - rep.logp) / std::max(1.0, std::abs(rep.logp));
        if (chi2_err > rep.max_chi2_drift) rep.max_chi2_drift = chi2_err;
        if (logp_err > rep.max_logp_drift) rep.max_logp_drift = logp_err;
    }

    void rebuild(Replica& rep) {
        const StepParams& sp = rep.params.step;
        grid_.fill_edge(rep.edge, sp.H, sp.E0, sp.Gamma);
        grid_.fill_gaussian(rep.wl, sp.A, sp.E0 + sp.DeltaE, sp.omega);
        int total = model_.peaks.total();
        for (int k = 0; k < total; ++k) {
            const Peak& pk = k < model_.peaks.k1 ? rep.params.below[k]
                                                 : rep.params.above[k - model_.peaks.k1];
            grid_.fill_gaussian(rep.peaks[k], pk.F, sp.E0 + pk.dE, pk.W);
        }
        for (int i = 0; i < n_; ++i) rep.resid[i] = intensity_[i] - rep.edge.v[i] - rep.wl.v[i];
        for (int k = 0; k < total; ++k) {
            const auto& c = rep.peaks[k];
            for (int i = c.lo; i < c.hi; ++i) rep.resid[i] -= c.v[i];
        }
        double chi2 = 0.0;
        for (int i = 0; i < n_; ++i) chi2 += rep.resid[i] * rep.resid[i];
        rep.chi2 = chi2;
        rep.logdens.resize(p_);
        double lp = 0.0;
        for (int j = 0; j < p_; ++j) {
            rep.logdens[j] = priors_[j](get_param(rep.params, model_, layout_[j]));
            lp += rep.logdens[j];
        }
        rep.logp = lp;
    }

    void tune(Replica& rep) {
        for (int j = 0; j < p_; ++j) {
            if (rep.att_win[j] < 8) continue;
            double rate = static_cast<double>(rep.acc_win[j]) / rep.att_win[j];
            if (rate < config_.accept_lo) {
                rep.step[j] *= config_.tune_shrink;
            } else if (rate > config_.accept_hi) {
                rep.step[j] *= config_.tune_grow;
            }
            rep.att_win[j] = 0;
            rep.acc_win[j] = 0;
        }
    }

    ModelSpec model_;
    ReplicaLadder ladder_;
    SamplerConfig config_;
    detail::Grid grid_;
    std::vector<double> intensity_;
    std::vector<ParamRef> layout_;
    std::vector<detail::PriorEval> priors_;
    std::vector<Replica> replicas_;
    CounterRng exchange_rng_;
    std::vector<long> exchange_attempts_, exchange_accepts_;
    int n_ = 0, p_ = 0;
};

inline SampleRecord run_emc(const ModelSpec& model, const Dataset& data,
                            const ReplicaLadder& ladder, const SamplerConfig& config) {
    EmcSampler sampler(model, data, ladder, config);
    return sampler.run();
}

} // namespace xsdec

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "thermeq/gas_params.hpp"
#include "thermeq/parallel.hpp"
#include "thermeq/rng.hpp"
#include "thermeq/stats.hpp"

// Two-state reduction of a velocity trajectory and its oscillation statistics.
// A step is in the drift state D when V^2 <= V_0^2 (the boundary belongs to D)
// and in the fluctuation state F otherwise; the chain starts in D.  C_n counts
// label changes among the first n collisions, W_n = C_n / n is the crossing
// frequency, N_1 is the first entry into F, and tau_1 its arrival time.
namespace thermeq::crossing {

enum class StateLabel : std::uint8_t { kDrift = 0, kFluctuation = 1 };

inline StateLabel classify_state(double v, double v0) {
    return v * v <= v0 * v0 ? StateLabel::kDrift : StateLabel::kFluctuation;
}

// Cumulative crossing counts C_1..C_n for post-collision labels.
inline std::vector<std::uint32_t> crossing_numbers(const std::vector<StateLabel>& labels) {
    std::vector<std::uint32_t> out(labels.size());
    StateLabel prev = StateLabel::kDrift;
    std::uint32_t count = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != prev) {
            ++count;
            prev = labels[i];
        }
        out[i] = count;
    }
    return out;
}

struct FrequencyCurve {
    std::vector<double> mean;      // E(W_n) estimate, n = 1..n_max
    std::vector<double> se;        // standard error of the mean
    std::vector<double> diff_mean; // paired W_{n+1} - W_n, n = 1..n_max-1
    std::vector<double> diff_se;
    double band_z = 0.0;           // simultaneous two-sided band multiplier
    double violation_score = 0.0;  // > 0: a decrease resolved beyond the bands
    std::size_t trials = 0;
};

namespace detail {

struct CurveAcc {
    std::vector<double> sw, sww, sd, sdd;
    std::size_t count = 0;

    void ensure(std::size_t n_max) {
        if (sw.empty()) {
            sw.assign(n_max, 0.0);
            sww.assign(n_max, 0.0);
            sd.assign(n_max > 1 ? n_max - 1 : 0, 0.0);
            sdd.assign(n_max > 1 ? n_max - 1 : 0, 0.0);
        }
    }

    void merge(const CurveAcc& o) {
        if (o.count == 0) return;
        if (count == 0) {
            *this = o;
            return;
        }
        for (std::size_t i = 0; i < sw.size(); ++i) {
            sw[i] += o.sw[i];
            sww[i] += o.sww[i];
        }
        for (std::size_t i = 0; i < sd.size(); ++i) {
            sd[i] += o.sd[i];
            sdd[i] += o.sdd[i];
        }
        count += o.count;
    }
};

inline double mean_se(double s, double ss, std::size_t n, double& out_mean) {
    const double nn = static_cast<double>(n);
    out_mean = s / nn;
    const double var = std::max(0.0, (ss - nn * out_mean * out_mean) / (nn - 1.0));
    return std::sqrt(var / nn);
}

}  // namespace detail

// Monte Carlo estimate of n -> E(W_n) with simultaneous Bonferroni bands
// (z = Phi^-1(1 - 0.025/n_max)) and the resulting band-violation score.
inline FrequencyCurve frequency_curve(const GasParams& p, std::size_t n_max, std::size_t trials,
                                      std::uint64_t seed, unsigned workers,
                                      std::uint64_t stream_offset = 0) {
    if (n_max < 2) throw std::invalid_argument("frequency_curve: n_max must be >= 2");
    if (trials < 2) throw std::invalid_argument("frequency_curve: trials must be >= 2");
    const double sigma0 = std::sqrt(p.sigma0_sq);
    const double sigmax = std::sqrt(p.sigmax_sq);
    auto acc = parallel::chunked_reduce<detail::CurveAcc>(
        trials, 256, workers, [&](detail::CurveAcc& a, std::size_t trial) {
            a.ensure(n_max);
            rng::Stream stream(seed, stream_offset + trial);
            const double v0 = sigma0 * stream.next_normal();
            const double b = v0 * v0;
            double v = v0;
            StateLabel prev = StateLabel::kDrift;
            std::uint32_t count = 0;
            double w_prev = 0.0;
            for (std::size_t n = 1; n <= n_max; ++n) {
                v = p.c * v + sigmax * stream.next_normal();
                const StateLabel lab =
                    v * v <= b ? StateLabel::kDrift : StateLabel::kFluctuation;
                if (lab != prev) {
                    ++count;
                    prev = lab;
                }
                const double w = static_cast<double>(count) / static_cast<double>(n);
                a.sw[n - 1] += w;
                a.sww[n - 1] += w * w;
                if (n > 1) {
                    const double d = w - w_prev;
                    a.sd[n - 2] += d;
                    a.sdd[n - 2] += d * d;
                }
                w_prev = w;
            }
            ++a.count;
        });
    FrequencyCurve curve;
    curve.trials = trials;
    curve.mean.resize(n_max);
    curve.se.resize(n_max);
    for (std::size_t i = 0; i < n_max; ++i)
        curve.se[i] = detail::mean_se(acc.sw[i], acc.sww[i], trials, curve.mean[i]);
    curve.diff_mean.resize(n_max - 1);
    curve.diff_se.resize(n_max - 1);
    for (std::size_t i = 0; i + 1 < n_max; ++i)
        curve.diff_se[i] = detail::mean_se(acc.sd[i], acc.sdd[i], trials, curve.diff_mean[i]);
    curve.band_z = stats::normal_quantile(1.0 - 0.025 / static_cast<double>(n_max));
    curve.violation_score = stats::band_violation_score(curve.mean, curve.se, curve.band_z);
    return curve;
}

struct TimeFrequencyPoint {
    double t = 0.0;
    double mean_w = 0.0;       // over trials with at least one collision by t
    double se_w = 0.0;
    double zero_fraction = 0.0;  // trials with no collision by t (excluded above)
    std::size_t contributing = 0;
};

// W(t) = C_{N(t)} / N(t) along the Poisson clock; trials with N(t) = 0 are
// excluded from the mean and reported via zero_fraction.
inline std::vector<TimeFrequencyPoint> time_frequency(const GasParams& p,
                                                      const std::vector<double>& times,
                                                      std::size_t trials, std::uint64_t seed,
                                                      unsigned workers,
                                                      std::uint64_t stream_offset = 0) {
    if (times.empty()) throw std::invalid_argument("time_frequency: no eval times");
    for (std::size_t i = 0; i < times.size(); ++i)
        if (!(times[i] > 0.0) || (i > 0 && !(times[i] > times[i - 1])))
            throw std::invalid_argument("time_frequency: times must be positive, strictly increasing");
    if (trials < 2) throw std::invalid_argument("time_frequency: trials must be >= 2");
    struct Acc {
        std::vector<double> sw, sww;
        std::vector<std::size_t> zero, contributing;
        void ensure(std::size_t m) {
            if (sw.empty()) {
                sw.assign(m, 0.0);
                sww.assign(m, 0.0);
                zero.assign(m, 0);
                contributing.assign(m, 0);
            }
        }
        void merge(const Acc& o) {
            if (o.sw.empty()) return;
            if (sw.empty()) {
                *this = o;
                return;
            }
            for (std::size_t i = 0; i < sw.size(); ++i) {
                sw[i] += o.sw[i];
                sww[i] += o.sww[i];
                zero[i] += o.zero[i];
                contributing[i] += o.contributing[i];
            }
        }
    };
    const double horizon = times.back();
    const double sigma0 = std::sqrt(p.sigma0_sq);
    const double sigmax = std::sqrt(p.sigmax_sq);
    auto acc = parallel::chunked_reduce<Acc>(
        trials, 256, workers, [&](Acc& a, std::size_t trial) {
            a.ensure(times.size());
            rng::Stream stream(seed, stream_offset + trial);
            const double v0 = sigma0 * stream.next_normal();
            const double b = v0 * v0;
            double v = v0, t = 0.0;
            StateLabel prev = StateLabel::kDrift;
            std::size_t n = 0;
            std::uint32_t count = 0;
            std::size_t ep = 0;
            auto record = [&](std::size_t idx) {
                if (n == 0) {
                    ++a.zero[idx];
                    return;
                }
                const double w = static_cast<double>(count) / static_cast<double>(n);
                a.sw[idx] += w;
                a.sww[idx] += w * w;
                ++a.contributing[idx];
            };
            for (;;) {
                t += stream.next_exponential(p.lambda);
                while (ep < times.size() && times[ep] < t) record(ep++);
                if (t > horizon) break;
                v = p.c * v + sigmax * stream.next_normal();
                const StateLabel lab =
                    v * v <= b ? StateLabel::kDrift : StateLabel::kFluctuation;
                if (lab != prev) {
                    ++count;
                    prev = lab;
                }
                ++n;
            }
        });
    std::vector<TimeFrequencyPoint> out(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
        out[i].t = times[i];
        out[i].zero_fraction =
            static_cast<double>(acc.zero[i]) / static_cast<double>(trials);
        out[i].contributing = acc.contributing[i];
        if (acc.contributing[i] >= 2) {
            out[i].se_w = detail::mean_se(acc.sw[i], acc.sww[i], acc.contributing[i], out[i].mean_w);
        } else {
            out[i].mean_w = std::numeric_limits<double>::quiet_NaN();
            out[i].se_w = std::numeric_limits<double>::quiet_NaN();
        }
    }
    return out;
}

struct RecurrencePoint {
    std::uint64_t checkpoint = 0;  // collision count n
    double fraction = 0.0;         // trials with C_n >= k
    double ci_lo = 0.0, ci_hi = 0.0;
};

// Fraction of trajectories that accumulated at least k crossings by each
// checkpoint, with Wilson intervals — direct evidence that both states keep
// being revisited.
inline std::vector<RecurrencePoint> recurrence_evidence(const GasParams& p,
                                                        const std::vector<std::uint64_t>& checkpoints,
                                                        std::uint32_t k_crossings,
                                                        std::size_t trials, std::uint64_t seed,
                                                        unsigned workers,
                                                        std::uint64_t stream_offset = 0) {
    if (checkpoints.empty()) throw std::invalid_argument("recurrence_evidence: no checkpoints");
    for (std::size_t i = 0; i < checkpoints.size(); ++i)
        if (checkpoints[i] == 0 || (i > 0 && checkpoints[i] <= checkpoints[i - 1]))
            throw std::invalid_argument(
                "recurrence_evidence: checkpoints must be positive, strictly increasing");
    if (trials == 0) throw std::invalid_argument("recurrence_evidence: trials must be > 0");
    struct Acc {
        std::vector<std::size_t> hits;
        void ensure(std::size_t m) {
            if (hits.empty()) hits.assign(m, 0);
        }
        void merge(const Acc& o) {
            if (o.hits.empty()) return;
            if (hits.empty()) {
                *this = o;
                return;
            }
            for (std::size_t i = 0; i < hits.size(); ++i) hits[i] += o.hits[i];
        }
    };
    const double sigma0 = std::sqrt(p.sigma0_sq);
    const double sigmax = std::sqrt(p.sigmax_sq);
    const std::uint64_t n_max = checkpoints.back();
    auto acc = parallel::chunked_reduce<Acc>(
        trials, 64, workers, [&](Acc& a, std::size_t trial) {
            a.ensure(checkpoints.size());
            rng::Stream stream(seed, stream_offset + trial);
            const double v0 = sigma0 * stream.next_normal();
            const double b = v0 * v0;
            double v = v0;
            StateLabel prev = StateLabel::kDrift;
            std::uint32_t count = 0;
            std::size_t cp = 0;
            for (std::uint64_t n = 1; n <= n_max && cp < checkpoints.size(); ++n) {
                v = p.c * v + sigmax * stream.next_normal();
                const StateLabel lab =
                    v * v <= b ? StateLabel::kDrift : StateLabel::kFluctuation;
                if (lab != prev) {
                    ++count;
                    prev = lab;
                }
                while (cp < checkpoints.size() && checkpoints[cp] == n) {
                    if (count >= k_crossings) ++a.hits[cp];
                    ++cp;
                }
                if (count >= k_crossings && cp < checkpoints.size()) {
                    // Already met the target for every later checkpoint.
                    for (std::size_t r = cp; r < checkpoints.size(); ++r) ++a.hits[r];
                    break;
                }
            }
        });
    std::vector<RecurrencePoint> out(checkpoints.size());
    for (std::size_t i = 0; i < checkpoints.size(); ++i) {
        const auto ci = stats::wilson_interval(acc.hits[i], trials);
        out[i] = {checkpoints[i],
                  static_cast<double>(acc.hits[i]) / static_cast<double>(trials), ci.lo, ci.hi};
    }
    return out;
}

struct HittingRecord {
    std::uint64_t n1 = 0;   // min(N_1, cap)
    double tau1 = 0.0;      // arrival time of collision n1
    bool censored = false;  // no F entry within cap collisions
};

struct Quantiles {
    double q25 = 0.0, q50 = 0.0, q75 = 0.0, q90 = 0.0;
};

struct HittingSummary {
    std::size_t trials = 0;
    std::uint64_t cap = 0;
    double censored_fraction = 0.0;
    double mean_n1 = 0.0, se_n1 = 0.0;      // capped means
    double mean_tau1 = 0.0, se_tau1 = 0.0;  // capped means
    Quantiles n1_quantiles, tau1_quantiles;
    double wald_ratio = 0.0;  // lambda * mean_tau1 / mean_n1, ~1 by Wald's identity
};

inline double tau1_lower_bound(const GasParams& p);

// First-entry experiment: per trial, run the chain until the first F state or
// the collision cap, recording min(N_1, cap) and its arrival time.
inline std::pair<std::vector<HittingRecord>, HittingSummary> hitting_experiment(
    const GasParams& p, std::uint64_t cap, std::size_t trials, std::uint64_t seed,
    unsigned workers, std::uint64_t stream_offset = 0) {
    if (cap == 0) throw std::invalid_argument("hitting_experiment: cap must be > 0");
    if (trials < 2) throw std::invalid_argument("hitting_experiment: trials must be >= 2");
    std::vector<HittingRecord> records(trials);
    const double sigma0 = std::sqrt(p.sigma0_sq);
    const double sigmax = std::sqrt(p.sigmax_sq);
    parallel::parallel_for(trials, workers, [&](std::size_t trial) {
        rng::Stream stream(seed, stream_offset + trial);
        const double v0 = sigma0 * stream.next_normal();
        const double b = v0 * v0;
        double v = v0, tau = 0.0;
        HittingRecord rec;
        rec.censored = true;
        for (std::uint64_t n = 1; n <= cap; ++n) {
            tau += stream.next_exponential(p.lambda);
            v = p.c * v + sigmax * stream.next_normal();
            if (v * v > b) {
                rec = {n, tau, false};
                break;
            }
        }
        if (rec.censored) rec = {cap, tau, true};
        records[trial] = rec;
    });
    HittingSummary s;
    s.trials = trials;
    s.cap = cap;
    stats::MomentAccumulator n_acc, tau_acc;
    std::size_t censored = 0;
    std::vector<double> n_sorted(trials), tau_sorted(trials);
    for (std::size_t i = 0; i < trials; ++i) {
        n_acc.add(static_cast<double>(records[i].n1));
        tau_acc.add(records[i].tau1);
        n_sorted[i] = static_cast<double>(records[i].n1);
        tau_sorted[i] = records[i].tau1;
        if (records[i].censored) ++censored;
    }
    std::sort(n_sorted.begin(), n_sorted.end());
    std::sort(tau_sorted.begin(), tau_sorted.end());
    s.censored_fraction = static_cast<double>(censored) / static_cast<double>(trials);
    s.mean_n1 = n_acc.mean();
    s.se_n1 = n_acc.mean_se();
    s.mean_tau1 = tau_acc.mean();
    s.se_tau1 = tau_acc.mean_se();
    s.n1_quantiles = {stats::quantile_sorted(n_sorted, 0.25), stats::quantile_sorted(n_sorted, 0.5),
                      stats::quantile_sorted(n_sorted, 0.75), stats::quantile_sorted(n_sorted, 0.9)};
    s.tau1_quantiles = {stats::quantile_sorted(tau_sorted, 0.25),
                        stats::quantile_sorted(tau_sorted, 0.5),
                        stats::quantile_sorted(tau_sorted, 0.75),
                        stats::quantile_sorted(tau_sorted, 0.9)};
    s.wald_ratio = p.lambda * s.mean_tau1 / s.mean_n1;
    return {std::move(records), s};
}

// E(tau_1) >= sigma_0^2 (1 - c^2) / (lambda sigma_x^2): the mean time to leave
// the drift band never beats this temperature-ratio bound.
inline double tau1_lower_bound(const GasParams& p) {
    return p.sigma0_sq * p.one_minus_c_sq / (p.lambda * p.sigmax_sq);
}

enum class LambdaMode { kFixed, kKinetic };  // kKinetic: lambda ~ 1/ratio

struct TemperatureRow {
    double ratio = 0.0;   // sigma_0^2 / sigma_x^2
    double lambda = 0.0;  // collision rate used
    double bound = 0.0;   // tau1_lower_bound at these parameters
    double mean_tau1 = 0.0, ci_lo = 0.0, ci_hi = 0.0;
    double censored_fraction = 0.0;
};

// Sweep of the initial-to-bath temperature ratio against the capped mean of
// tau_1 and the analytic lower bound.
inline std::vector<TemperatureRow> temperature_scan(const GasParams& base,
                                                    const std::vector<double>& ratios,
                                                    LambdaMode mode, std::uint64_t cap,
                                                    std::size_t trials, std::uint64_t seed,
                                                    unsigned workers) {
    if (ratios.empty()) throw std::invalid_argument("temperature_scan: no ratios");
    std::vector<TemperatureRow> rows;
    rows.reserve(ratios.size());
    std::uint64_t offset = 0;
    for (double r : ratios) {
        if (!(r > 0.0)) throw std::invalid_argument("temperature_scan: ratios must be positive");
        const double lambda = mode == LambdaMode::kFixed ? base.lambda : base.lambda / r;
        const GasParams p =
            GasParams::create(base.m_p, base.m_q, r * base.sigmax_sq, base.sigmax_sq, lambda);
        const auto [records, summary] =
            hitting_experiment(p, cap, trials, seed, workers, offset);
        TemperatureRow row;
        row.ratio = r;
        row.lambda = lambda;
        row.bound = tau1_lower_bound(p);
        row.mean_tau1 = summary.mean_tau1;
        row.ci_lo = summary.mean_tau1 - 1.959963984540054 * summary.se_tau1;
        row.ci_hi = summary.mean_tau1 + 1.959963984540054 * summary.se_tau1;
        row.censored_fraction = summary.censored_fraction;
        rows.push_back(row);
        offset += trials;
    }
    return rows;
}

}  // namespace thermeq::crossing

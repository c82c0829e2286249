#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "thermeq/gas_params.hpp"
#include "thermeq/parallel.hpp"
#include "thermeq/rng.hpp"
#include "thermeq/stats.hpp"
#include "thermeq/time_process.hpp"

// Ensemble equilibration viewed as a relaxation signal: the ensemble-averaged
// kinetic energy decays exponentially to the bath value at the velocity
// relaxation rate, while a tiny ensemble keeps fluctuating — the same
// large-M/small-M contrast as transverse relaxation of many vs few spins.
// The Kubo oscillator (a phase driven by Brownian frequency noise) is the
// classical reference signal for that analogy.
namespace thermeq::dephasing {

struct EnsembleSummary {
    std::vector<double> times;
    std::vector<double> mean_ke;  // (m_p/2) <V(t)^2> across the ensemble
    std::vector<double> se_ke;
    double equilibrium_ke = 0.0;  // (m_p/2) sigma_x^2/(1-c^2)
    std::size_t ensemble_size = 0;
};

// Mean kinetic-energy trace of `ensemble` independent molecules sampled every
// dt_sample up to the horizon.
inline EnsembleSummary kinetic_energy_trace(const GasParams& p, std::size_t ensemble,
                                            double horizon, double dt_sample, std::uint64_t seed,
                                            unsigned workers, std::uint64_t stream_offset = 0) {
    if (ensemble < 2) throw std::invalid_argument("kinetic_energy_trace: ensemble must be >= 2");
    if (!(horizon > 0.0) || !(dt_sample > 0.0) || !(dt_sample <= horizon))
        throw std::invalid_argument("kinetic_energy_trace: need 0 < dt_sample <= horizon");
    const auto n_samples = static_cast<std::size_t>(std::floor(horizon / dt_sample + 1e-9)) + 1;
    struct Acc {
        std::vector<double> s2, s4;
        void ensure(std::size_t m) {
            if (s2.empty()) {
                s2.assign(m, 0.0);
                s4.assign(m, 0.0);
            }
        }
        void merge(const Acc& o) {
            if (o.s2.empty()) return;
            if (s2.empty()) {
                *this = o;
                return;
            }
            for (std::size_t i = 0; i < s2.size(); ++i) {
                s2[i] += o.s2[i];
                s4[i] += o.s4[i];
            }
        }
    };
    auto acc = parallel::chunked_reduce<Acc>(
        ensemble, 64, workers, [&](Acc& a, std::size_t trial) {
            a.ensure(n_samples);
            rng::Stream stream(seed, stream_offset + trial);
            const auto traj = timeproc::simulate(p, horizon, stream);
            std::size_t jp = 0;
            double v = traj.v0;
            for (std::size_t k = 0; k < n_samples; ++k) {
                const double t = static_cast<double>(k) * dt_sample;
                while (jp < traj.jump_times.size() && traj.jump_times[jp] <= t)
                    v = traj.velocities[jp++];
                const double ke = v * v;
                a.s2[k] += ke;
                a.s4[k] += ke * ke;
            }
        });
    EnsembleSummary out;
    out.ensemble_size = ensemble;
    out.equilibrium_ke = 0.5 * p.m_p * p.equilibrium_variance();
    out.times.resize(n_samples);
    out.mean_ke.resize(n_samples);
    out.se_ke.resize(n_samples);
    const double m = static_cast<double>(ensemble);
    for (std::size_t k = 0; k < n_samples; ++k) {
        out.times[k] = static_cast<double>(k) * dt_sample;
        const double mean2 = acc.s2[k] / m;
        const double var2 = std::max(0.0, (acc.s4[k] - m * mean2 * mean2) / (m - 1.0));
        out.mean_ke[k] = 0.5 * p.m_p * mean2;
        out.se_ke[k] = 0.5 * p.m_p * std::sqrt(var2 / m);
    }
    return out;
}

// Exponential decay rate of |mean_ke - equilibrium| fitted on t <= fit_t_max
// by least squares in log space.  The analytic value is lambda (1 - c^2).
inline double equilibration_rate(const EnsembleSummary& s, double fit_t_max) {
    std::vector<double> ts, logs;
    for (std::size_t k = 0; k < s.times.size(); ++k) {
        if (s.times[k] > fit_t_max) break;
        const double resid = std::abs(s.mean_ke[k] - s.equilibrium_ke);
        if (resid > 1e-12 * std::max(1.0, s.equilibrium_ke)) {
            ts.push_back(s.times[k]);
            logs.push_back(std::log(resid));
        }
    }
    if (ts.size() < 2) throw std::runtime_error("equilibration_rate: not enough usable samples");
    return -stats::fit_line(ts, logs).slope;
}

// Relative fluctuation (sd/mean) of the mean-KE trace over t >= t_from; large
// for tiny ensembles, ~1/sqrt(M) for big ones.
inline double tail_fluctuation(const EnsembleSummary& s, double t_from) {
    stats::MomentAccumulator acc;
    for (std::size_t k = 0; k < s.times.size(); ++k)
        if (s.times[k] >= t_from) acc.add(s.mean_ke[k]);
    if (acc.count() < 2) throw std::runtime_error("tail_fluctuation: not enough tail samples");
    return std::sqrt(acc.variance()) / acc.mean();
}

struct KuboTrace {
    std::vector<double> times;
    std::vector<double> phase;   // accumulated phase
    std::vector<double> signal;  // sin(phase)
};

// Kubo oscillator: phi' = omega0 + sigma_w W(t) with W a Wiener path, phase
// accumulated by the Euler rule (left-point W).  sigma_w = 0 degenerates to a
// pure sinusoid.
inline KuboTrace kubo_trace(double omega0, double sigma_w, double horizon, double dt,
                            rng::Stream& stream) {
    if (!(horizon > 0.0) || !(dt > 0.0) || !(dt <= horizon))
        throw std::invalid_argument("kubo_trace: need 0 < dt <= horizon");
    if (!(sigma_w >= 0.0)) throw std::invalid_argument("kubo_trace: sigma_w must be >= 0");
    const auto n_steps = static_cast<std::size_t>(std::llround(horizon / dt));
    KuboTrace out;
    out.times.reserve(n_steps + 1);
    out.phase.reserve(n_steps + 1);
    out.signal.reserve(n_steps + 1);
    double t = 0.0, phi = 0.0, w = 0.0;
    const double sqrt_dt = std::sqrt(dt);
    for (std::size_t k = 0;; ++k) {
        out.times.push_back(t);
        out.phase.push_back(phi);
        out.signal.push_back(std::sin(phi));
        if (k == n_steps) break;
        phi += dt * (omega0 + sigma_w * w);
        w += sqrt_dt * stream.next_normal();
        t += dt;
    }
    return out;
}

}  // namespace thermeq::dephasing

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "thermeq/gas_params.hpp"
#include "thermeq/rng.hpp"
#include "thermeq/stats.hpp"

// The continuous-time velocity process: the collision chain subordinated to a
// Poisson clock of rate lambda.  V(t) = V_{N(t)} with N a Poisson process.
namespace thermeq::timeproc {

struct Trajectory {
    double v0 = 0.0;
    double horizon = 0.0;
    std::vector<double> jump_times;  // strictly increasing, in (0, horizon]
    std::vector<double> velocities;  // velocity right after each jump
    std::uint64_t stream_id = 0;

    // Number of collisions by time t (right-continuous).
    std::size_t jumps_by(double t) const {
        check(t);
        return static_cast<std::size_t>(
            std::upper_bound(jump_times.begin(), jump_times.end(), t) - jump_times.begin());
    }

    double value_at(double t) const {
        const std::size_t k = jumps_by(t);
        return k == 0 ? v0 : velocities[k - 1];
    }

private:
    void check(double t) const {
        if (!(t >= 0.0 && t <= horizon))
            throw std::out_of_range("Trajectory: time outside [0, horizon]");
    }
};

// Draw order per trajectory: V_0, then alternating (exponential gap, impulse);
// the final exponential that overshoots the horizon is consumed but produces
// no jump, keeping replay deterministic.
inline Trajectory simulate(const GasParams& p, double horizon, rng::Stream& stream) {
    if (!(horizon > 0.0)) throw std::domain_error("timeproc::simulate: horizon must be positive");
    Trajectory traj;
    traj.horizon = horizon;
    traj.stream_id = stream.stream_id();
    const double sigma0 = std::sqrt(p.sigma0_sq);
    const double sigmax = std::sqrt(p.sigmax_sq);
    traj.v0 = stream.next_normal(0.0, sigma0);
    double t = 0.0;
    double v = traj.v0;
    for (;;) {
        t += stream.next_exponential(p.lambda);
        if (t > horizon) break;
        v = p.c * v + stream.next_normal(0.0, sigmax);
        traj.jump_times.push_back(t);
        traj.velocities.push_back(v);
    }
    return traj;
}

// Exact marginal law of V(t): a Poisson(lambda t) mixture of the chain
// Gaussians, truncated once the remaining Poisson tail is below `tail_tol`.
// Weights use a log-space forward recurrence, so large lambda t is safe.
class MixtureDensity {
public:
    MixtureDensity(double t, const GasParams& p, double tail_tol = 1e-12) : p_(p), t_(t) {
        if (!(t >= 0.0)) throw std::domain_error("MixtureDensity: t must be >= 0");
        if (!(tail_tol > 0.0 && tail_tol < 1.0))
            throw std::domain_error("MixtureDensity: tail_tol must be in (0,1)");
        const double mu = p.lambda * t;
        if (mu == 0.0) {
            weights_ = {1.0};
            variances_ = {chain_variance(0, p)};
            tail_mass_ = 0.0;
            return;
        }
        const double log_mu = std::log(mu);
        // Generous cap: mean + 40 sd + 200 terms always covers tail_tol >= 1e-300.
        const std::size_t cap =
            static_cast<std::size_t>(mu + 40.0 * std::sqrt(mu + 1.0) + 200.0);
        double log_w = -mu;  // log P(N = 0)
        double cum = 0.0;
        for (std::size_t n = 0; n <= cap; ++n) {
            const double w = std::exp(log_w);
            weights_.push_back(w);
            variances_.push_back(chain_variance(static_cast<std::int64_t>(n), p));
            cum += w;
            if (1.0 - cum < tail_tol) break;
            log_w += log_mu - std::log(static_cast<double>(n + 1));
        }
        tail_mass_ = std::max(0.0, 1.0 - cum);
        if (tail_mass_ >= tail_tol)
            throw std::runtime_error("MixtureDensity: truncation cap exhausted");
    }

    std::size_t truncation_terms() const { return weights_.size(); }
    double tail_mass() const { return tail_mass_; }

    double pdf(double v) const {
        double s = 0.0;
        for (std::size_t n = 0; n < weights_.size(); ++n)
            s += weights_[n] * stats::normal_pdf(v, variances_[n]);
        return s;
    }

    double cdf(double v) const {
        double s = 0.0;
        for (std::size_t n = 0; n < weights_.size(); ++n)
            s += weights_[n] * stats::normal_cdf(v, variances_[n]);
        return s;
    }

    // Mixture variance: exact weighted sum (all components are centered).
    double variance() const {
        double s = 0.0;
        for (std::size_t n = 0; n < weights_.size(); ++n) s += weights_[n] * variances_[n];
        return s;
    }

private:
    GasParams p_;
    double t_;
    std::vector<double> weights_;
    std::vector<double> variances_;
    double tail_mass_ = 0.0;
};

inline double mixture_density(double v, double t, const GasParams& p, double tail_tol = 1e-12) {
    return MixtureDensity(t, p, tail_tol).pdf(v);
}

}  // namespace thermeq::timeproc

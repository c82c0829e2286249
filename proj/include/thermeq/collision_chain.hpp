#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "thermeq/gas_params.hpp"
#include "thermeq/rng.hpp"
#include "thermeq/stats.hpp"

// The discrete collision chain V_n = c V_{n-1} + X_n.
namespace thermeq::chain {

inline double step_collision(double v_prev, double impulse, double c) {
    if (!(c >= 0.0 && c < 1.0)) throw std::domain_error("step_collision: c must be in [0,1)");
    return c * v_prev + impulse;
}

struct Trajectory {
    double v0 = 0.0;
    std::vector<double> velocities;  // V_1..V_n
    std::vector<double> impulses;    // X_1..X_n, kept only when requested
    std::uint64_t stream_id = 0;

    // V_k with V_0 = v0.
    double velocity_at(std::size_t k) const {
        if (k == 0) return v0;
        if (k > velocities.size()) throw std::out_of_range("Trajectory: index past end");
        return velocities[k - 1];
    }
};

// Draw order per trajectory is fixed (V_0, then X_1..X_n) so a trajectory is
// reproducible from (seed, stream id) alone.
inline Trajectory simulate_chain(const GasParams& p, std::size_t n_collisions, rng::Stream& stream,
                                 bool record_impulses = false) {
    Trajectory traj;
    traj.stream_id = stream.stream_id();
    const double sigma0 = std::sqrt(p.sigma0_sq);
    const double sigmax = std::sqrt(p.sigmax_sq);
    traj.v0 = stream.next_normal(0.0, sigma0);
    traj.velocities.reserve(n_collisions);
    if (record_impulses) traj.impulses.reserve(n_collisions);
    double v = traj.v0;
    for (std::size_t k = 0; k < n_collisions; ++k) {
        const double x = stream.next_normal(0.0, sigmax);
        v = p.c * v + x;
        traj.velocities.push_back(v);
        if (record_impulses) traj.impulses.push_back(x);
    }
    return traj;
}

// Marginal law of V_n: centered Gaussian with the chain variance.
inline double marginal_density(double v, std::int64_t n, const GasParams& p) {
    return stats::normal_pdf(v, chain_variance(n, p));
}

}  // namespace thermeq::chain

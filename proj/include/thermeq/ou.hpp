#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "thermeq/parallel.hpp"
#include "thermeq/rng.hpp"
#include "thermeq/stats.hpp"

// High-collision-rate limit.  With the contraction renormalized as
// c_n = alpha^{1/lambda_n} and impulse variance (sigma_x^0)^2 / lambda_n, the
// jump process converges to the Ornstein-Uhlenbeck diffusion
//   dY = -theta Y dt + eta dW,  theta = -ln alpha,  eta = sigma_x^0.
// The coupled construction drives both processes with one Wiener path: the
// impulse at jump k is sigma_x^0 (W(U_{k+1}) - W(U_k)).
namespace thermeq::ou {

struct RenormalizedParams {
    double alpha = 0.5;     // per-unit-time contraction, in (0,1)
    double sigma_x0 = 1.0;  // diffusion scale; impulse sd is sigma_x0/sqrt(lambda_n)
    double sigma0_sq = 0.0; // initial-velocity variance (0 = deterministic start at 0)

    static RenormalizedParams create(double alpha, double sigma_x0, double sigma0_sq) {
        if (!(alpha > 0.0 && alpha < 1.0))
            throw std::invalid_argument("RenormalizedParams: alpha must be in (0,1)");
        if (!(sigma_x0 >= 0.0))
            throw std::invalid_argument("RenormalizedParams: sigma_x0 must be >= 0");
        if (!(sigma0_sq >= 0.0))
            throw std::invalid_argument("RenormalizedParams: sigma0_sq must be >= 0");
        return {alpha, sigma_x0, sigma0_sq};
    }

    double contraction(double lambda_n) const {
        check_rate(lambda_n);
        return std::pow(alpha, 1.0 / lambda_n);
    }

    double impulse_variance(double lambda_n) const {
        check_rate(lambda_n);
        return sigma_x0 * sigma_x0 / lambda_n;
    }

    static void check_rate(double lambda_n) {
        if (!(lambda_n > 0.0))
            throw std::invalid_argument("RenormalizedParams: lambda_n must be positive");
    }
};

struct OUParams {
    double theta = 1.0;  // mean-reversion rate
    double eta = 1.0;    // diffusion coefficient
};

inline OUParams ou_limit_params(const RenormalizedParams& r) {
    return {-std::log(r.alpha), r.sigma_x0};
}

// Var Y(t) started from variance sigma0_sq.
inline double ou_variance(const OUParams& ou, double sigma0_sq, double t) {
    if (!(ou.theta > 0.0)) throw std::domain_error("ou_variance: theta must be positive");
    if (!(t >= 0.0)) throw std::domain_error("ou_variance: t must be >= 0");
    const double e = -2.0 * ou.theta * t;
    return sigma0_sq * std::exp(e) - ou.eta * ou.eta * std::expm1(e) / (2.0 * ou.theta);
}

// The friction reading of the pre-limit chain: matching alpha = c^lambda gives
// theta = -lambda ln c.  Undefined at m_p = m_q (c = 0).
inline double friction_interpretation(double m_p, double m_q, double lambda) {
    if (!(m_q > 0.0) || !(m_p >= m_q))
        throw std::invalid_argument("friction_interpretation: require m_p >= m_q > 0");
    if (m_p == m_q)
        throw std::domain_error("friction_interpretation: m_p = m_q has no diffusion limit");
    if (!(lambda > 0.0)) throw std::invalid_argument("friction_interpretation: lambda > 0");
    return -lambda * std::log1p(-2.0 * m_q / (m_p + m_q));
}

// Sample Y at the given nondecreasing times using the exact Gaussian
// transition; one normal per strictly positive time increment.
inline std::vector<double> simulate_ou_exact(const OUParams& ou, double y0,
                                             const std::vector<double>& times,
                                             rng::Stream& stream) {
    if (!(ou.theta > 0.0)) throw std::domain_error("simulate_ou_exact: theta must be positive");
    if (!(ou.eta >= 0.0)) throw std::domain_error("simulate_ou_exact: eta must be >= 0");
    std::vector<double> out;
    out.reserve(times.size());
    double y = y0;
    double prev = 0.0;
    for (double t : times) {
        if (!(t >= prev)) throw std::invalid_argument("simulate_ou_exact: times must be nondecreasing, >= 0");
        const double dt = t - prev;
        if (dt > 0.0) {
            const double decay = std::exp(-ou.theta * dt);
            const double var = -ou.eta * ou.eta * std::expm1(-2.0 * ou.theta * dt) / (2.0 * ou.theta);
            y = y * decay + std::sqrt(var) * stream.next_normal();
        }
        out.push_back(y);
        prev = t;
    }
    return out;
}

struct PairSample {
    double v = 0.0;  // jump process at the eval time
    double y = 0.0;  // coupled OU path at the eval time
};

// One coupled trial.  Draw order is fixed: initial value, exponential gaps
// (including the overshoot gap), Wiener increments over the merged grid in
// time order, then the increment spanning horizon -> overshoot jump time.
// The OU path advances by stochastic Euler on the merged grid, whose mesh
// never exceeds 1/(10 lambda_n).
inline std::vector<PairSample> simulate_coupled_pair(const RenormalizedParams& r, double lambda_n,
                                                     const std::vector<double>& t_eval,
                                                     rng::Stream& stream) {
    RenormalizedParams::check_rate(lambda_n);
    if (t_eval.empty()) throw std::invalid_argument("simulate_coupled_pair: no eval times");
    for (std::size_t i = 0; i < t_eval.size(); ++i) {
        if (!(t_eval[i] > 0.0) || (i > 0 && !(t_eval[i] > t_eval[i - 1])))
            throw std::invalid_argument(
                "simulate_coupled_pair: eval times must be positive and strictly increasing");
    }
    const double horizon = t_eval.back();
    const OUParams ou = ou_limit_params(r);
    const double c_n = r.contraction(lambda_n);
    const double impulse_scale = r.sigma_x0;  // multiplies a raw Wiener increment

    const double v0 = std::sqrt(r.sigma0_sq) * stream.next_normal();

    // Jump clock.
    std::vector<double> jumps;
    jumps.reserve(static_cast<std::size_t>(lambda_n * horizon * 1.25) + 16);
    double t = 0.0;
    for (;;) {
        t += stream.next_exponential(lambda_n);
        if (t > horizon) break;
        jumps.push_back(t);
    }
    const double overshoot_time = t;

    // Merged time grid: jumps, eval times, and a uniform mesh of step
    // 1/(10 lambda_n), all on [0, horizon].
    std::vector<double> grid;
    const double mesh = 1.0 / (10.0 * lambda_n);
    const auto n_mesh = static_cast<std::size_t>(std::ceil(horizon / mesh));
    grid.reserve(jumps.size() + t_eval.size() + n_mesh + 2);
    grid.push_back(0.0);
    for (std::size_t k = 1; k < n_mesh; ++k) grid.push_back(static_cast<double>(k) * mesh);
    grid.insert(grid.end(), jumps.begin(), jumps.end());
    grid.insert(grid.end(), t_eval.begin(), t_eval.end());
    grid.push_back(horizon);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    // Walk the grid once: accumulate W, advance Y by Euler, capture W at jump
    // nodes and Y at eval nodes (exact value matches, both were inserted).
    std::vector<double> w_at_jump(jumps.size());
    std::vector<double> y_at_eval(t_eval.size());
    double w = 0.0, y = v0;
    std::size_t jp = 0, ep = 0;
    auto capture = [&](double node) {
        while (jp < jumps.size() && jumps[jp] == node) w_at_jump[jp++] = w;
        while (ep < t_eval.size() && t_eval[ep] == node) y_at_eval[ep++] = y;
    };
    capture(grid.front());
    for (std::size_t k = 1; k < grid.size(); ++k) {
        const double dt = grid[k] - grid[k - 1];
        const double dw = std::sqrt(dt) * stream.next_normal();
        y += -ou.theta * y * dt + ou.eta * dw;
        w += dw;
        capture(grid[k]);
    }
    const double w_end = w;

    // Wiener increment covering [horizon, overshoot jump), needed by the last
    // in-horizon impulse.
    const double w_overshoot =
        w_end + std::sqrt(overshoot_time - horizon) * stream.next_normal();

    // Jump process: impulse k spans [U_k, U_{k+1}) with U_{J+1} the overshoot.
    std::vector<PairSample> out(t_eval.size());
    double v = v0;
    std::size_t eval_idx = 0;
    for (std::size_t k = 0; k < jumps.size(); ++k) {
        while (eval_idx < t_eval.size() && t_eval[eval_idx] < jumps[k]) {
            out[eval_idx] = {v, y_at_eval[eval_idx]};
            ++eval_idx;
        }
        const double w_next = (k + 1 < jumps.size()) ? w_at_jump[k + 1] : w_overshoot;
        v = c_n * v + impulse_scale * (w_next - w_at_jump[k]);
    }
    while (eval_idx < t_eval.size()) {
        out[eval_idx] = {v, y_at_eval[eval_idx]};
        ++eval_idx;
    }
    return out;
}

struct ExceedancePoint {
    double t = 0.0;
    double exceedance = 0.0;  // fraction of trials with |V - Y| > epsilon
    double ci_lo = 0.0, ci_hi = 0.0;
};

struct CoupledExperiment {
    std::vector<std::vector<double>> abs_errors;  // [trial][eval time]
    std::vector<ExceedancePoint> exceedance;      // one per eval time
};

// Monte Carlo over coupled trials; per-trial streams make the result
// independent of the worker count.
inline CoupledExperiment run_coupled_experiment(const RenormalizedParams& r, double lambda_n,
                                                const std::vector<double>& t_eval,
                                                std::size_t trials, double epsilon,
                                                std::uint64_t seed, std::uint64_t stream_offset,
                                                unsigned workers) {
    if (trials == 0) throw std::invalid_argument("run_coupled_experiment: trials must be > 0");
    if (!(epsilon > 0.0)) throw std::invalid_argument("run_coupled_experiment: epsilon must be > 0");
    CoupledExperiment result;
    result.abs_errors.assign(trials, {});
    parallel::parallel_for(trials, workers, [&](std::size_t i) {
        rng::Stream stream(seed, stream_offset + i);
        const auto samples = simulate_coupled_pair(r, lambda_n, t_eval, stream);
        auto& row = result.abs_errors[i];
        row.resize(samples.size());
        for (std::size_t k = 0; k < samples.size(); ++k)
            row[k] = std::abs(samples[k].v - samples[k].y);
    });
    result.exceedance.resize(t_eval.size());
    for (std::size_t k = 0; k < t_eval.size(); ++k) {
        std::size_t count = 0;
        for (std::size_t i = 0; i < trials; ++i)
            if (result.abs_errors[i][k] > epsilon) ++count;
        const auto ci = stats::wilson_interval(count, trials);
        result.exceedance[k] = {t_eval[k], static_cast<double>(count) / static_cast<double>(trials),
                                ci.lo, ci.hi};
    }
    return result;
}

}  // namespace thermeq::ou

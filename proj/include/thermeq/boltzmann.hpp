#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "thermeq/gas_params.hpp"
#include "thermeq/stats.hpp"

// Deterministic solver for the kinetic equation of the velocity density,
//   df/dt (v) = lambda [ integral f(u) g(v - c u) du - f(v) ],
// where g is the N(0, sigma_x^2) impulse density.  The gain term is the
// density of cV + X evaluated by substitution on the native grid (the 1/c
// Jacobian of the textbook form integral f((v-x)/c) g(x) dx / c is absorbed
// exactly), so no interpolation of f is ever needed and trapezoid quadrature
// of the smooth Gaussian-windowed integrand is spectrally accurate.
namespace thermeq::boltzmann {

struct SolverOptions {
    double max_dt_lambda = 0.1;         // largest admissible dt * lambda
    double boundary_tolerance = 1e-7;   // density allowed at the outermost nodes
    double step_mass_tolerance = 1e-8;  // per-step mass drift
    double clip_mass_tolerance = 1e-6;  // cumulative clipped negative mass
    double gain_window_sigmas = 8.0;    // impulse-kernel truncation radius
};

// Uniform symmetric grid on [-v_max, v_max].  Nodes are (2i - (n-1)) * half
// so that mirrored indices hold exactly negated abscissae.
class DensityGrid {
public:
    DensityGrid(double v_max, std::vector<double> values)
        : v_max_(v_max), values_(std::move(values)) {
        if (!(v_max > 0.0)) throw std::invalid_argument("DensityGrid: v_max must be positive");
        if (values_.size() < 8) throw std::invalid_argument("DensityGrid: need at least 8 nodes");
    }

    static DensityGrid gaussian(double v_max, std::size_t n, double variance) {
        DensityGrid g(v_max, std::vector<double>(n, 0.0));
        for (std::size_t i = 0; i < n; ++i)
            g.values_[i] = stats::normal_pdf(g.point(i), variance);
        return g;
    }

    std::size_t size() const { return values_.size(); }
    double v_max() const { return v_max_; }
    double spacing() const { return 2.0 * v_max_ / static_cast<double>(size() - 1); }
    double point(std::size_t i) const {
        const double half = v_max_ / static_cast<double>(size() - 1);
        return static_cast<double>(2.0 * static_cast<double>(i) - static_cast<double>(size() - 1)) * half;
    }
    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }

    double mass() const {
        double s = 0.5 * (values_.front() + values_.back());
        for (std::size_t i = 1; i + 1 < values_.size(); ++i) s += values_[i];
        return s * spacing();
    }

    double variance() const {
        const double m = mass();
        if (!(m > 0.0)) throw std::runtime_error("DensityGrid: nonpositive mass");
        double s = 0.5 * (point(0) * point(0) * values_.front() +
                          point(size() - 1) * point(size() - 1) * values_.back());
        for (std::size_t i = 1; i + 1 < values_.size(); ++i) {
            const double v = point(i);
            s += v * v * values_[i];
        }
        return s * spacing() / m;
    }

private:
    double v_max_;
    std::vector<double> values_;
};

namespace detail {

// gain(v_i) = integral f(u) g(v_i - c u) du over the grid, trapezoid weights,
// kernel truncated at gain_window_sigmas.  The Gaussian factors advance by a
// two-term multiplicative recurrence, re-anchored on std::exp every 256 nodes
// to stop rounding drift.
inline void gain_into(const std::vector<double>& f, double v_max, double c, double sigmax_sq,
                      double window_sigmas, std::vector<double>& out) {
    const std::size_t n = f.size();
    const double h = 2.0 * v_max / static_cast<double>(n - 1);
    const double half = v_max / static_cast<double>(n - 1);
    const double sx = std::sqrt(sigmax_sq);
    const double gnorm = 1.0 / std::sqrt(2.0 * std::numbers::pi * sigmax_sq);
    const double window = window_sigmas * sx;
    const double ch = c * h;
    const double decay = std::exp(-ch * ch / sigmax_sq);
    auto node = [&](std::size_t j) {
        return (2.0 * static_cast<double>(j) - static_cast<double>(n - 1)) * half;
    };
    for (std::size_t i = 0; i < n; ++i) {
        const double v = node(i);
        // u window: |v - c u| <= window
        double lo_f = std::ceil(((v - window) / c + v_max) / h);
        double hi_f = std::floor(((v + window) / c + v_max) / h);
        const std::size_t j_lo = static_cast<std::size_t>(std::max(0.0, lo_f));
        const std::size_t j_hi =
            static_cast<std::size_t>(std::min(static_cast<double>(n - 1), hi_f));
        double acc = 0.0;
        if (lo_f <= static_cast<double>(n - 1) && hi_f >= 0.0 && j_lo <= j_hi) {
            double e = 0.0, ratio = 1.0;
            for (std::size_t j = j_lo; j <= j_hi; ++j) {
                if ((j - j_lo) % 256 == 0) {
                    const double d = v - c * node(j);
                    e = std::exp(-0.5 * d * d / sigmax_sq);
                    ratio = std::exp((2.0 * d * ch - ch * ch) / (2.0 * sigmax_sq));
                }
                const double w = (j == 0 || j == n - 1) ? 0.5 : 1.0;
                acc += w * f[j] * e;
                e *= ratio;
                ratio *= decay;
            }
        }
        out[i] = acc * h * gnorm;
    }
}

inline void rhs_into(const std::vector<double>& f, double v_max, const GasParams& p,
                     const SolverOptions& opts, std::vector<double>& out) {
    const std::size_t n = f.size();
    if (std::max(std::abs(f.front()), std::abs(f.back())) > opts.boundary_tolerance)
        throw std::runtime_error(
            "collision_rhs: density reaches the grid boundary; enlarge v_max");
    if (p.c == 0.0) {
        // Degenerate kernel: the post-collision law is exactly g, scaled by the
        // total mass of f.
        const double h = 2.0 * v_max / static_cast<double>(n - 1);
        double mass = 0.5 * (f.front() + f.back());
        for (std::size_t i = 1; i + 1 < n; ++i) mass += f[i];
        mass *= h;
        const double half = v_max / static_cast<double>(n - 1);
        for (std::size_t i = 0; i < n; ++i) {
            const double v = (2.0 * static_cast<double>(i) - static_cast<double>(n - 1)) * half;
            out[i] = p.lambda * (mass * stats::normal_pdf(v, p.sigmax_sq) - f[i]);
        }
        return;
    }
    gain_into(f, v_max, p.c, p.sigmax_sq, opts.gain_window_sigmas, out);
    for (std::size_t i = 0; i < n; ++i) out[i] = p.lambda * (out[i] - f[i]);
}

}  // namespace detail

// Right-hand side lambda(gain - f) of the kinetic equation on the grid.
inline std::vector<double> collision_rhs(const DensityGrid& grid, const GasParams& p,
                                         const SolverOptions& opts = {}) {
    std::vector<double> out(grid.size());
    detail::rhs_into(grid.values(), grid.v_max(), p, opts, out);
    return out;
}

// max_i |rhs_i|: zero exactly at the fixed point N(0, sigma_x^2/(1-c^2)).
inline double stationarity_residual(const DensityGrid& grid, const GasParams& p,
                                    const SolverOptions& opts = {}) {
    double r = 0.0;
    for (double x : collision_rhs(grid, p, opts)) r = std::max(r, std::abs(x));
    return r;
}

struct EvolveReport {
    std::size_t steps = 0;
    double max_step_mass_drift = 0.0;
    double clipped_mass = 0.0;
};

// Classical RK4 in time.  Each committed step is checked for mass drift,
// negatives are clipped (tracked cumulatively), and the boundary-density guard
// inside the RHS rejects grids the density has outgrown.
inline DensityGrid evolve_density(DensityGrid grid, const GasParams& p, double t_end, double dt,
                                  const SolverOptions& opts = {}, EvolveReport* report = nullptr) {
    if (!(t_end >= 0.0)) throw std::invalid_argument("evolve_density: t_end must be >= 0");
    if (!(dt > 0.0)) throw std::invalid_argument("evolve_density: dt must be positive");
    if (dt * p.lambda > opts.max_dt_lambda * (1.0 + 1e-12))
        throw std::invalid_argument("evolve_density: dt * lambda exceeds stability bound");
    EvolveReport local;
    if (t_end > 0.0) {
        const auto n_steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));
        const double step = t_end / static_cast<double>(n_steps);
        const std::size_t n = grid.size();
        std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
        const double h = grid.spacing();
        for (std::size_t s = 0; s < n_steps; ++s) {
            auto& f = grid.values();
            const double mass_before = grid.mass();
            detail::rhs_into(f, grid.v_max(), p, opts, k1);
            for (std::size_t i = 0; i < n; ++i) tmp[i] = f[i] + 0.5 * step * k1[i];
            detail::rhs_into(tmp, grid.v_max(), p, opts, k2);
            for (std::size_t i = 0; i < n; ++i) tmp[i] = f[i] + 0.5 * step * k2[i];
            detail::rhs_into(tmp, grid.v_max(), p, opts, k3);
            for (std::size_t i = 0; i < n; ++i) tmp[i] = f[i] + step * k3[i];
            detail::rhs_into(tmp, grid.v_max(), p, opts, k4);
            for (std::size_t i = 0; i < n; ++i)
                f[i] += step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            double clipped = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                if (f[i] < 0.0) {
                    clipped -= f[i] * h;
                    f[i] = 0.0;
                }
            local.clipped_mass += clipped;
            if (local.clipped_mass > opts.clip_mass_tolerance)
                throw std::runtime_error("evolve_density: clipped negative mass beyond tolerance");
            const double drift = std::abs(grid.mass() - clipped - mass_before);
            local.max_step_mass_drift = std::max(local.max_step_mass_drift, drift);
            if (drift > opts.step_mass_tolerance)
                throw std::runtime_error("evolve_density: per-step mass drift beyond tolerance");
            ++local.steps;
        }
    }
    if (report) *report = local;
    return grid;
}

}  // namespace thermeq::boltzmann

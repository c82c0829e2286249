#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

// Core parameters of the two-component gas model and the closed-form variance
// laws of the tagged-particle velocity.
//
// A tagged particle of mass m_p suffers elastic collisions with bath particles
// of mass m_q <= m_p; each collision contracts its velocity by
// c = (m_p - m_q)/(m_p + m_q) and adds an independent N(0, sigma_x^2) impulse:
//   V_n = c V_{n-1} + X_n,   V_0 ~ N(0, sigma_0^2).
// Collisions arrive as a Poisson process of rate lambda.
namespace thermeq {

struct GasParams {
    double m_p = 1.0;        // tagged-particle mass
    double m_q = 1.0;        // bath-particle mass, 0 < m_q <= m_p
    double sigma0_sq = 1.0;  // variance of the initial velocity
    double sigmax_sq = 1.0;  // variance of one collision impulse
    double lambda = 1.0;     // collision rate

    // Derived, precomputed in numerically stable form.
    double c = 0.0;               // contraction factor, in [0,1)
    double one_minus_c_sq = 1.0;  // 1-c^2 = 4 m_p m_q/(m_p+m_q)^2, exact at c->1
    double log_c = 0.0;           // log(c); -inf when c == 0

    static GasParams create(double m_p, double m_q, double sigma0_sq, double sigmax_sq,
                            double lambda) {
        if (!(m_q > 0.0) || !(m_p >= m_q))
            throw std::invalid_argument("GasParams: require m_p >= m_q > 0");
        if (!(sigma0_sq > 0.0) || !(sigmax_sq > 0.0))
            throw std::invalid_argument("GasParams: require positive variances");
        if (!(lambda > 0.0)) throw std::invalid_argument("GasParams: require lambda > 0");
        GasParams p;
        p.m_p = m_p;
        p.m_q = m_q;
        p.sigma0_sq = sigma0_sq;
        p.sigmax_sq = sigmax_sq;
        p.lambda = lambda;
        const double msum = m_p + m_q;
        p.c = (m_p - m_q) / msum;
        p.one_minus_c_sq = 4.0 * m_p * m_q / (msum * msum);
        p.log_c = std::log1p(-2.0 * m_q / msum);  // -inf for m_p == m_q
        return p;
    }

    double equilibrium_variance() const { return sigmax_sq / one_minus_c_sq; }

    // Exponential rate at which Var V(t) approaches equilibrium.
    double relaxation_rate() const { return lambda * one_minus_c_sq; }
};

// Contraction factor alone, with the same domain checks.
inline double restitution_coefficient(double m_p, double m_q) {
    if (!(m_q > 0.0) || !(m_p >= m_q))
        throw std::invalid_argument("restitution_coefficient: require m_p >= m_q > 0");
    return (m_p - m_q) / (m_p + m_q);
}

// Var V_n = c^{2n} sigma_0^2 + sigma_x^2 (1 - c^{2n}) / (1 - c^2).
// Evaluated through log c and expm1 so that c near 1 and huge n stay accurate.
inline double chain_variance(std::int64_t n, const GasParams& p) {
    if (n < 0) throw std::domain_error("chain_variance: n must be >= 0");
    if (n == 0) return p.sigma0_sq;
    const double e = 2.0 * static_cast<double>(n) * p.log_c;  // log(c^{2n}), -inf at c=0
    const double c2n = std::exp(e);
    const double one_minus_c2n = -std::expm1(e);
    return c2n * p.sigma0_sq + p.sigmax_sq * one_minus_c2n / p.one_minus_c_sq;
}

// Var V(t) = sigma_0^2 e^{-lambda(1-c^2)t}
//          + sigma_x^2/(1-c^2) (1 - e^{-lambda(1-c^2)t}).
inline double time_variance(double t, const GasParams& p) {
    if (!(t >= 0.0)) throw std::domain_error("time_variance: t must be >= 0");
    const double e = -p.relaxation_rate() * t;
    return p.sigma0_sq * std::exp(e) - p.equilibrium_variance() * std::expm1(e);
}

struct EquilibriumSpec {
    double mean = 0.0;
    double variance = 1.0;
};

// The centered Gaussian N(0, sigma_x^2/(1-c^2)) both processes relax to.
inline EquilibriumSpec equilibrium_spec(const GasParams& p) {
    return {0.0, p.equilibrium_variance()};
}

}  // namespace thermeq

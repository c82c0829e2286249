#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "thermeq/rng.hpp"

// Small statistics toolkit used by the library drivers and the test suites:
// normal distribution helpers, running moments with standard errors,
// Kolmogorov-Smirnov machinery, Wilson intervals, quantiles, least squares.
namespace thermeq::stats {

inline double normal_pdf(double x, double variance) {
    if (!(variance > 0.0)) throw std::domain_error("normal_pdf: variance must be positive");
    return std::exp(-0.5 * x * x / variance) / std::sqrt(2.0 * std::numbers::pi * variance);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline double normal_cdf(double x, double variance) {
    if (!(variance > 0.0)) throw std::domain_error("normal_cdf: variance must be positive");
    return normal_cdf(x / std::sqrt(variance));
}

inline double normal_quantile(double p) { return rng::normal_quantile(p); }

// Running moments up to fourth order; enough for means, variances, and the
// standard error of a sample variance (via the empirical fourth moment).
class MomentAccumulator {
public:
    void add(double x) {
        ++n_;
        s1_ += x;
        s2_ += x * x;
        s3_ += x * x * x;
        s4_ += x * x * x * x;
    }

    void merge(const MomentAccumulator& o) {
        n_ += o.n_;
        s1_ += o.s1_;
        s2_ += o.s2_;
        s3_ += o.s3_;
        s4_ += o.s4_;
    }

    std::size_t count() const { return n_; }
    double mean() const {
        require(1);
        return s1_ / static_cast<double>(n_);
    }
    double variance() const {  // unbiased
        require(2);
        const double n = static_cast<double>(n_);
        const double m = mean();
        return std::max(0.0, (s2_ - n * m * m) / (n - 1.0));
    }
    double mean_se() const { return std::sqrt(variance() / static_cast<double>(n_)); }

    // Central fourth moment from raw power sums.
    double fourth_central() const {
        require(2);
        const double n = static_cast<double>(n_);
        const double m = mean();
        return std::max(0.0, (s4_ - 4.0 * m * s3_ + 6.0 * m * m * s2_) / n - 3.0 * m * m * m * m);
    }

    // SE of the sample variance: sqrt((m4 - s^4)/n), valid for any law with
    // finite fourth moment.
    double variance_se() const {
        const double v = variance();
        const double m4 = fourth_central();
        return std::sqrt(std::max(0.0, m4 - v * v) / static_cast<double>(n_));
    }

private:
    void require(std::size_t k) const {
        if (n_ < k) throw std::logic_error("MomentAccumulator: not enough samples");
    }
    std::size_t n_ = 0;
    double s1_ = 0, s2_ = 0, s3_ = 0, s4_ = 0;
};

// sup_x |F_n(x) - F(x)| for sorted samples against a reference CDF.
inline double ks_statistic(const std::vector<double>& sorted,
                           const std::function<double(double)>& cdf) {
    if (sorted.empty()) throw std::invalid_argument("ks_statistic: empty sample");
    const double n = static_cast<double>(sorted.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double f = cdf(sorted[i]);
        d = std::max(d, std::abs(f - static_cast<double>(i) / n));
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
    }
    return d;
}

inline double ks_statistic_two_sample(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_statistic_two_sample: empty sample");
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / a.size() -
                                 static_cast<double>(j) / b.size()));
    }
    return d;
}

// Kolmogorov survival function Q(x) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 x^2),
// with the theta-function series for small x where the alternating series is slow.
inline double kolmogorov_sf(double x) {
    if (x <= 0.0) return 1.0;
    if (x < 1.18) {
        const double t = std::exp(-std::numbers::pi * std::numbers::pi / (8.0 * x * x));
        const double sum = t + std::pow(t, 9.0) + std::pow(t, 25.0) + std::pow(t, 49.0);
        return std::max(0.0, 1.0 - std::sqrt(2.0 * std::numbers::pi) / x * sum);
    }
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * x * x);
        sum += (k % 2 == 1) ? term : -term;
        if (term < 1e-18) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

// Stephens' finite-n correction: p = Q((sqrt(n) + 0.12 + 0.11/sqrt(n)) D).
inline double ks_p_value(double d, std::size_t n) {
    const double sn = std::sqrt(static_cast<double>(n));
    return kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d);
}

inline double ks_p_value_two_sample(double d, std::size_t n, std::size_t m) {
    const double ne = static_cast<double>(n) * static_cast<double>(m) /
                      static_cast<double>(n + m);
    const double sn = std::sqrt(ne);
    return kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d);
}

struct Interval {
    double lo = 0.0, hi = 0.0;
    bool contains(double p) const { return lo <= p && p <= hi; }
};

// Wilson score interval for a binomial proportion.
inline Interval wilson_interval(std::size_t successes, std::size_t trials, double z = 1.959963984540054) {
    if (trials == 0) throw std::invalid_argument("wilson_interval: zero trials");
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    // At the degenerate edges the score bound is exactly 0 or 1; rounding in
    // the general formula can land a half-ulp off, so pin them.
    const double lo = successes == 0 ? 0.0 : std::max(0.0, center - half);
    const double hi = successes == trials ? 1.0 : std::min(1.0, center + half);
    return {lo, hi};
}

// Linear-interpolation quantile of an already-sorted sample.
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw std::invalid_argument("quantile_sorted: empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw std::domain_error("quantile_sorted: q outside [0,1]");
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

struct LineFit {
    double slope = 0.0, intercept = 0.0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("fit_line: need two equal-length samples of size >= 2");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double det = n * sxx - sx * sx;
    if (det == 0.0) throw std::invalid_argument("fit_line: degenerate abscissae");
    LineFit f;
    f.slope = (n * sxy - sx * sy) / det;
    f.intercept = (sy - f.slope * sx) / n;
    return f;
}

// Largest drop of `means` beyond simultaneous two-sided bands mean_i +/- z*se_i:
// max over i<j of (means[i] - z*ses[i]) - (means[j] + z*ses[j]).  Positive
// values flag a statistically resolved decrease somewhere in the sequence.
inline double band_violation_score(const std::vector<double>& means,
                                   const std::vector<double>& ses, double z) {
    if (means.size() != ses.size() || means.size() < 2)
        throw std::invalid_argument("band_violation_score: need two equal-length arrays, size >= 2");
    double best_lower = means[0] - z * ses[0];
    double score = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 1; j < means.size(); ++j) {
        score = std::max(score, best_lower - (means[j] + z * ses[j]));
        best_lower = std::max(best_lower, means[j] - z * ses[j]);
    }
    return score;
}

}  // namespace thermeq::stats

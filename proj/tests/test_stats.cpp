#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "thermeq/rng.hpp"
#include "thermeq/stats.hpp"

using namespace thermeq;

TEST_CASE("normal pdf and cdf reference values") {
    REQUIRE(stats::normal_pdf(0.0, 1.0) == Catch::Approx(0.3989422804014327).epsilon(1e-14));
    REQUIRE(stats::normal_pdf(1.0, 4.0) ==
            Catch::Approx(std::exp(-0.125) / std::sqrt(8.0 * std::numbers::pi)).epsilon(1e-14));
    REQUIRE(stats::normal_cdf(0.0) == 0.5);
    REQUIRE(stats::normal_cdf(1.959963984540054) == Catch::Approx(0.975).epsilon(1e-12));
    REQUIRE(stats::normal_cdf(-1.0, 1.0) == Catch::Approx(0.15865525393145707).epsilon(1e-12));
    REQUIRE(stats::normal_cdf(2.0, 4.0) == stats::normal_cdf(1.0));
}

TEST_CASE("moment accumulator reproduces direct two-pass results") {
    const std::vector<double> xs = {1.5, -2.0, 0.25, 3.0, 3.0, -1.0, 0.0, 7.5};
    stats::MomentAccumulator acc;
    for (double x : xs) acc.add(x);

    const double n = static_cast<double>(xs.size());
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= n;
    double ss = 0.0, s4 = 0.0;
    for (double x : xs) {
        ss += (x - mean) * (x - mean);
        s4 += std::pow(x - mean, 4);
    }
    const double var_unbiased = ss / (n - 1.0);
    const double m4 = s4 / n;

    REQUIRE(acc.count() == xs.size());
    REQUIRE(acc.mean() == Catch::Approx(mean).epsilon(1e-13));
    REQUIRE(acc.variance() == Catch::Approx(var_unbiased).epsilon(1e-12));
    REQUIRE(acc.mean_se() == Catch::Approx(std::sqrt(var_unbiased / n)).epsilon(1e-12));
    REQUIRE(acc.fourth_central() == Catch::Approx(m4).epsilon(1e-10));

    stats::MomentAccumulator a, b;
    for (std::size_t i = 0; i < xs.size(); ++i) (i < 3 ? a : b).add(xs[i]);
    a.merge(b);
    REQUIRE(a.mean() == Catch::Approx(acc.mean()).epsilon(1e-14));
    REQUIRE(a.variance() == Catch::Approx(acc.variance()).epsilon(1e-14));
}

TEST_CASE("variance standard error matches the Gaussian sampling law") {
    // For N(0, s^2): Var(sample variance) ~ 2 s^4 / n, i.e. SE = s^2 sqrt(2/n).
    rng::Stream s(2024, 0);
    stats::MomentAccumulator acc;
    const int n = 50000;
    const double sd = 3.0;
    for (int i = 0; i < n; ++i) acc.add(s.next_normal(0.0, sd));
    const double expected_se = sd * sd * std::sqrt(2.0 / n);
    REQUIRE(acc.variance_se() == Catch::Approx(expected_se).epsilon(0.1));
    REQUIRE(std::abs(acc.variance() - sd * sd) < 4.0 * acc.variance_se());
}

TEST_CASE("ks statistic agrees with direct enumeration on a small sample") {
    // F(x) = x on [0,1]; sample {0.1, 0.4, 0.8}.
    // Steps: |0 - 0.1|, |1/3 - 0.1|, |1/3 - 0.4|, |2/3 - 0.4|, |2/3 - 0.8|, |1 - 0.8|.
    const std::vector<double> xs = {0.1, 0.4, 0.8};
    const double d = stats::ks_statistic(xs, [](double x) { return x; });
    REQUIRE(d == Catch::Approx(4.0 / 15.0).epsilon(1e-14));
}

TEST_CASE("two-sample ks statistic agrees with direct enumeration") {
    const std::vector<double> a = {1.0, 2.0, 3.0, 4.0};
    const std::vector<double> b = {2.5, 3.5};
    // After 2.0: F_a = 1/2, F_b = 0 -> D = 1/2.
    REQUIRE(stats::ks_statistic_two_sample(a, b) == Catch::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("kolmogorov tail function reference values") {
    // Near the classical 5% and 1% critical points; reference values from an
    // independent evaluation of the alternating series 2*sum (-1)^{k-1} e^{-2k^2x^2}.
    REQUIRE(stats::kolmogorov_sf(1.36) == Catch::Approx(0.049485876755377876).epsilon(1e-12));
    REQUIRE(stats::kolmogorov_sf(1.63) == Catch::Approx(0.009846364888486529).epsilon(1e-12));
    REQUIRE(stats::kolmogorov_sf(0.5) == Catch::Approx(0.9639452436648751).epsilon(1e-9));
    REQUIRE(stats::kolmogorov_sf(1e-3) == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(stats::kolmogorov_sf(10.0) < 1e-80);
}

TEST_CASE("ks p-values are calibrated on uniform samples") {
    // Under H0 the p-value is ~Uniform(0,1); check a few fixed seeds give
    // non-extreme values and a shifted alternative is strongly rejected.
    rng::Stream s(77, 0);
    std::vector<double> xs(2000);
    for (auto& x : xs) x = s.next_uniform();
    std::sort(xs.begin(), xs.end());
    const double d0 = stats::ks_statistic(xs, [](double x) { return x; });
    REQUIRE(stats::ks_p_value(d0, xs.size()) > 0.01);
    const double d1 =
        stats::ks_statistic(xs, [](double x) { return std::clamp(x * x, 0.0, 1.0); });
    REQUIRE(stats::ks_p_value(d1, xs.size()) < 1e-6);
}

TEST_CASE("wilson interval brackets the point estimate and handles edges") {
    const auto iv = stats::wilson_interval(8, 10);
    REQUIRE(iv.lo > 0.4);
    REQUIRE(iv.hi < 0.98);
    REQUIRE(iv.lo < 0.8);
    REQUIRE(iv.hi > 0.8);
    const auto zero = stats::wilson_interval(0, 10);
    REQUIRE(zero.lo == 0.0);
    REQUIRE(zero.hi > 0.0);
    const auto all = stats::wilson_interval(10, 10);
    REQUIRE(all.hi == 1.0);
    REQUIRE(all.lo < 1.0);
    // Known value: k=8, n=10, z=1.96 -> (0.4902, 0.9433) approximately.
    REQUIRE(iv.lo == Catch::Approx(0.4901625).margin(2e-3));
    REQUIRE(iv.hi == Catch::Approx(0.9433178).margin(2e-3));
}

TEST_CASE("sorted quantile interpolates linearly") {
    const std::vector<double> xs = {1.0, 2.0, 3.0, 4.0};
    REQUIRE(stats::quantile_sorted(xs, 0.0) == 1.0);
    REQUIRE(stats::quantile_sorted(xs, 1.0) == 4.0);
    REQUIRE(stats::quantile_sorted(xs, 0.5) == Catch::Approx(2.5).epsilon(1e-14));
    REQUIRE(stats::quantile_sorted(xs, 1.0 / 3.0) == Catch::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("line fit recovers exact affine data") {
    const std::vector<double> x = {0.0, 1.0, 2.0, 3.0, 4.0};
    std::vector<double> y;
    for (double xi : x) y.push_back(-2.5 * xi + 7.0);
    const auto f = stats::fit_line(x, y);
    REQUIRE(f.slope == Catch::Approx(-2.5).epsilon(1e-13));
    REQUIRE(f.intercept == Catch::Approx(7.0).epsilon(1e-13));
}

TEST_CASE("band violation score flags only resolved decreases") {
    // Monotone increasing: no pair violates.
    REQUIRE(stats::band_violation_score({1.0, 2.0, 3.0}, {0.1, 0.1, 0.1}, 2.0) <= 0.0);

    // A decrease smaller than the bands: still no violation.
    REQUIRE(stats::band_violation_score({1.0, 0.9}, {0.1, 0.1}, 2.0) <= 0.0);

    // A decrease far beyond the bands: exact score is
    // (1.0 - 2*0.01) - (0.5 + 2*0.01) = 0.46.
    REQUIRE(stats::band_violation_score({1.0, 0.5}, {0.01, 0.01}, 2.0) ==
            Catch::Approx(0.46).epsilon(1e-12));

    // The best earlier lower bound is carried forward, not just the previous
    // point: dip relative to the maximum at index 0.
    const double score =
        stats::band_violation_score({2.0, 1.9, 1.0}, {0.01, 0.01, 0.01}, 1.0);
    REQUIRE(score == Catch::Approx((2.0 - 0.01) - (1.0 + 0.01)).epsilon(1e-12));

    REQUIRE_THROWS_AS(stats::band_violation_score({1.0}, {0.1}, 2.0), std::invalid_argument);
}

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "thermeq/gas_params.hpp"
#include "thermeq/rng.hpp"
#include "thermeq/stats.hpp"

using namespace thermeq;

TEST_CASE("parameter validation rejects bad gases") {
    REQUIRE_THROWS_AS(GasParams::create(1.0, 2.0, 1.0, 1.0, 1.0), std::invalid_argument);
    REQUIRE_THROWS_AS(GasParams::create(1.0, 0.0, 1.0, 1.0, 1.0), std::invalid_argument);
    REQUIRE_THROWS_AS(GasParams::create(1.0, -1.0, 1.0, 1.0, 1.0), std::invalid_argument);
    REQUIRE_THROWS_AS(GasParams::create(2.0, 1.0, 0.0, 1.0, 1.0), std::invalid_argument);
    REQUIRE_THROWS_AS(GasParams::create(2.0, 1.0, 1.0, 0.0, 1.0), std::invalid_argument);
    REQUIRE_THROWS_AS(GasParams::create(2.0, 1.0, 1.0, 1.0, 0.0), std::invalid_argument);
    REQUIRE_NOTHROW(GasParams::create(1.0, 1.0, 1.0, 1.0, 1.0));  // equal masses: c = 0
}

TEST_CASE("contraction factor reference values") {
    REQUIRE(restitution_coefficient(1.0, 1.0) == 0.0);
    REQUIRE(restitution_coefficient(3.0, 1.0) == Catch::Approx(0.5).epsilon(1e-15));
    REQUIRE(restitution_coefficient(9.0, 1.0) == Catch::Approx(0.8).epsilon(1e-15));
    // Very heavy tagged particle: c -> 1 but stays below it.
    const double c = restitution_coefficient(1e6, 1.0);
    REQUIRE(c == Catch::Approx((1e6 - 1.0) / (1e6 + 1.0)).epsilon(1e-15));
    REQUIRE(c < 1.0);
    REQUIRE_THROWS_AS(restitution_coefficient(1.0, 2.0), std::invalid_argument);
}

TEST_CASE("derived fields are consistent in stable form") {
    const auto p = GasParams::create(3.0, 1.0, 4.0, 1.0, 2.0);
    REQUIRE(p.c == Catch::Approx(0.5).epsilon(1e-15));
    REQUIRE(p.one_minus_c_sq == Catch::Approx(0.75).epsilon(1e-15));
    REQUIRE(p.log_c == Catch::Approx(std::log(0.5)).epsilon(1e-15));
    REQUIRE(p.equilibrium_variance() == Catch::Approx(1.0 / 0.75).epsilon(1e-15));
    REQUIRE(p.relaxation_rate() == Catch::Approx(2.0 * 0.75).epsilon(1e-15));

    // Near-equal masses: 1 - c^2 loses no precision.
    const auto q = GasParams::create(1.0 + 1e-12, 1.0, 1.0, 1.0, 1.0);
    REQUIRE(q.one_minus_c_sq == Catch::Approx(1.0).epsilon(1e-11));

    const auto r = GasParams::create(1.0, 1.0, 1.0, 1.0, 1.0);
    REQUIRE(r.c == 0.0);
    REQUIRE(std::isinf(r.log_c));
}

TEST_CASE("collision-count variance pins and closed form") {
    const auto p = GasParams::create(3.0, 1.0, 4.0, 1.0, 2.0);  // c = 1/2
    REQUIRE(chain_variance(0, p) == 4.0);
    // n = 1: c^2 sigma0^2 + sigmax^2 = 0.25*4 + 1 = 2.
    REQUIRE(chain_variance(1, p) == Catch::Approx(2.0).epsilon(1e-14));
    // Direct recursion oracle: var_{n+1} = c^2 var_n + sigmax^2.
    double var = p.sigma0_sq;
    for (int n = 1; n <= 60; ++n) {
        var = p.c * p.c * var + p.sigmax_sq;
        REQUIRE(chain_variance(n, p) == Catch::Approx(var).epsilon(1e-12));
    }
    // Large n converges to equilibrium.
    REQUIRE(chain_variance(4000, p) ==
            Catch::Approx(p.equilibrium_variance()).epsilon(1e-14));

    // c = 0 collapses to sigmax^2 after one collision.
    const auto iso = GasParams::create(1.0, 1.0, 9.0, 2.0, 1.0);
    REQUIRE(chain_variance(1, iso) == Catch::Approx(2.0).epsilon(1e-14));
    REQUIRE(chain_variance(5, iso) == Catch::Approx(2.0).epsilon(1e-14));

    REQUIRE_THROWS_AS(chain_variance(-1, p), std::domain_error);
}

TEST_CASE("collision-count variance is monotone toward equilibrium") {
    // Cooling start (sigma0^2 above equilibrium) decreases; heating increases.
    const auto hot = GasParams::create(3.0, 1.0, 4.0, 1.0, 2.0);
    const auto cold = GasParams::create(3.0, 1.0, 0.25, 1.0, 2.0);
    // Strict monotonicity holds until the geometric factor c^(2n) underflows
    // past double precision (c = 1/2: around n = 26); after that the value
    // must sit exactly at its saturation level.
    for (int n = 0; n < 20; ++n) {
        REQUIRE(chain_variance(n + 1, hot) < chain_variance(n, hot));
        REQUIRE(chain_variance(n + 1, cold) > chain_variance(n, cold));
    }
    for (int n = 20; n < 50; ++n) {
        REQUIRE(chain_variance(n + 1, hot) <= chain_variance(n, hot));
        REQUIRE(chain_variance(n + 1, cold) >= chain_variance(n, cold));
    }
}

TEST_CASE("clock-time variance matches the collision-count law in expectation") {
    const auto p = GasParams::create(3.0, 1.0, 4.0, 1.0, 2.0);
    REQUIRE(time_variance(0.0, p) == Catch::Approx(p.sigma0_sq).epsilon(1e-15));

    // Poisson mixture oracle: Var V(t) = sum_n P(N(t)=n) chain_variance(n).
    for (double t : {0.1, 0.5, 1.0, 3.0}) {
        const double mu = p.lambda * t;
        double log_w = -mu;  // log P(N=0)
        double mix = 0.0, mass = 0.0;
        for (int n = 0; n < 400; ++n) {
            const double w = std::exp(log_w);
            mix += w * chain_variance(n, p);
            mass += w;
            log_w += std::log(mu) - std::log1p(static_cast<double>(n));
        }
        REQUIRE(mass == Catch::Approx(1.0).epsilon(1e-12));
        REQUIRE(time_variance(t, p) == Catch::Approx(mix).epsilon(1e-10));
    }

    // Deep in the exponential approach the variance sits at equilibrium.
    const double t_deep = 50.0 / p.relaxation_rate();
    REQUIRE(time_variance(t_deep, p) ==
            Catch::Approx(p.equilibrium_variance()).epsilon(1e-14));
    REQUIRE_THROWS_AS(time_variance(-0.1, p), std::domain_error);
}

TEST_CASE("variance relaxation is exactly exponential in the residual") {
    const auto p = GasParams::create(9.0, 1.0, 5.0, 1.0, 3.0);
    const double eq = p.equilibrium_variance();
    const double rate = p.relaxation_rate();
    for (double t : {0.01, 0.3, 1.0, 2.5}) {
        const double resid = time_variance(t, p) - eq;
        REQUIRE(resid == Catch::Approx((p.sigma0_sq - eq) * std::exp(-rate * t))
                             .epsilon(1e-12));
    }
}

TEST_CASE("equilibrium law is the centered fixed point") {
    const auto p = GasParams::create(3.0, 1.0, 4.0, 1.0, 2.0);
    const auto eq = equilibrium_spec(p);
    REQUIRE(eq.mean == 0.0);
    REQUIRE(eq.variance == Catch::Approx(4.0 / 3.0).epsilon(1e-15));
    // Fixed point of the one-collision variance map.
    REQUIRE(p.c * p.c * eq.variance + p.sigmax_sq == Catch::Approx(eq.variance).epsilon(1e-14));
}

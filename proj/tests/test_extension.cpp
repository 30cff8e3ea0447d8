#include <catch2/catch_amalgamated.hpp>

#include "gevlab/gevlab.hpp"

#include <cmath>
#include <vector>

using namespace gevlab;
using Catch::Approx;

namespace {

ExtensionParams base_params() {
    ExtensionParams p;
    p.sigma0 = 1.0;
    p.eq = {EquationType::GKdV, 4};
    p.E0 = 1.0;
    p.big_M = 1.0;
    p.C = 1.0;
    p.c0 = 1.0;
    p.a = 2.0;
    p.theta = 1.5;
    return p;
}

} // namespace

TEST_CASE("bookkeeping scales from the data size", "[extension]") {
    ExtensionParams p = base_params();
    SECTION("energy scale and exponent") {
        REQUIRE(p.kappa() == 4.0);
        REQUIRE(p.b_scale() == 2.0); // 1 + 1^3
        p.E0 = 4.0;
        REQUIRE(p.b_scale() == Approx(4.0 + std::pow(4.0, 3.0)));
        p.eq = {EquationType::NLS, 3};
        REQUIRE(p.kappa() == 3.0);
        p.nls_mode = ExtensionParams::NlsExponent::PowerMinusOne;
        REQUIRE(p.kappa() == 2.0);
        REQUIRE(p.b_scale() == Approx(4.0 + std::pow(4.0, 2.0)));
    }
    SECTION("ceiling and lifespan at unit scales") {
        REQUIRE(gn_energy_bound(p, 0.5) == 4.0);
        REQUIRE(local_lifespan(p) == Approx(1.0 / 25.0));
    }
    SECTION("ceiling rejects radii outside the start window") {
        REQUIRE_THROWS_AS(gn_energy_bound(p, 2.0), std::invalid_argument);
        REQUIRE_THROWS_AS(gn_energy_bound(p, -0.1), std::invalid_argument);
    }
}

TEST_CASE("parameter validation", "[extension]") {
    auto reject = [](void (*mutate)(ExtensionParams&)) {
        ExtensionParams p = base_params();
        mutate(p);
        REQUIRE_THROWS_AS(p.validate(), std::invalid_argument);
    };
    reject([](ExtensionParams& p) { p.sigma0 = 0.0; });
    reject([](ExtensionParams& p) { p.E0 = 0.0; });
    reject([](ExtensionParams& p) { p.big_M = 0.5; });
    reject([](ExtensionParams& p) { p.C = 0.0; });
    reject([](ExtensionParams& p) { p.c0 = 0.0; });
    reject([](ExtensionParams& p) { p.a = 1.0; });
    reject([](ExtensionParams& p) { p.theta = 0.9; });
    reject([](ExtensionParams& p) { p.theta = 2.0; });
    reject([](ExtensionParams& p) { p.eq.power = 3; });
    REQUIRE_NOTHROW(base_params().validate());
}

TEST_CASE("largest surviving radius", "[extension]") {
    const ExtensionParams p = base_params();
    SECTION("never exceeds the starting radius and decays with the horizon") {
        REQUIRE(max_sigma(p, 1e-9) == p.sigma0);
        double prev = p.sigma0;
        for (double T : {0.01, 0.1, 1.0, 10.0, 100.0}) {
            const double sg = max_sigma(p, T);
            REQUIRE(sg <= p.sigma0);
            REQUIRE(sg <= prev);
            prev = sg;
        }
        REQUIRE_THROWS_AS(max_sigma(p, 0.0), std::invalid_argument);
    }
    SECTION("induction at the returned radius fills the budget exactly") {
        for (double T : {0.7, 1.0, 3.3}) {
            const double sg = max_sigma(p, T);
            REQUIRE(sg < p.sigma0); // unsaturated branch
            const InductionTrace tr = simulate_induction(p, T, sg);
            REQUIRE_FALSE(tr.violated);
            REQUIRE(tr.energies.size() == tr.steps + 1);
            REQUIRE(tr.energies.front() == p.big_M * p.b_scale());
            REQUIRE(tr.ceiling == 2.0 * p.big_M * p.b_scale());
            // leftover budget is exactly the fractional step times the increment
            const double frac = T / tr.delta - static_cast<double>(tr.steps);
            REQUIRE(std::abs(tr.margin - frac * tr.increment) <= 1e-12 * tr.ceiling);
        }
    }
    SECTION("doubling the radius overruns the ceiling") {
        const double T = 1.0;
        const double sg = max_sigma(p, T);
        REQUIRE_FALSE(simulate_induction(p, T, sg).violated);
        REQUIRE(simulate_induction(p, T, 2.0 * sg).violated);
    }
    SECTION("induction rejects radii outside the start window") {
        REQUIRE_THROWS_AS(simulate_induction(p, 1.0, 1.5), std::invalid_argument);
        REQUIRE_THROWS_AS(simulate_induction(p, 0.0, 0.5), std::invalid_argument);
    }
}

TEST_CASE("radius-horizon curve", "[extension]") {
    SECTION("decaying branch has slope -1/theta") {
        for (double theta : {1.2, 1.5, 1.8}) {
            ExtensionParams p = base_params();
            p.theta = theta;
            std::vector<double> Ts;
            for (int i = 0; i <= 12; ++i)
                Ts.push_back(0.01 * std::pow(10.0, i / 3.0));
            const SigmaCurve curve = sigma_curve(p, Ts);
            REQUIRE(curve.decaying_points == Ts.size());
            REQUIRE(curve.slope == Approx(-1.0 / theta).margin(1e-9));
        }
    }
    SECTION("saturated grid is reported, capped points are kept") {
        const ExtensionParams p = base_params();
        REQUIRE_THROWS_WITH(sigma_curve(p, {1e-5, 2e-5}),
                            Catch::Matchers::ContainsSubstring("saturated"));
        const SigmaCurve mixed = sigma_curve(p, {1e-4, 1e-3, 0.1, 1.0});
        REQUIRE(mixed.sigma.front() == p.sigma0);
        REQUIRE(mixed.decaying_points == 2);
        REQUIRE(mixed.slope == Approx(-1.0 / p.theta).margin(1e-9));
        REQUIRE(mixed.knee_T > 1e-3);
        REQUIRE(mixed.knee_T < 0.1);
        REQUIRE_THROWS_AS(sigma_curve(p, {1.0}), std::invalid_argument);
    }
}

TEST_CASE("measured exponents clamp into the bookkeeping window", "[extension]") {
    REQUIRE(clamp_theta_for_extension(13.6) == 1.99);
    REQUIRE(clamp_theta_for_extension(0.5) == 1.0);
    REQUIRE(clamp_theta_for_extension(1.5) == 1.5);
    REQUIRE(clamp_theta_for_extension(1.99) == 1.99);
}

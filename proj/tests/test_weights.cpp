#include <catch2/catch_amalgamated.hpp>

#include "gevlab/gevlab.hpp"

#include <cmath>

using namespace gevlab;
using Catch::Approx;

TEST_CASE("flat-to-exponential weight values", "[weights]") {
    SECTION("flat below the transition") {
        REQUIRE(weight(WeightKind::SmoothPaper, 0.1, 5.0) == 1.0);
        REQUIRE(weight(WeightKind::SmoothPaper, 0.1, -5.0) == 1.0);
    }
    SECTION("pure exponential above it") {
        REQUIRE(weight(WeightKind::SmoothPaper, 0.1, 30.0) == Approx(std::exp(3.0)));
    }
    SECTION("negative radius rejected") {
        REQUIRE_THROWS_AS(weight(WeightKind::SmoothPaper, -0.1, 1.0), std::invalid_argument);
    }
}

TEST_CASE("flat-cutoff polynomial weight values", "[weights]") {
    WeightParams wp;
    wp.imethod_N = 4.0;
    wp.imethod_s = 0.5;
    REQUIRE(weight(WeightKind::IMethod, 1.0, 16.0, wp) == Approx(0.5));
    REQUIRE(weight(WeightKind::IMethod, 1.0, 2.0, wp) == 1.0);
    wp.imethod_N = 0.0;
    REQUIRE_THROWS_AS(weight(WeightKind::IMethod, 1.0, 1.0, wp), std::invalid_argument);
}

TEST_CASE("growing weights sit between 1 and the exponential envelope", "[weights]") {
    // 1 <= m <= e^{sigma |xi|} and m >= e^{sigma|xi| - 2} for the three
    // exponential-class kinds
    const WeightKind kinds[3] = {WeightKind::Exponential, WeightKind::Cosh,
                                 WeightKind::SmoothPaper};
    for (WeightKind kind : kinds) {
        for (double sigma : {0.0, 0.05, 0.3, 1.0, 2.5}) {
            for (double xi : {0.0, 0.2, 0.7, 1.0, 1.9, 2.0, 3.5, 10.0, 40.0}) {
                const double y = sigma * xi;
                if (y > 600.0) continue;
                const double m = weight(kind, sigma, xi);
                REQUIRE(m >= 1.0 - 1e-15);
                REQUIRE(m <= std::exp(y) * (1.0 + 1e-12));
                REQUIRE(m >= std::exp(y - 2.0) * (1.0 - 1e-12));
            }
        }
    }
}

TEST_CASE("transition bridge is smooth and strictly increasing", "[weights]") {
    using detail::bridge_rho;
    using detail::bridge_rho_prime;
    SECTION("end conditions") {
        REQUIRE(bridge_rho(1.0) == 0.0);
        REQUIRE(bridge_rho(2.0) == Approx(2.0).margin(1e-14));
        REQUIRE(bridge_rho_prime(1.0) == 0.0);
        REQUIRE(bridge_rho_prime(2.0) == Approx(1.0).margin(1e-13));
    }
    SECTION("derivative is consistent with the value") {
        const double h = 1e-6;
        for (double y = 1.05; y < 2.0; y += 0.05) {
            const double fd = (bridge_rho(y + h) - bridge_rho(y - h)) / (2.0 * h);
            REQUIRE(fd == Approx(bridge_rho_prime(y)).margin(1e-8));
        }
    }
    SECTION("strictly increasing inside the bridge") {
        for (double y = 1.001; y < 2.0; y += 0.001)
            REQUIRE(bridge_rho_prime(y) > 0.0);
    }
    SECTION("curvature vanishes at both joins") {
        const double h = 1e-4;
        auto second = [&](double y) {
            return (bridge_rho(y + h) - 2.0 * bridge_rho(y) + bridge_rho(y - h)) / (h * h);
        };
        // quintic: rho''(1) = rho''(2) = 0, finite-difference error ~ h^2
        REQUIRE(std::abs(second(1.0 + h)) < 0.02);
        REQUIRE(std::abs(second(2.0 - h)) < 0.02);
    }
}

TEST_CASE("gap ratio of the growing weights", "[weights]") {
    SECTION("closed-form spot values") {
        REQUIRE(weight_gap_ratio(WeightKind::Exponential, 1.0, 1.0, 1.0)
                == Approx(-std::expm1(-1.0)));
        REQUIRE(weight_gap_ratio(WeightKind::Cosh, 1.0, 2.0, 1.0)
                == Approx(1.0 - 1.0 / std::cosh(1.0)));
    }
    SECTION("limits at zero argument") {
        REQUIRE(weight_gap_ratio(WeightKind::Exponential, 0.0, 0.5, 3.0) == 0.0);
        REQUIRE(weight_gap_ratio(WeightKind::Exponential, 0.0, 1.0, 3.0) == 1.0);
        REQUIRE(weight_gap_ratio(WeightKind::Cosh, 0.0, 2.0, 3.0) == 0.5);
        REQUIRE_THROWS_AS(weight_gap_ratio(WeightKind::Cosh, 0.0, 2.5, 3.0),
                          std::domain_error);
    }
    SECTION("never exceeds one at the boundary exponent") {
        for (double x = 1e-6; x < 50.0; x *= 1.7) {
            REQUIRE(weight_gap_ratio(WeightKind::Exponential, 1.0, 1.0, x) <= 1.0 + 1e-12);
            REQUIRE(weight_gap_ratio(WeightKind::Cosh, 1.0, 2.0, x) <= 1.0 + 1e-12);
        }
    }
    SECTION("only the growing kinds are meaningful") {
        REQUIRE_THROWS_AS(weight_gap_ratio(WeightKind::SmoothPaper, 1.0, 1.0, 1.0),
                          std::invalid_argument);
    }
}

TEST_CASE("weighted spectral norm", "[weights]") {
    SECTION("reduces to the plain coefficient norm at zero radius and index") {
        const Grid g = make_grid(16, 2.0 * M_PI);
        cvec c(g.n, cplx(0.0, 0.0));
        c[2] = cplx(0.3, -0.4); // |c| = 0.5
        c[5] = cplx(1.2, 0.0);
        const double expect = std::sqrt(0.25 + 1.44);
        REQUIRE(gevrey_norm(g, c, WeightKind::SmoothPaper, 0.0, 0.0)
                == Approx(expect).epsilon(1e-14));
    }
    SECTION("cosine with one derivative of smoothing") {
        const Grid g = make_grid(16, 2.0 * M_PI);
        cvec v(g.n);
        for (std::size_t j = 0; j < g.n; ++j) v[j] = std::cos(g.x[j]);
        const cvec c = to_coefficients(g, v);
        // two lines at xi = +-1 with amplitude 1/2: norm = sqrt(2) * <1> * 1/2
        const double expect = std::sqrt(2.0) * std::sqrt(2.0) * 0.5;
        REQUIRE(gevrey_norm(g, c, WeightKind::SmoothPaper, 0.0, 1.0)
                == Approx(expect).epsilon(1e-13));
    }
    SECTION("log-sum path agrees with the closed form on a single line") {
        const Grid g = make_grid(16, 2.0 * M_PI); // xi_max = 8
        // exact two-line spectrum: transform roundoff at high modes would be
        // amplified by e^(2 sigma xi) and swamp the closed form
        cvec c(g.n, cplx(0.0, 0.0));
        c[1] = cplx(0.5, 0.0);
        c[g.n - 1] = cplx(0.5, 0.0);
        const double sigma = 50.0; // sigma * xi_max = 400 forces the log path
        const double expect = std::exp(50.0) / std::sqrt(2.0);
        REQUIRE(gevrey_norm(g, c, WeightKind::Exponential, sigma, 0.0)
                == Approx(expect).epsilon(1e-10));
    }
    SECTION("unrepresentable norms are reported, not returned as inf") {
        const Grid g = make_grid(16, 2.0 * M_PI);
        cvec v(g.n);
        for (std::size_t j = 0; j < g.n; ++j) v[j] = std::cos(7.0 * g.x[j]);
        const cvec c = to_coefficients(g, v);
        REQUIRE_THROWS_AS(gevrey_norm(g, c, WeightKind::Exponential, 120.0, 0.0),
                          std::overflow_error);
    }
    SECTION("size mismatch rejected") {
        const Grid g = make_grid(16, 2.0 * M_PI);
        REQUIRE_THROWS_AS(gevrey_norm(g, cvec(8), WeightKind::SmoothPaper, 0.1, 0.0),
                          std::invalid_argument);
    }
}

TEST_CASE("analyticity radius from spectral decay", "[weights]") {
    SECTION("pure exponential decay is recovered exactly") {
        const Grid g = make_grid(256, 40.0 * M_PI);
        cvec c(g.n);
        for (std::size_t k = 0; k < g.n; ++k)
            c[k] = cplx(std::exp(-2.0 * std::abs(g.xi[k])), 0.0);
        const RadiusEstimate est = estimate_radius(g, c);
        REQUIRE(est.sigma_hat == Approx(2.0).margin(1e-10));
        REQUIRE_FALSE(est.low_confidence);
    }
    SECTION("sech profile lands within five percent of pi/2") {
        const Grid g = make_grid(512, 40.0 * M_PI);
        cvec v(g.n);
        for (std::size_t j = 0; j < g.n; ++j) v[j] = 1.0 / std::cosh(g.x[j]);
        const RadiusEstimate est = estimate_radius(g, to_coefficients(g, v));
        REQUIRE(std::abs(est.sigma_hat - M_PI / 2.0) / (M_PI / 2.0) < 0.05);
    }
    SECTION("flat noise gives no usable decay") {
        const Grid g = make_grid(128, 2.0 * M_PI);
        const CounterRng rng(99, 5);
        // trendless amplitudes spread over several e-folds: whatever slope
        // the fit extracts, the residual stays far above the cutoff
        cvec c(g.n);
        for (std::size_t k = 0; k < g.n; ++k)
            c[k] = cplx(std::exp(-4.0 * rng.uniform01(k)), 0.0);
        bool flagged = false;
        try {
            flagged = estimate_radius(g, c).low_confidence;
        } catch (const std::runtime_error&) {
            flagged = true;
        }
        REQUIRE(flagged);
    }
    SECTION("too few usable modes is an error") {
        const Grid g = make_grid(16, 2.0 * M_PI);
        cvec c(g.n, cplx(0.0, 0.0));
        c[1] = cplx(1.0, 0.0);
        REQUIRE_THROWS_WITH(estimate_radius(g, c),
                            Catch::Matchers::ContainsSubstring("insufficient decay band"));
    }
}

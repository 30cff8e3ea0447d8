#include <catch2/catch_amalgamated.hpp>

#include "gevlab/gevlab.hpp"

#include <cmath>
#include <vector>

using namespace gevlab;
using Catch::Approx;

TEST_CASE("product defect of the flat-to-exponential weight", "[multiplier]") {
    SECTION("identically zero while every argument stays in the flat zone") {
        // sigma <= 1, |xi_j| <= 1/k and |sum| <= 1 keep all weights at 1
        const std::vector<double> freqs{0.4, -0.3, 0.25};
        REQUIRE(multiplier_defect(WeightKind::SmoothPaper, 1.0, freqs) == 0.0);
        REQUIRE(multiplier_defect(WeightKind::SmoothPaper, 0.2, {0.5, 0.5}) == 0.0);
    }
    SECTION("cancelling pair against a large product") {
        // sum = 0 has unit weight; each factor carries e^6
        const double expect = -std::expm1(-12.0);
        REQUIRE(multiplier_defect(WeightKind::SmoothPaper, 2.0, {3.0, -3.0})
                == Approx(expect).epsilon(1e-14));
    }
    SECTION("needs at least two frequencies") {
        REQUIRE_THROWS_AS(multiplier_defect(WeightKind::SmoothPaper, 1.0, {1.0}),
                          std::invalid_argument);
    }
}

TEST_CASE("defect against the two-largest-frequency bound", "[multiplier]") {
    SECTION("zero bound forces a zero ratio") {
        REQUIRE(defect_ratio(WeightKind::SmoothPaper, 0.0, 1.5, {2.0, 1.0}) == 0.0);
        REQUIRE(defect_ratio(WeightKind::SmoothPaper, 1.0, 1.5, {2.0, 0.0}) == 0.0);
    }
    SECTION("invariant under permuting the inputs") {
        // the log-weight sum accumulates in input order, so equality holds
        // to roundoff rather than bitwise
        const double a = defect_ratio(WeightKind::Cosh, 0.7, 1.5, {3.0, -1.0, 0.5});
        const double b = defect_ratio(WeightKind::Cosh, 0.7, 1.5, {0.5, 3.0, -1.0});
        const double c = defect_ratio(WeightKind::Cosh, 0.7, 1.5, {-1.0, 0.5, 3.0});
        REQUIRE(a == Approx(b).epsilon(1e-12));
        REQUIRE(a == Approx(c).epsilon(1e-12));
    }
    SECTION("reports the pieces it was built from") {
        double defect = -1.0, bound = -1.0;
        const double r =
            defect_ratio(WeightKind::Exponential, 0.5, 1.5, {2.0, 1.0}, {}, &defect, &bound);
        REQUIRE(bound == Approx(std::pow(0.5, 1.5) * std::pow(2.0, 0.5) * 1.0));
        REQUIRE(defect >= 0.0);
        REQUIRE(r == Approx(defect / bound));
    }
}

TEST_CASE("defect is invariant under binary radius-frequency rescaling", "[multiplier]") {
    // sigma -> sigma/lambda, xi -> lambda xi with lambda a power of two is
    // exact in floating point for the kinds that depend only on sigma*|xi|
    const std::vector<double> base{1.7, -0.9, 0.31};
    const WeightKind kinds[3] = {WeightKind::Exponential, WeightKind::Cosh,
                                 WeightKind::SmoothPaper};
    for (WeightKind kind : kinds) {
        for (double lambda : {2.0, 8.0, 0.25}) {
            std::vector<double> scaled;
            for (double f : base) scaled.push_back(lambda * f);
            const double d0 = multiplier_defect(kind, 0.6, base);
            const double d1 = multiplier_defect(kind, 0.6 / lambda, scaled);
            REQUIRE(d0 == d1);
        }
    }
}

TEST_CASE("stratified defect supremum", "[multiplier][slow]") {
    SECTION("input validation") {
        REQUIRE_THROWS_AS(sup_defect_ratio(WeightKind::SmoothPaper, 1, 1.5, 10000, 1),
                          std::invalid_argument);
        REQUIRE_THROWS_AS(sup_defect_ratio(WeightKind::SmoothPaper, 9, 1.5, 10000, 1),
                          std::invalid_argument);
        REQUIRE_THROWS_AS(sup_defect_ratio(WeightKind::SmoothPaper, 2, 1.5, 9999, 1),
                          std::invalid_argument);
    }
    SECTION("all-small stratum is identically zero for the flat-zone weight") {
        const DefectSupResult r =
            sup_defect_ratio(WeightKind::SmoothPaper, 3, 1.5, 10000, 12345);
        REQUIRE(r.stratum_max[0] == 0.0);
        REQUIRE(r.max_ratio > 0.0);
        REQUIRE(std::isfinite(r.max_ratio));
    }
    SECTION("pair arity saturates the cancelling-ray value from below") {
        // best config is sigma = 1, x1 = x2 = 1 same sign: ratio e^2 - 1
        const double ray = std::exp(2.0) - 1.0;
        for (double theta : {1.0, 1.99}) {
            const DefectSupResult r =
                sup_defect_ratio(WeightKind::SmoothPaper, 2, theta, 100000, 12345);
            REQUIRE(r.stratum_max[1] <= ray * (1.0 + 1e-9));
            REQUIRE(r.stratum_max[1] > 0.94 * ray);
        }
    }
    SECTION("checkpoints are cumulative and nondecreasing") {
        const DefectSupResult r =
            sup_defect_ratio(WeightKind::SmoothPaper, 2, 1.5, 100000, 7);
        REQUIRE(r.checkpoints.size() == 2);
        REQUIRE(r.checkpoints[0].first == 10000);
        REQUIRE(r.checkpoints[1].first == 100000);
        REQUIRE(r.checkpoints[0].second <= r.checkpoints[1].second);
        REQUIRE(r.checkpoints[1].second <= r.max_ratio);
        REQUIRE(r.stable);
    }
    SECTION("trace is strided when requested") {
        const DefectSupResult none =
            sup_defect_ratio(WeightKind::SmoothPaper, 2, 1.5, 10000, 3);
        REQUIRE(none.trace.empty());
        const DefectSupResult some =
            sup_defect_ratio(WeightKind::SmoothPaper, 2, 1.5, 10000, 3, {}, 500);
        REQUIRE_FALSE(some.trace.empty());
        REQUIRE(some.trace.size() <= 10000 / 500 + 4);
        REQUIRE(some.max_ratio == none.max_ratio);
    }
    SECTION("argmax sample is self-consistent") {
        const DefectSupResult r =
            sup_defect_ratio(WeightKind::Cosh, 3, 1.5, 10000, 11);
        const double replay = defect_ratio(WeightKind::Cosh, r.argmax.sigma, 1.5,
                                           r.argmax.freqs);
        REQUIRE(replay == Approx(r.max_ratio).epsilon(1e-12));
    }
}

TEST_CASE("defect supremum is deterministic across thread counts", "[multiplier][slow]") {
    const int before = get_threads();
    set_threads(1);
    const DefectSupResult one =
        sup_defect_ratio(WeightKind::SmoothPaper, 5, 1.5, 20000, 42);
    set_threads(4);
    const DefectSupResult four =
        sup_defect_ratio(WeightKind::SmoothPaper, 5, 1.5, 20000, 42);
    set_threads(before);
    REQUIRE(one.max_ratio == four.max_ratio);
    REQUIRE(one.argmax.sigma == four.argmax.sigma);
    REQUIRE(one.argmax.freqs == four.argmax.freqs);
    REQUIRE(one.stratum_max == four.stratum_max);
}

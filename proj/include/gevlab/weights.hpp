#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "gevlab/fit.hpp"
#include "gevlab/spectral.hpp"

namespace gevlab {

enum class WeightKind { Exponential, Cosh, SmoothPaper, IMethod };

inline WeightKind parse_weight_kind(const std::string& s) {
    if (s == "exp") return WeightKind::Exponential;
    if (s == "cosh") return WeightKind::Cosh;
    if (s == "smooth") return WeightKind::SmoothPaper;
    if (s == "imethod") return WeightKind::IMethod;
    throw std::invalid_argument("unknown weight kind: " + s);
}

inline const char* weight_kind_name(WeightKind k) {
    switch (k) {
        case WeightKind::Exponential: return "exp";
        case WeightKind::Cosh: return "cosh";
        case WeightKind::SmoothPaper: return "smooth";
        case WeightKind::IMethod: return "imethod";
    }
    return "?";
}

struct WeightParams {
    double imethod_N = 1.0; // cutoff of the flat region
    double imethod_s = 1.0; // Sobolev index, decay exponent is 1-s
};

namespace detail {

// Bridge exponent for the flat-to-exponential weight: rho(y) on [1,2] with
// rho(1)=rho'(1)=rho''(1)=0, rho(2)=2, rho'(2)=1, rho''(2)=0. The unique
// quintic through those conditions, in t = y-1:
inline double bridge_rho(double y) {
    const double t = y - 1.0;
    return ((9.0 * t - 23.0) * t + 16.0) * t * t * t;
}

inline double bridge_rho_prime(double y) {
    const double t = y - 1.0;
    return ((45.0 * t - 92.0) * t + 48.0) * t * t;
}

// One-time mesh check that the bridge is strictly increasing and meets the
// exponential branch with matching value and slope.
inline void bridge_self_check() {
    const int n = 4000;
    double prev = bridge_rho(1.0);
    if (prev != 0.0) throw std::logic_error("bridge_rho(1) must be 0");
    for (int i = 1; i <= n; ++i) {
        const double y = 1.0 + static_cast<double>(i) / static_cast<double>(n);
        const double v = bridge_rho(y);
        if (!(v > prev)) throw std::logic_error("bridge_rho not strictly increasing");
        prev = v;
    }
    if (std::abs(bridge_rho(2.0) - 2.0) > 1e-14)
        throw std::logic_error("bridge_rho(2) must be 2");
    if (std::abs(bridge_rho_prime(2.0) - 1.0) > 1e-14)
        throw std::logic_error("bridge_rho'(2) must be 1");
}

inline void ensure_bridge_checked() {
    static const bool ok = [] { bridge_self_check(); return true; }();
    (void)ok;
}

} // namespace detail

// log of the weight m_sigma(xi); all kinds satisfy m >= something positive,
// and every kind except IMethod satisfies m >= 1.
inline double log_weight(WeightKind kind, double sigma, double xi,
                         const WeightParams& wp = {}) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma))
        throw std::invalid_argument("log_weight: sigma must be >= 0");
    const double y = sigma * std::abs(xi);
    switch (kind) {
        case WeightKind::Exponential:
            return y;
        case WeightKind::Cosh:
            // log(cosh y), stable for large y
            return y + std::log1p(std::exp(-2.0 * y)) - M_LN2;
        case WeightKind::SmoothPaper: {
            detail::ensure_bridge_checked();
            if (y <= 1.0) return 0.0;
            if (y >= 2.0) return y;
            return detail::bridge_rho(y);
        }
        case WeightKind::IMethod: {
            if (!(wp.imethod_N > 0.0))
                throw std::invalid_argument("log_weight: imethod_N must be > 0");
            const double a = std::abs(xi);
            if (a <= wp.imethod_N) return 0.0;
            return -(1.0 - wp.imethod_s) * std::log(a / wp.imethod_N);
        }
    }
    throw std::logic_error("log_weight: unreachable");
}

inline double weight(WeightKind kind, double sigma, double xi,
                     const WeightParams& wp = {}) {
    return std::exp(log_weight(kind, sigma, xi, wp));
}

// || u ||_{sigma,s}^2 = sum_m m_sigma(xi_m)^2 <xi_m>^{2s} |c_m|^2.
// Large exponents switch to log-sum-exp; a norm whose log exceeds the
// representable range is reported instead of returning Inf.
inline double gevrey_norm(const Grid& g, const cvec& coeffs, WeightKind kind,
                          double sigma, double s, const WeightParams& wp = {}) {
    if (coeffs.size() != g.n)
        throw std::invalid_argument("gevrey_norm: size mismatch");
    const bool big = sigma * g.xi_max > 300.0;
    if (!big) {
        double sum = 0.0;
        for (std::size_t k = 0; k < g.n; ++k) {
            const double a2 = std::norm(coeffs[k]);
            if (a2 == 0.0) continue;
            const double w = weight(kind, sigma, g.xi[k], wp);
            const double br = 1.0 + g.xi[k] * g.xi[k];
            sum += w * w * std::pow(br, s) * a2;
        }
        return std::sqrt(sum);
    }
    // log-sum-exp over 2*log m + s*log<xi>^2 + 2*log|c|
    double lmax = -std::numeric_limits<double>::infinity();
    std::vector<double> terms;
    terms.reserve(g.n);
    for (std::size_t k = 0; k < g.n; ++k) {
        const double a2 = std::norm(coeffs[k]);
        if (a2 == 0.0) continue;
        const double t = 2.0 * log_weight(kind, sigma, g.xi[k], wp)
                       + s * std::log1p(g.xi[k] * g.xi[k]) + std::log(a2);
        terms.push_back(t);
        lmax = std::max(lmax, t);
    }
    if (terms.empty()) return 0.0;
    double acc = 0.0;
    for (double t : terms) acc += std::exp(t - lmax);
    const double log_norm = 0.5 * (lmax + std::log(acc));
    if (log_norm > 700.0)
        throw std::overflow_error("gevrey_norm: norm exceeds representable range");
    return std::exp(log_norm);
}

// (W(x) - 1) / (x^theta W(x)) for W = exp or cosh, x = sigma*|xi|.
// Captures how fast the weight separates from 1 near the flat region; the
// ratio stays <= 1 for theta up to 1 (exp) and up to 2 (cosh).
inline double weight_gap_ratio(WeightKind kind, double sigma, double theta, double xi) {
    if (kind != WeightKind::Exponential && kind != WeightKind::Cosh)
        throw std::invalid_argument("weight_gap_ratio: kind must be exp or cosh");
    if (!(sigma >= 0.0))
        throw std::invalid_argument("weight_gap_ratio: sigma must be >= 0");
    const double x = sigma * std::abs(xi);
    const double boundary = (kind == WeightKind::Exponential) ? 1.0 : 2.0;
    if (x == 0.0) {
        if (theta < boundary) return 0.0;
        if (theta == boundary)
            return (kind == WeightKind::Exponential) ? 1.0 : 0.5;
        throw std::domain_error("weight_gap_ratio: divergent limit at x=0");
    }
    if (kind == WeightKind::Exponential)
        return -std::expm1(-x) / std::pow(x, theta);
    const double sh = std::sinh(0.5 * x);
    return 2.0 * sh * sh / (std::cosh(x) * std::pow(x, theta));
}

struct RadiusEstimate {
    double sigma_hat = 0.0;
    double residual_rms = 0.0;
    std::size_t modes_used = 0;
    bool low_confidence = false;
};

struct FitBand {
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
};

// Least-squares slope of log|c| against |xi| over usable modes, sign-flipped.
// Usable: inside the band, below the top decade of frequencies, above both
// the caller's noise floor and 1e-13 of the spectral peak.
inline RadiusEstimate estimate_radius(const Grid& g, const cvec& coeffs,
                                      FitBand band = {}, double noise_floor = 0.0) {
    if (coeffs.size() != g.n)
        throw std::invalid_argument("estimate_radius: size mismatch");
    double peak = 0.0;
    for (const cplx& c : coeffs) peak = std::max(peak, std::abs(c));
    const double floor_abs = std::max(noise_floor, 1e-13 * peak);
    const double hi_cap = std::min(band.hi, 0.9 * g.xi_max);
    std::vector<double> xs, ys;
    for (std::size_t m = 1; m < g.n / 2; ++m) {
        const double xi = g.dxi * static_cast<double>(m);
        if (xi < band.lo || xi > hi_cap) continue;
        const double amp = std::max(std::abs(coeffs[m]), std::abs(coeffs[g.n - m]));
        if (!(amp > floor_abs)) continue;
        xs.push_back(xi);
        ys.push_back(std::log(amp));
    }
    if (xs.size() < 8)
        throw std::runtime_error("insufficient decay band");
    const LineFit f = fit_line(xs, ys);
    RadiusEstimate est;
    est.sigma_hat = -f.slope;
    est.residual_rms = f.residual_rms;
    est.modes_used = f.count;
    est.low_confidence = (f.residual_rms > 0.5) || !(est.sigma_hat > 0.0);
    return est;
}

} // namespace gevlab

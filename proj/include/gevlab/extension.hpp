#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "gevlab/evolution.hpp"
#include "gevlab/fit.hpp"

namespace gevlab {

// Bookkeeping for iterating short-time almost-conservation into a radius
// guarantee on [0, T]: each local step of length delta may grow the modified
// energy by a sigma^theta increment, and the radius is chosen so the total
// stays under twice its starting value.
struct ExtensionParams {
    double sigma0 = 1.0; // radius at time zero
    Equation eq;
    double E0 = 1.0;    // data size: squared norm scale at time zero
    double big_M = 1.0; // >= 1, slack factor in the energy bound
    double C = 1.0;     // drift constant in front of sigma^theta
    double c0 = 1.0;    // lifespan constant
    double a = 2.0;     // lifespan exponent, > 1
    double theta = 1.5; // almost-conservation exponent, in [1, 2)

    // For the Schroedinger family the bookkeeping exponent can be read as the
    // full power p or as the degree p-1 of the coefficient; both appear in
    // standard treatments, so the choice is explicit.
    enum class NlsExponent { FullPower, PowerMinusOne };
    NlsExponent nls_mode = NlsExponent::FullPower;

    void validate() const {
        eq.validate();
        if (!(sigma0 > 0.0)) throw std::invalid_argument("extension: sigma0 must be > 0");
        if (!(E0 > 0.0)) throw std::invalid_argument("extension: E0 must be > 0");
        if (!(big_M >= 1.0)) throw std::invalid_argument("extension: M must be >= 1");
        if (!(C > 0.0)) throw std::invalid_argument("extension: C must be > 0");
        if (!(c0 > 0.0)) throw std::invalid_argument("extension: c0 must be > 0");
        if (!(a > 1.0)) throw std::invalid_argument("extension: a must be > 1");
        if (!(theta >= 1.0) || !(theta < 2.0))
            throw std::invalid_argument("extension: theta must lie in [1, 2)");
    }

    double kappa() const {
        if (eq.type == EquationType::GKdV) return static_cast<double>(eq.power);
        return nls_mode == NlsExponent::FullPower ? static_cast<double>(eq.power)
                                                  : static_cast<double>(eq.power - 1);
    }

    // B = E0 + E0^{kappa/2 + 1}, the modified-energy scale built from data
    double b_scale() const {
        return E0 + std::pow(E0, 0.5 * kappa() + 1.0);
    }
};

// Norm-squared ceiling guaranteed while the induction runs: 2 M B.
inline double gn_energy_bound(const ExtensionParams& p, double sigma) {
    p.validate();
    if (sigma > p.sigma0)
        throw std::invalid_argument("gn_energy_bound: sigma exceeds the initial radius");
    if (!(sigma >= 0.0))
        throw std::invalid_argument("gn_energy_bound: sigma must be >= 0");
    return 2.0 * p.big_M * p.b_scale();
}

// Local existence window delta = c0 / (1 + 2 M B)^a.
inline double local_lifespan(const ExtensionParams& p) {
    p.validate();
    return p.c0 / std::pow(1.0 + 2.0 * p.big_M * p.b_scale(), p.a);
}

// Per-step growth of the modified energy at radius sigma.
inline double induction_increment(const ExtensionParams& p, double sigma) {
    const double B = p.b_scale();
    const double kap = p.kappa();
    return p.C * std::pow(p.big_M, kap + 1.0) * std::pow(sigma, p.theta)
         * std::pow(B, 0.5 * kap + 1.0) * (1.0 + std::pow(B, 0.5 * kap));
}

// Largest radius surviving until time T: the increment over T/delta steps
// must fit inside the factor-two energy ceiling, capped by sigma0.
inline double max_sigma(const ExtensionParams& p, double T) {
    p.validate();
    if (!(T > 0.0)) throw std::invalid_argument("max_sigma: T must be > 0");
    const double B = p.b_scale();
    const double kap = p.kappa();
    const double delta = local_lifespan(p);
    const double denom = std::pow(p.big_M, kap) * T * p.C * std::pow(B, 0.5 * kap)
                       * (1.0 + std::pow(B, 0.5 * kap));
    const double sg = std::pow(delta / denom, 1.0 / p.theta);
    return std::min(p.sigma0, sg);
}

struct InductionTrace {
    std::size_t steps = 0;   // floor(T / delta)
    double delta = 0.0;
    double increment = 0.0;
    double ceiling = 0.0;    // 2 M B
    double final_energy = 0.0;
    double margin = 0.0;     // ceiling - final energy
    bool violated = false;
    std::vector<double> energies; // E after 0..steps increments
};

// Replays the induction at a given radius and reports whether the energy
// ceiling survives. At sigma = max_sigma(T) the final margin equals
// (T/delta - steps) * increment >= 0 up to roundoff.
inline InductionTrace simulate_induction(const ExtensionParams& p, double T, double sigma) {
    p.validate();
    if (!(T > 0.0)) throw std::invalid_argument("simulate_induction: T must be > 0");
    if (!(sigma >= 0.0) || sigma > p.sigma0)
        throw std::invalid_argument("simulate_induction: sigma must lie in [0, sigma0]");
    InductionTrace tr;
    tr.delta = local_lifespan(p);
    tr.steps = static_cast<std::size_t>(std::floor(T / tr.delta));
    tr.increment = induction_increment(p, sigma);
    const double B = p.b_scale();
    tr.ceiling = 2.0 * p.big_M * B;
    double e = p.big_M * B;
    tr.energies.push_back(e);
    for (std::size_t j = 0; j < tr.steps; ++j) {
        e += tr.increment;
        tr.energies.push_back(e);
        if (e > tr.ceiling * (1.0 + 1e-12)) tr.violated = true;
    }
    tr.final_energy = e;
    tr.margin = tr.ceiling - e;
    return tr;
}

struct SigmaCurve {
    std::vector<double> T;
    std::vector<double> sigma;
    double slope = 0.0;      // of log sigma against log T on the decaying branch
    double knee_T = 0.0;     // where the sigma0 cap stops binding
    std::size_t decaying_points = 0;
};

// sigma(T) over a time grid; the decaying branch must follow T^{-1/theta}.
inline SigmaCurve sigma_curve(const ExtensionParams& p, const std::vector<double>& T_grid) {
    p.validate();
    if (T_grid.size() < 2)
        throw std::invalid_argument("sigma_curve: need at least 2 times");
    SigmaCurve out;
    const double B = p.b_scale();
    const double kap = p.kappa();
    const double delta = local_lifespan(p);
    out.knee_T = delta / (std::pow(p.big_M, kap) * p.C * std::pow(p.sigma0, p.theta)
                          * std::pow(B, 0.5 * kap) * (1.0 + std::pow(B, 0.5 * kap)));
    std::vector<double> ts, ss;
    for (double t : T_grid) {
        const double sg = max_sigma(p, t);
        out.T.push_back(t);
        out.sigma.push_back(sg);
        if (sg < p.sigma0 * (1.0 - 1e-12)) {
            ts.push_back(t);
            ss.push_back(sg);
        }
    }
    out.decaying_points = ts.size();
    if (ts.size() < 2)
        throw std::runtime_error("sigma_curve: grid entirely saturated at sigma0; extend T range");
    const LineFit f = fit_loglog(ts, ss);
    out.slope = f.slope;
    return out;
}

// Radius exponent handed over from a measured drift fit. The bookkeeping
// requires theta in [1, 2); measured exponents outside are clamped and both
// values should be reported side by side.
inline double clamp_theta_for_extension(double theta_measured) {
    return std::min(1.99, std::max(1.0, theta_measured));
}

} // namespace gevlab

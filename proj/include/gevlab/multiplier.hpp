#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "gevlab/parallel.hpp"
#include "gevlab/rng.hpp"
#include "gevlab/weights.hpp"

namespace gevlab {

// | 1 - m_sigma(sum xi_j) / prod m_sigma(xi_j) |, evaluated in log space so
// huge weights never overflow: d = log m(sum) - sum log m(xi_j), and the
// defect is |expm1(d)|. For weights pinched between 1 and exp(sigma|xi|),
// |d| <= 2k on k-tuples, so the exponential is always representable.
inline double multiplier_defect(WeightKind kind, double sigma,
                                const std::vector<double>& freqs,
                                const WeightParams& wp = {}) {
    if (freqs.size() < 2)
        throw std::invalid_argument("multiplier_defect: need at least 2 frequencies");
    double sum = 0.0;
    double log_prod = 0.0;
    for (double f : freqs) {
        sum += f;
        log_prod += log_weight(kind, sigma, f, wp);
    }
    const double d = log_weight(kind, sigma, sum, wp) - log_prod;
    return std::abs(std::expm1(d));
}

struct DefectSample {
    std::string stratum;
    double sigma = 0.0;
    std::vector<double> freqs;
    double theta = 0.0;
    double defect = 0.0;
    double bound = 0.0;
    double ratio = 0.0;
};

// defect / (sigma^theta |xi_(1)|^{theta-1} |xi_(2)|) with xi_(1), xi_(2) the
// two largest input magnitudes. A vanishing bound forces a vanishing defect
// (only one active frequency, or sigma = 0), so 0/0 resolves to 0.
inline double defect_ratio(WeightKind kind, double sigma, double theta,
                           const std::vector<double>& freqs,
                           const WeightParams& wp = {}, double* defect_out = nullptr,
                           double* bound_out = nullptr) {
    std::vector<double> mags;
    mags.reserve(freqs.size());
    for (double f : freqs) mags.push_back(std::abs(f));
    std::sort(mags.begin(), mags.end(), std::greater<double>());
    const double defect = multiplier_defect(kind, sigma, freqs, wp);
    const double bound =
        std::pow(sigma, theta) * std::pow(mags[0], theta - 1.0) * mags[1];
    if (defect_out) *defect_out = defect;
    if (bound_out) *bound_out = bound;
    if (bound == 0.0) return 0.0;
    return defect / bound;
}

struct DefectSupResult {
    double max_ratio = 0.0;
    // strata keyed by raw magnitudes x1 >= x2 >= ...:
    //   [0] "1.1": x1 <= 1 and |sum| <= 1   (identically zero for sigma <= 1)
    //   [1] "1.2": x1 <= 1 < |sum|
    //   [2] "2":   x1 > 1 >= x2
    //   [3] "3":   x2 > 1
    std::array<double, 4> stratum_max{{0.0, 0.0, 0.0, 0.0}};
    DefectSample argmax;
    bool stable = true; // second half of the stream did not move the sup by >25%
    std::vector<std::pair<std::uint64_t, double>> checkpoints; // running sup
    std::vector<DefectSample> trace; // strided subset for the ledger
};

inline const char* defect_stratum_name(std::size_t idx) {
    static const char* names[4] = {"1.1", "1.2", "2", "3"};
    return names[idx];
}

namespace detail {

struct DefectDrawPlan {
    static constexpr std::uint64_t draws_per_try = 32;
    static constexpr std::uint64_t tries = 256;
    static constexpr std::uint64_t draws_per_sample = draws_per_try * tries;
};

// One sample conditioned on a stratum: magnitudes log-uniform on [1e-3,1e3],
// signs uniform, sigma log-uniform on [1e-4,1]; rejection until the stratum
// condition holds, after the retry cap a tuple satisfying it is constructed
// directly. 30% of samples are enriched by rescaling sigma so sigma*x1 lands
// in [0.5, 4], where the weight transitions; strata read raw magnitudes, so
// the rescale never moves a sample between strata.
inline DefectSample draw_defect_sample(const CounterRng& rng, std::size_t stratum,
                                       std::size_t k, double theta, WeightKind kind,
                                       std::uint64_t index, const WeightParams& wp) {
    const std::uint64_t base =
        (static_cast<std::uint64_t>(stratum) << 56) + index * DefectDrawPlan::draws_per_sample;
    std::vector<double> freqs(k);
    double sigma = 1.0;
    bool ok = false;
    for (std::uint64_t t = 0; t < DefectDrawPlan::tries && !ok; ++t) {
        std::uint64_t c = base + t * DefectDrawPlan::draws_per_try;
        const double mag_hi = (stratum <= 1) ? 1.0 : 1e3;
        for (std::size_t j = 0; j < k; ++j) {
            double lo = 1e-3, hi = mag_hi;
            if (stratum == 2 && j == 0) { lo = 1.0; hi = 1e3; }
            if (stratum == 3 && j <= 1) { lo = 1.0; hi = 1e3; }
            const double mag = rng.log_uniform(c++, lo, hi);
            freqs[j] = mag * rng.sign(c++);
        }
        sigma = rng.log_uniform(c++, 1e-4, 1.0);
        std::vector<double> mags(k);
        for (std::size_t j = 0; j < k; ++j) mags[j] = std::abs(freqs[j]);
        std::sort(mags.begin(), mags.end(), std::greater<double>());
        double sum = 0.0;
        for (double f : freqs) sum += f;
        switch (stratum) {
            case 0: ok = mags[0] <= 1.0 && std::abs(sum) <= 1.0; break;
            case 1: ok = mags[0] <= 1.0 && std::abs(sum) > 1.0; break;
            case 2: ok = mags[0] > 1.0 && mags[1] <= 1.0; break;
            case 3: ok = mags[1] > 1.0; break;
            default: throw std::logic_error("bad stratum");
        }
        if (ok) {
            const std::uint64_t cc = base + DefectDrawPlan::draws_per_try * DefectDrawPlan::tries - 4;
            if (rng.uniform01(cc) < 0.3) {
                const double target = rng.log_uniform(cc + 1, 0.5, 4.0);
                const double rescaled = target / mags[0];
                sigma = std::min(1.0, std::max(1e-4, rescaled));
            }
        }
    }
    if (!ok) {
        // deterministic fallback obeying the stratum by construction
        std::uint64_t c = base + 7;
        const double u = rng.uniform01(c++);
        switch (stratum) {
            case 0:
                for (std::size_t j = 0; j < k; ++j)
                    freqs[j] = 1e-3 * (1.0 + u) * ((j % 2 == 0) ? 1.0 : -1.0);
                break;
            case 1:
                for (std::size_t j = 0; j < k; ++j)
                    freqs[j] = (1.5 + 0.4 * u) / static_cast<double>(k);
                break;
            case 2:
                freqs[0] = 2.0 + u;
                for (std::size_t j = 1; j < k; ++j) freqs[j] = 0.5 * rng.sign(c++);
                break;
            case 3:
                freqs[0] = 2.0 + u;
                freqs[1] = -1.5;
                for (std::size_t j = 2; j < k; ++j) freqs[j] = 0.5 * rng.sign(c++);
                break;
        }
        sigma = rng.log_uniform(base + 3, 1e-4, 1.0);
    }
    DefectSample s;
    s.stratum = defect_stratum_name(stratum);
    s.sigma = sigma;
    s.freqs = freqs;
    s.theta = theta;
    s.ratio = defect_ratio(kind, sigma, theta, freqs, wp, &s.defect, &s.bound);
    return s;
}

} // namespace detail

// Stratified search for the largest defect-to-bound ratio over k-tuples.
// Deterministic in (seed) regardless of worker count; the running sup is
// checkpointed at powers of ten so slow corner convergence is visible.
inline DefectSupResult sup_defect_ratio(WeightKind kind, std::size_t k, double theta,
                                        std::size_t n_samples, std::uint64_t seed,
                                        const WeightParams& wp = {},
                                        std::size_t trace_stride = 0) {
    if (k < 2 || k > 8)
        throw std::invalid_argument("sup_defect_ratio: arity must be in [2, 8]");
    if (n_samples < 10000)
        throw std::invalid_argument("sup_defect_ratio: need at least 1e4 samples");
    const std::size_t per_stratum = n_samples / 4;

    struct Acc {
        double max_ratio = 0.0;
        std::array<double, 4> stratum_max{{0.0, 0.0, 0.0, 0.0}};
        DefectSample argmax;
        std::array<double, 4> cp{{0.0, 0.0, 0.0, 0.0}}; // sup over first 1e4/1e5/1e6, and first half
        std::vector<DefectSample> trace;
    };

    const std::array<std::uint64_t, 3> cp_counts{{10000, 100000, 1000000}};
    const std::uint64_t half = n_samples / 2;

    DefectSupResult out;
    Acc total;
    for (std::size_t st = 0; st < 4; ++st) {
        const CounterRng rng(seed, 1000 + st);
        const std::size_t count = per_stratum;
        Acc acc = chunked_reduce<Acc>(
            count, 4096,
            [&](Acc& a, std::size_t i) {
                DefectSample s = detail::draw_defect_sample(rng, st, k, theta, kind,
                                                            static_cast<std::uint64_t>(i), wp);
                if (s.ratio > a.max_ratio) { a.max_ratio = s.ratio; a.argmax = s; }
                a.stratum_max[st] = std::max(a.stratum_max[st], s.ratio);
                // global sample index interleaves strata: g = 4*i + st
                const std::uint64_t gidx = 4 * static_cast<std::uint64_t>(i) + st;
                for (std::size_t c = 0; c < 3; ++c)
                    if (gidx < cp_counts[c]) a.cp[c] = std::max(a.cp[c], s.ratio);
                if (gidx < half) a.cp[3] = std::max(a.cp[3], s.ratio);
                if (trace_stride > 0 && i % trace_stride == 0) a.trace.push_back(s);
            },
            [](Acc& lhs, const Acc& rhs) {
                if (rhs.max_ratio > lhs.max_ratio) {
                    lhs.max_ratio = rhs.max_ratio;
                    lhs.argmax = rhs.argmax;
                }
                for (std::size_t j = 0; j < 4; ++j) {
                    lhs.stratum_max[j] = std::max(lhs.stratum_max[j], rhs.stratum_max[j]);
                    lhs.cp[j] = std::max(lhs.cp[j], rhs.cp[j]);
                }
                lhs.trace.insert(lhs.trace.end(), rhs.trace.begin(), rhs.trace.end());
            });
        if (acc.max_ratio > total.max_ratio) {
            total.max_ratio = acc.max_ratio;
            total.argmax = acc.argmax;
        }
        for (std::size_t j = 0; j < 4; ++j) {
            total.stratum_max[j] = std::max(total.stratum_max[j], acc.stratum_max[j]);
            total.cp[j] = std::max(total.cp[j], acc.cp[j]);
        }
        total.trace.insert(total.trace.end(), acc.trace.begin(), acc.trace.end());
    }

    out.max_ratio = total.max_ratio;
    out.stratum_max = total.stratum_max;
    out.argmax = total.argmax;
    for (std::size_t c = 0; c < 3; ++c)
        if (cp_counts[c] <= n_samples)
            out.checkpoints.emplace_back(cp_counts[c], total.cp[c]);
    out.stable = total.max_ratio <= 1.25 * total.cp[3];
    out.trace = std::move(total.trace);
    return out;
}

} // namespace gevlab

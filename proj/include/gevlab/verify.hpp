#pragma once

#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "gevlab/evolution.hpp"
#include "gevlab/extension.hpp"
#include "gevlab/fre.hpp"
#include "gevlab/io.hpp"
#include "gevlab/multiplier.hpp"
#include "gevlab/rng.hpp"
#include "gevlab/spectral.hpp"
#include "gevlab/weights.hpp"

namespace gevlab {

struct VerifyResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

namespace verify_detail {

inline cvec sech_data(const Grid& g, double amplitude, double width) {
    cvec v(g.n);
    for (std::size_t j = 0; j < g.n; ++j)
        v[j] = amplitude / std::cosh(g.x[j] / width);
    return v;
}

inline double rel_err(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    if (scale == 0.0) return 0.0;
    return std::abs(a - b) / scale;
}

// Max relative mismatch between the analytic flux and a centered difference
// of the modified energy along a short trajectory, taken where the signal
// clears the solver-noise floor measured at sigma = 0.
inline double flux_fd_mismatch(const Equation& eq, double sigma, std::string* note) {
    const Grid g = make_grid(256, 20.0 * M_PI);
    cvec u0 = to_coefficients(g, sech_data(g, eq.type == EquationType::GKdV ? 0.9 : 0.8, 1.5));
    RunConfig cfg;
    cfg.eq = eq;
    cfg.dt = 5e-4;
    cfg.t_end = 0.05;
    cfg.stride = 1;
    cfg.sigmas = {0.0, sigma};
    cfg.edge_floor = 1e-3; // identity check, not a tail-hygiene run
    const RunResult run = run_experiment(g, u0, cfg);
    if (run.aborted) {
        if (note) *note = "run aborted: " + run.abort_reason;
        return 1e9;
    }
    // noise floor: largest sigma=0 step-to-step energy wiggle over dt
    double floor = 0.0;
    for (std::size_t i = 1; i < run.records.size(); ++i)
        floor = std::max(floor, std::abs(run.records[i].e_sigma[0] - run.records[i - 1].e_sigma[0]) / cfg.dt);
    floor *= 10.0;
    double worst = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 1; i + 1 < run.records.size(); ++i) {
        const double fd = (run.records[i + 1].e_sigma[1] - run.records[i - 1].e_sigma[1]) / (2.0 * cfg.dt);
        const double an = run.records[i].flux[1];
        if (std::abs(fd) <= floor) continue;
        ++used;
        worst = std::max(worst, std::abs(fd - an) / std::abs(fd));
    }
    if (note) {
        std::ostringstream os;
        os << "points used " << used << ", worst rel err " << worst;
        *note = os.str();
    }
    if (used == 0) return 1e9;
    return worst;
}

} // namespace verify_detail

// Fast self-contained checks of the library's core identities. Returns one
// result per check; the driver exits nonzero if any must-pass check fails.
inline std::vector<VerifyResult> run_verify_battery() {
    std::vector<VerifyResult> results;
    auto check = [&](const std::string& name, const std::function<bool(std::string&)>& fn) {
        VerifyResult r;
        r.name = name;
        try {
            r.passed = fn(r.detail);
        } catch (const std::exception& e) {
            r.passed = false;
            r.detail = std::string("exception: ") + e.what();
        }
        results.push_back(r);
    };

    check("spectral_roundtrip", [](std::string& d) {
        const Grid g = make_grid(128, 4.0 * M_PI);
        const CounterRng rng(7, 1);
        cvec v(g.n);
        for (std::size_t j = 0; j < g.n; ++j)
            v[j] = cplx(rng.uniform(2 * j, -1.0, 1.0), rng.uniform(2 * j + 1, -1.0, 1.0));
        const cvec back = to_values(g, to_coefficients(g, v));
        double worst = 0.0;
        for (std::size_t j = 0; j < g.n; ++j) worst = std::max(worst, std::abs(back[j] - v[j]));
        d = "roundtrip err " + format_g17(worst);
        return worst < 1e-12;
    });

    check("parseval", [](std::string& d) {
        const Grid g = make_grid(128, 4.0 * M_PI);
        const CounterRng rng(9, 2);
        cvec v(g.n);
        for (std::size_t j = 0; j < g.n; ++j)
            v[j] = cplx(rng.uniform(2 * j, -1.0, 1.0), rng.uniform(2 * j + 1, -1.0, 1.0));
        double phys = 0.0;
        for (const cplx& z : v) phys += std::norm(z);
        phys *= g.dx;
        const double spec = mass_from_coefficients(g, to_coefficients(g, v));
        d = "rel err " + format_g17(verify_detail::rel_err(phys, spec));
        return verify_detail::rel_err(phys, spec) < 1e-12;
    });

    check("weight_bounds", [](std::string& d) {
        double worst_low = 1.0, worst_high = 0.0;
        for (int i = 0; i <= 400; ++i) {
            const double y = 0.02 * i; // sigma*|xi| up to 8
            const double m = std::exp(log_weight(WeightKind::SmoothPaper, 1.0, y));
            const double lo = std::exp(y - 2.0);
            worst_low = std::min(worst_low, m / std::max(lo, 1e-300));
            if (m > std::exp(y) * (1.0 + 1e-12) || m < 1.0) worst_high = 1.0;
            if (m < lo * (1.0 - 1e-12)) worst_high = 1.0;
        }
        d = "bridge stays within [e^{x-2}, e^x] and >= 1";
        return worst_high == 0.0;
    });

    check("bridge_c2_joins", [](std::string& d) {
        // second finite difference of log m across the joins stays bounded
        const double h = 1e-4;
        double worst = 0.0;
        for (double y0 : {1.0, 2.0}) {
            for (int i = -3; i <= 3; ++i) {
                const double y = y0 + i * h;
                const double f0 = log_weight(WeightKind::SmoothPaper, 1.0, y - h);
                const double f1 = log_weight(WeightKind::SmoothPaper, 1.0, y);
                const double f2 = log_weight(WeightKind::SmoothPaper, 1.0, y + h);
                const double d1 = (f2 - f0) / (2.0 * h);
                (void)d1;
                const double d2 = (f2 - 2.0 * f1 + f0) / (h * h);
                worst = std::max(worst, std::abs(d2));
            }
        }
        d = "max |second difference| near joins " + format_g17(worst);
        return worst < 25.0; // smooth bridge second derivative is O(10)
    });

    check("gap_ratio_bounded", [](std::string& d) {
        double worst = 0.0;
        for (int i = 0; i <= 200; ++i) {
            const double x = std::exp(std::log(1e-6) + (std::log(50.0) - std::log(1e-6)) * i / 200.0);
            for (double th : {0.0, 0.5, 1.0})
                worst = std::max(worst, weight_gap_ratio(WeightKind::Exponential, 1.0, th, x));
            for (double th : {0.0, 1.0, 2.0})
                worst = std::max(worst, weight_gap_ratio(WeightKind::Cosh, 1.0, th, x));
        }
        d = "max ratio " + format_g17(worst);
        return worst <= 1.0 + 1e-12;
    });

    check("defect_stratum_all_small_zero", [](std::string& d) {
        const DefectSupResult r = sup_defect_ratio(WeightKind::SmoothPaper, 4, 1.5, 10000, 41);
        d = "stratum 1.1 max " + format_g17(r.stratum_max[0]);
        return r.stratum_max[0] == 0.0;
    });

    check("defect_scaling_invariance", [](std::string& d) {
        const std::vector<double> freqs{3.7, -1.2, 0.4};
        const double base = multiplier_defect(WeightKind::SmoothPaper, 0.21, freqs);
        double worst = 0.0;
        for (double lam : {2.0, 4.0, 8.0}) {
            std::vector<double> scaled;
            for (double f : freqs) scaled.push_back(f * lam);
            const double v = multiplier_defect(WeightKind::SmoothPaper, 0.21 / lam, scaled);
            worst = std::max(worst, std::abs(v - base));
        }
        d = "max abs change under rescale " + format_g17(worst);
        return worst == 0.0; // power-of-two rescales are exact in binary
    });

    check("conservation_smoke", [](std::string& d) {
        const Grid g = make_grid(256, 20.0 * M_PI);
        RunConfig cfg;
        cfg.eq = {EquationType::GKdV, 4};
        cfg.dt = 5e-4;
        cfg.t_end = 0.1;
        cfg.stride = 20;
        cfg.sigmas = {0.0};
        cfg.record_flux = false;
        cfg.edge_floor = 1e-3;
        const RunResult run = run_experiment(
            g, to_coefficients(g, verify_detail::sech_data(g, 0.9, 1.5)), cfg);
        if (run.aborted) { d = "aborted: " + run.abort_reason; return false; }
        double dm = 0.0, de = 0.0, dsig = 0.0;
        for (const RunRecord& r : run.records) {
            dm = std::max(dm, verify_detail::rel_err(r.mass, run.records.front().mass));
            de = std::max(de, verify_detail::rel_err(r.energy, run.records.front().energy));
            dsig = std::max(dsig, verify_detail::rel_err(r.e_sigma[0], r.mass + r.energy));
        }
        d = "mass drift " + format_g17(dm) + ", energy drift " + format_g17(de)
          + ", sigma0 identity " + format_g17(dsig);
        return dm < 1e-9 && de < 1e-9 && dsig < 1e-10;
    });

    check("flux_matches_fd_gkdv", [](std::string& d) {
        const double worst = verify_detail::flux_fd_mismatch({EquationType::GKdV, 4}, 0.5, &d);
        return worst < 0.01;
    });

    check("flux_matches_fd_nls", [](std::string& d) {
        const double worst = verify_detail::flux_fd_mismatch({EquationType::NLS, 3}, 0.4, &d);
        return worst < 0.01;
    });

    check("mutation_hook_trips_flux_check", [](std::string& d) {
        test_hooks::remainder_sign_flip = true;
        const double worst = verify_detail::flux_fd_mismatch({EquationType::GKdV, 4}, 0.5, &d);
        test_hooks::remainder_sign_flip = false;
        return worst > 0.5; // the corrupted remainder must break the identity
    });

    check("remainder_zero_at_sigma_zero", [](std::string& d) {
        const Grid g = make_grid(128, 8.0 * M_PI);
        cvec u0 = to_coefficients(g, verify_detail::sech_data(g, 0.7, 1.5));
        u0 = dealias(g, u0, 5);
        hermitize(g, u0);
        const cvec weighted = detail::weighted_field(g, u0, WeightKind::SmoothPaper, 0.0, {});
        const cvec f = gkdv_remainder(g, weighted, WeightKind::SmoothPaper, 0.0, 4);
        double worst = 0.0;
        for (const cplx& z : f) worst = std::max(worst, std::abs(z));
        d = "max |remainder| " + format_g17(worst);
        return worst == 0.0;
    });

    check("dealias_idempotent", [](std::string& d) {
        const Grid g = make_grid(128, 2.0 * M_PI);
        const CounterRng rng(3, 3);
        cvec c(g.n);
        for (std::size_t j = 0; j < g.n; ++j)
            c[j] = cplx(rng.uniform(2 * j, -1.0, 1.0), rng.uniform(2 * j + 1, -1.0, 1.0));
        const cvec once = dealias(g, c, 5);
        const cvec twice = dealias(g, once, 5);
        bool same = true;
        for (std::size_t j = 0; j < g.n; ++j) same = same && once[j] == twice[j];
        d = same ? "projection idempotent" : "second application changed data";
        return same;
    });

    check("extension_margin_identity", [](std::string& d) {
        ExtensionParams p;
        p.eq = {EquationType::GKdV, 4};
        p.sigma0 = 1.0; p.E0 = 1.0; p.big_M = 1.0; p.C = 1.0; p.theta = 1.5;
        const double T = 30.0;
        const double sg = max_sigma(p, T);
        const InductionTrace tr = simulate_induction(p, T, sg);
        const double expected = (T / tr.delta - static_cast<double>(tr.steps)) * tr.increment;
        const double err = std::abs(tr.margin - expected) / std::max(1e-300, std::abs(tr.ceiling));
        d = "margin err " + format_g17(err) + ", violated=" + (tr.violated ? "1" : "0");
        if (tr.violated || err > 1e-12) return false;
        const InductionTrace bad = simulate_induction(p, T, std::min(p.sigma0, 2.0 * sg));
        d += bad.violated ? ", doubled radius violates" : ", doubled radius did NOT violate";
        return bad.violated;
    });

    check("fre_oracle_interval", [](std::string& d) {
        // Phi = p^2, weight 1, alpha = 0: measure of {p^2 <= M} is 2 sqrt(M)
        FreProblem prob;
        prob.spec.dispersion = Dispersion::Quadratic;
        prob.spec.arity = 2;
        prob.spec.lambda = {1, 1};
        prob.spec.use_constraint = false;
        prob.free_vars = {1};
        prob.admissibility = false;
        FreSample s;
        s.values = {0.0, 0.0, 0.0};
        s.alpha = 0.0;
        s.shift = 0.0;
        double worst = 0.0;
        for (double M : {1.0, 4.0, 25.0}) {
            const RestrictedIntegral ri = restricted_integral(prob, s, M, 1e3);
            worst = std::max(worst, std::abs(ri.value - 2.0 * std::sqrt(M)));
        }
        d = "max abs err " + format_g17(worst);
        return worst < 1e-9;
    });

    check("aux_square_annulus", [](std::string& d) {
        const double v = auxiliary_square_integral(10.0, 1.0, 100.0, 1);
        const double err = std::abs(v - 2.0 * M_PI) / (2.0 * M_PI);
        d = "rel err " + format_g17(err);
        return err < 0.01;
    });

    return results;
}

} // namespace gevlab

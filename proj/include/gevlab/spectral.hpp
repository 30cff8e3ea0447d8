#pragma once

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gevlab {

using cplx = std::complex<double>;
using cvec = std::vector<cplx>;
using rvec = std::vector<double>;

// Periodic grid on [-L/2, L/2) with n samples. Coefficient arrays use the
// standard transform layout: index k holds mode m = k for k < n/2 and
// m = k - n otherwise, angular frequency xi_m = (2*pi/L) * m.
//
// Normalization, fixed once for the whole library: coefficients are Fourier
// series coefficients, u(x) = sum_m c_m exp(i xi_m x), so the forward
// transform carries the 1/n factor and Parseval reads
//   integral |u|^2 dx = L * sum |c_m|^2.
struct Grid {
    std::size_t n = 0;
    double length = 0.0;
    double dx = 0.0;
    double dxi = 0.0;    // frequency spacing 2*pi/L
    double xi_max = 0.0; // (n/2) * dxi, magnitude of the unmatched mode
    rvec x;              // sample points
    rvec xi;             // frequencies in transform layout
};

inline Grid make_grid(std::size_t n, double length) {
    if (n < 8)
        throw std::invalid_argument("make_grid: n must be at least 8");
    if (n % 2 != 0)
        throw std::invalid_argument("make_grid: n must be even");
    if (!(length > 0.0) || !std::isfinite(length))
        throw std::invalid_argument("make_grid: length must be positive and finite");
    Grid g;
    g.n = n;
    g.length = length;
    g.dx = length / static_cast<double>(n);
    g.dxi = 2.0 * M_PI / length;
    g.xi_max = g.dxi * static_cast<double>(n / 2);
    g.x.resize(n);
    g.xi.resize(n);
    for (std::size_t j = 0; j < n; ++j)
        g.x[j] = -0.5 * length + g.dx * static_cast<double>(j);
    for (std::size_t k = 0; k < n; ++k) {
        const long m = (k < n / 2) ? static_cast<long>(k)
                                   : static_cast<long>(k) - static_cast<long>(n);
        g.xi[k] = g.dxi * static_cast<double>(m);
    }
    return g;
}

namespace detail {

// Plans are cached per (n, sign) and reused through new-array execution,
// which is the only transform entry point that is safe to call concurrently.
inline fftw_plan fft_plan(std::size_t n, int sign) {
    static std::mutex mu;
    static std::map<std::pair<std::size_t, int>, fftw_plan> cache;
    std::lock_guard<std::mutex> lock(mu);
    const auto key = std::make_pair(n, sign);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    fftw_complex* a = fftw_alloc_complex(n);
    fftw_complex* b = fftw_alloc_complex(n);
    fftw_plan p = fftw_plan_dft_1d(static_cast<int>(n), a, b, sign,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(a);
    fftw_free(b);
    if (p == nullptr)
        throw std::runtime_error("fft_plan: planner failed");
    cache.emplace(key, p);
    return p;
}

inline void dft(std::size_t n, const cplx* in, cplx* out, int sign) {
    fftw_plan p = fft_plan(n, sign);
    // new-array execution; input buffer is not modified by an out-of-place plan
    fftw_execute_dft(p,
                     reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in)),
                     reinterpret_cast<fftw_complex*>(out));
}

} // namespace detail

inline void assert_finite(const cvec& a, const char* where) {
    for (const cplx& v : a)
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
            throw std::runtime_error(std::string("non-finite coefficient in ") + where);
}

// Physical samples -> Fourier series coefficients. The (-1)^k factor folds in
// the -L/2 origin so coefficients agree with the continuum convention.
inline cvec to_coefficients(const Grid& g, const cvec& values) {
    if (values.size() != g.n)
        throw std::invalid_argument("to_coefficients: size mismatch");
    cvec out(g.n);
    detail::dft(g.n, values.data(), out.data(), FFTW_FORWARD);
    const double inv_n = 1.0 / static_cast<double>(g.n);
    for (std::size_t k = 0; k < g.n; ++k)
        out[k] *= (k % 2 == 0) ? inv_n : -inv_n;
    return out;
}

inline cvec to_values(const Grid& g, const cvec& coeffs) {
    if (coeffs.size() != g.n)
        throw std::invalid_argument("to_values: size mismatch");
    cvec in(g.n);
    for (std::size_t k = 0; k < g.n; ++k)
        in[k] = (k % 2 == 0) ? coeffs[k] : -coeffs[k];
    cvec out(g.n);
    detail::dft(g.n, in.data(), out.data(), FFTW_BACKWARD);
    return out;
}

inline cvec to_coefficients(const Grid& g, const rvec& values) {
    cvec tmp(g.n);
    for (std::size_t j = 0; j < g.n; ++j) tmp[j] = values[j];
    return to_coefficients(g, tmp);
}

inline rvec to_real_values(const Grid& g, const cvec& coeffs) {
    cvec v = to_values(g, coeffs);
    rvec out(g.n);
    for (std::size_t j = 0; j < g.n; ++j) out[j] = v[j].real();
    return out;
}

inline bool is_hermitian(const Grid& g, const cvec& coeffs, double tol = 1e-12) {
    for (std::size_t k = 1; k < g.n; ++k) {
        const std::size_t kc = g.n - k;
        if (k == g.n / 2) continue;
        if (std::abs(coeffs[k] - std::conj(coeffs[kc])) > tol) return false;
    }
    if (std::abs(coeffs[0].imag()) > tol) return false;
    if (std::abs(coeffs[g.n / 2].imag()) > tol) return false;
    return true;
}

// Projects onto the Hermitian-symmetric part (real physical field).
inline void hermitize(const Grid& g, cvec& coeffs) {
    coeffs[0] = cplx(coeffs[0].real(), 0.0);
    coeffs[g.n / 2] = cplx(coeffs[g.n / 2].real(), 0.0);
    for (std::size_t k = 1; k < g.n / 2; ++k) {
        const std::size_t kc = g.n - k;
        const cplx avg = 0.5 * (coeffs[k] + std::conj(coeffs[kc]));
        coeffs[k] = avg;
        coeffs[kc] = std::conj(avg);
    }
}

enum class Parity { Even, Odd };

// Multiplies coefficients by m(xi) sampled on the grid. Odd multipliers zero
// the unmatched Nyquist mode, which has no partner of opposite sign.
inline cvec apply_multiplier(const Grid& g, const cvec& coeffs,
                             const std::function<cplx(double)>& m,
                             Parity parity = Parity::Even) {
    if (coeffs.size() != g.n)
        throw std::invalid_argument("apply_multiplier: size mismatch");
    cvec out(g.n);
    for (std::size_t k = 0; k < g.n; ++k) {
        const cplx mv = m(g.xi[k]);
        if (!std::isfinite(mv.real()) || !std::isfinite(mv.imag()))
            throw std::domain_error("apply_multiplier: non-finite multiplier value");
        out[k] = coeffs[k] * mv;
    }
    if (parity == Parity::Odd) out[g.n / 2] = cplx(0.0, 0.0);
    return out;
}

inline cvec derivative(const Grid& g, const cvec& coeffs) {
    return apply_multiplier(g, coeffs, [](double xi) { return cplx(0.0, xi); },
                            Parity::Odd);
}

// integral |u|^2 dx computed from coefficients (exact Parseval)
inline double mass_from_coefficients(const Grid& g, const cvec& coeffs) {
    double s = 0.0;
    for (const cplx& c : coeffs) s += std::norm(c);
    return g.length * s;
}

// dx * sum of samples; equals the integral exactly for band-limited integrands
inline double integrate_values(const Grid& g, const rvec& values) {
    double s = 0.0;
    for (double v : values) s += v;
    return g.dx * s;
}

struct DealiasInfo {
    std::size_t keep_index = 0; // largest kept |m|
    double cutoff_xi = 0.0;
    double fraction = 0.0; // nominal kept fraction 2/(degree+1)
};

// Keep-index rule: K = floor(n/(degree+1)), decremented until
// (degree+1)*K < n so no product of degree kept modes aliases back into the
// kept band. This makes truncated nonlinear products alias-free, which is
// what exact semi-discrete conservation relies on.
inline DealiasInfo dealias_info(const Grid& g, int degree) {
    if (degree < 1)
        throw std::invalid_argument("dealias_info: degree must be >= 1");
    std::size_t K = g.n / static_cast<std::size_t>(degree + 1);
    while (K > 0 && static_cast<std::size_t>(degree + 1) * K >= g.n) --K;
    DealiasInfo info;
    info.keep_index = K;
    info.cutoff_xi = g.dxi * static_cast<double>(K);
    info.fraction = 2.0 / static_cast<double>(degree + 1);
    return info;
}

inline cvec dealias(const Grid& g, const cvec& coeffs, int degree) {
    if (coeffs.size() != g.n)
        throw std::invalid_argument("dealias: size mismatch");
    const DealiasInfo info = dealias_info(g, degree);
    cvec out(g.n, cplx(0.0, 0.0));
    const long K = static_cast<long>(info.keep_index);
    for (std::size_t k = 0; k < g.n; ++k) {
        const long m = (k < g.n / 2) ? static_cast<long>(k)
                                     : static_cast<long>(k) - static_cast<long>(g.n);
        if (m >= -K && m <= K) out[k] = coeffs[k];
    }
    return out;
}

// Relative amplitude of the field at the box edges; periodic runs with
// localized data must keep this below the configured floor to stay valid.
inline double edge_amplitude_ratio(const Grid& g, const cvec& values) {
    double peak = 0.0;
    for (const cplx& v : values) peak = std::max(peak, std::abs(v));
    if (peak == 0.0) return 0.0;
    const double edge = std::max(std::abs(values.front()), std::abs(values.back()));
    return edge / peak;
}

} // namespace gevlab

#pragma once

// Scalar special functions needed by the closed-form models: the sine
// integral Si, the exponential integral Ei with complex argument (principal
// branch, cut on (-inf, 0]), and arg Gamma(1+ix).

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

#include "qtr/operator_core.hpp"

namespace qtr {

inline constexpr double euler_gamma = 0.57721566490153286061;

enum class SpecialMethod { series, asymptotic, quadrature_fallback };

struct SpecialValue {
    cxd argument;
    cxd value;
    SpecialMethod method;
    double estimated_error;
};

namespace detail {

// Auxiliary functions f, g with Si(x) = pi/2 - f cos x - g sin x (x > 0),
// from the continued fraction of E1(ix) (modified Lentz).
inline void si_auxiliary(double x, double& f, double& g) {
    const cxd z(0.0, x);
    cxd b = z + 1.0;
    cxd c = 1.0 / 1e-50;
    cxd d = 1.0 / b;
    cxd h = d;
    for (int i = 1; i <= 200000; ++i) {
        const double a = -static_cast<double>(i) * i;
        b += 2.0;
        d = 1.0 / (a * d + b);
        c = b + a / c;
        const cxd del = c * d;
        h *= del;
        if (std::abs(del - 1.0) < 1e-17) break;
    }
    // E1(ix) = e^{-ix} h, so h = e^{ix} E1(ix) = g - i f with
    // f = Ci sin x + (pi/2 - Si) cos x, g = -Ci cos x + (pi/2 - Si) sin x.
    g = h.real();
    f = -h.imag();
}

}  // namespace detail

inline SpecialValue sine_integral_detail(double x) {
    if (!std::isfinite(x)) throw error("sine_integral: non-finite argument");
    const double ax = std::abs(x);
    const double sgn = x < 0 ? -1.0 : 1.0;
    if (ax <= 16.0) {
        // Si(x) = sum (-1)^n x^{2n+1} / ((2n+1)(2n+1)!)
        const double x2 = ax * ax;
        double term = ax;
        double sum = ax;
        for (int n = 1; n < 80; ++n) {
            term *= -x2 / ((2.0 * n) * (2.0 * n + 1.0));
            const double add = term / (2.0 * n + 1.0);
            sum += add;
            if (std::abs(add) < 1e-18 * std::abs(sum)) break;
        }
        return {x, sgn * sum, SpecialMethod::series, 1e-15};
    }
    double f = 0.0, g = 0.0;
    detail::si_auxiliary(ax, f, g);
    const double v = M_PI / 2 - f * std::cos(ax) - g * std::sin(ax);
    return {x, sgn * v, SpecialMethod::asymptotic, 1e-14};
}

/// Si(x) = int_0^x sin(z)/z dz. Odd; -> pi/2 as x -> inf.
inline double sine_integral(double x) { return sine_integral_detail(x).value.real(); }

namespace detail {

inline cxd ei_series(cxd z) {
    // Ei(z) = gamma_E + Log z + sum z^n/(n n!)
    cxd term = 1.0;
    cxd sum = 0.0;
    for (int n = 1; n < 600; ++n) {
        term *= z / static_cast<double>(n);
        const cxd add = term / static_cast<double>(n);
        sum += add;
        if (std::abs(add) < 1e-18 * std::max(1.0, std::abs(sum))) break;
    }
    return euler_gamma + std::log(z) + sum;
}

// Same series in 80-bit arithmetic; buys ~3-4 digits against the
// e^{|z|-Re z} cancellation in the midrange.
inline cxd ei_series_long(cxd z) {
    using cxl = std::complex<long double>;
    const cxl zl(z.real(), z.imag());
    cxl term = 1.0L;
    cxl sum = 0.0L;
    for (int n = 1; n < 900; ++n) {
        term *= zl / static_cast<long double>(n);
        const cxl add = term / static_cast<long double>(n);
        sum += add;
        if (std::abs(add) < 1e-22L * std::max(1.0L, std::abs(sum))) break;
    }
    const cxl v = sum + std::log(zl);
    return {static_cast<double>(v.real() + euler_gamma), static_cast<double>(v.imag())};
}

// Ei(z) ~ e^z/z sum n!/z^n + i pi sgn(Im z), truncated at the smallest term.
// The i pi constant is exact off the real axis (principal branch); on the
// positive real axis the principal value has none. Truncation error
// ~ |e^z/z| e^{-|z|} sqrt(2 pi |z|); used for |z| >= 30.
inline cxd ei_asymptotic(cxd z) {
    cxd term = 1.0;
    cxd sum = 1.0;
    double best = 1.0;
    for (int n = 1; n < 400; ++n) {
        term *= static_cast<double>(n) / z;
        const double mag = std::abs(term);
        if (mag > best) break;
        best = mag;
        sum += term;
    }
    cxd v = std::exp(z) / z * sum;
    if (z.imag() != 0.0) v += cxd(0.0, M_PI) * (z.imag() > 0.0 ? 1.0 : -1.0);
    return v;
}

// E1(w) for Re w > 0 or |Im w| bounded away from the cut, via the standard
// continued fraction (modified Lentz).
inline cxd e1_continued_fraction(cxd w) {
    cxd b = w + 1.0;
    cxd c = 1.0 / 1e-50;
    cxd d = 1.0 / b;
    cxd h = d;
    for (int i = 1; i <= 400000; ++i) {
        const double a = -static_cast<double>(i) * i;
        b += 2.0;
        d = 1.0 / (a * d + b);
        c = b + a / c;
        const cxd del = c * d;
        h *= del;
        if (std::abs(del - 1.0) < 1e-16) break;
    }
    return std::exp(-w) * h;
}

}  // namespace detail

inline SpecialValue exp_integral_ei_detail(cxd z) {
    if (z == cxd(0.0, 0.0)) throw error("exp_integral_ei: argument must be nonzero");
    if (z.imag() == 0.0 && z.real() < 0.0)
        throw error("exp_integral_ei: argument on the branch cut (-inf, 0]");
    if (z.imag() == 0.0) {
        // Positive real axis: all series terms are positive, no cancellation.
        cxd term = 1.0, sum = 0.0;
        for (int n = 1; n < 4000; ++n) {
            term *= z.real() / n;
            const cxd add = term / static_cast<double>(n);
            sum += add;
            if (std::abs(add) < 1e-18 * std::max(1.0, std::abs(sum))) break;
        }
        return {z, euler_gamma + std::log(z.real()) + sum, SpecialMethod::series, 1e-14};
    }
    const double r = std::abs(z);
    // Series is safe while the cancellation factor e^{|z|-Re z} stays small.
    if (r <= 8.0 || r - z.real() <= 4.0)
        return {z, detail::ei_series(z), SpecialMethod::series,
                1e-13 * std::exp(std::min(30.0, r - std::max(0.0, z.real())))};
    if (z.real() <= 0.0) {
        // -z lies in the right half-plane where the E1 continued fraction is
        // reliable: Ei(z) = -E1(-z) + i pi sgn(Im z) on the principal branch.
        const cxd e1 = detail::e1_continued_fraction(-z);
        const double s = z.imag() > 0.0 ? 1.0 : -1.0;
        return {z, -e1 + cxd(0.0, M_PI) * s, SpecialMethod::asymptotic, 1e-13};
    }
    if (r >= 30.0) return {z, detail::ei_asymptotic(z), SpecialMethod::asymptotic, 1e-11};
    // Midrange with Re z > 0 and sizable |Im z|: extended-precision series.
    const double cancel = std::exp(r - z.real());
    return {z, detail::ei_series_long(z), SpecialMethod::series, 5.4e-19 * cancel};
}

/// Principal-branch exponential integral Ei(z), cut on (-inf, 0].
inline cxd exp_integral_ei(cxd z) { return exp_integral_ei_detail(z).value; }

/// Quadrature fallback Ei(z) = gamma_E + Log z + int_0^1 (e^{zu}-1)/u du,
/// integrating along the ray from 0 to z. Serves as the in-repo oracle.
inline cxd exp_integral_ei_quadrature(cxd z, int panels = 4096) {
    if (z == cxd(0.0, 0.0)) throw error("exp_integral_ei_quadrature: zero argument");
    if (z.imag() == 0.0 && z.real() < 0.0)
        throw error("exp_integral_ei_quadrature: argument on the branch cut");
    auto f = [&](double u) -> cxd {
        if (u == 0.0) return z;
        return (std::exp(z * u) - 1.0) / u;
    };
    // Composite Simpson on [0,1].
    if (panels % 2) ++panels;
    const double h = 1.0 / panels;
    cxd s = f(0.0) + f(1.0);
    for (int i = 1; i < panels; ++i) s += f(i * h) * (i % 2 ? 4.0 : 2.0);
    return euler_gamma + std::log(z) + s * (h / 3.0);
}

namespace detail {

// Lanczos approximation of log Gamma, g = 7, n = 9 (Godfrey coefficients).
inline cxd log_gamma(cxd z) {
    static const double coef[9] = {
        0.99999999999980993,  676.5203681218851,   -1259.1392167224028,
        771.32342877765313,   -176.61502916214059, 12.507343278686905,
        -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
    if (z.real() < 0.5) {
        // Reflection; not needed for Gamma(1+ix) but kept for completeness.
        return std::log(M_PI / std::sin(M_PI * z)) - log_gamma(1.0 - z);
    }
    const cxd zz = z - 1.0;
    cxd x = coef[0];
    for (int i = 1; i < 9; ++i) x += coef[i] / (zz + static_cast<double>(i));
    const cxd t = zz + 7.5;
    return 0.5 * std::log(2.0 * M_PI) + (zz + 0.5) * std::log(t) - t + std::log(x);
}

}  // namespace detail

inline SpecialValue log_gamma_arg_detail(double x) {
    if (!std::isfinite(x)) throw error("log_gamma_arg: non-finite argument");
    const cxd lg = detail::log_gamma(cxd(1.0, x));
    return {cxd(1.0, x), lg.imag(), SpecialMethod::series, 1e-13};
}

/// arg Gamma(1+ix); odd in x.
inline double log_gamma_arg(double x) { return log_gamma_arg_detail(x).value.real(); }

}  // namespace qtr

#pragma once

#include <cmath>
#include <limits>
#include <numbers>

#include "innoguard/errors.hpp"

namespace innoguard {

namespace detail {

// Regularized lower incomplete gamma P(a, x). Series expansion below the
// a+1 crossover, Lentz continued fraction for the upper tail above it.
inline double gamma_p_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    double ap = a;
    for (int i = 0; i < 10000; ++i) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::abs(term) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

inline double gamma_q_contfrac(double a, double x) {
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double frac = d;
    for (int i = 1; i < 10000; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        frac *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    return frac * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

inline double regularized_gamma_p(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw DomainError("regularized_gamma_p: a > 0 and x >= 0 required");
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) return gamma_p_series(a, x);
    return 1.0 - gamma_q_contfrac(a, x);
}

}  // namespace detail

/// P(chi2_nu <= x) via the regularized lower incomplete gamma P(nu/2, x/2).
inline double chi2_cdf(double x, double nu) {
    if (x < 0.0) throw DomainError("chi2_cdf: x must be nonnegative");
    if (nu <= 0.0) throw DomainError("chi2_cdf: nu must be positive");
    return detail::regularized_gamma_p(0.5 * nu, 0.5 * x);
}

/**
 * @brief Inverse chi-square CDF.
 *
 * Wilson-Hilferty initial guess refined by safeguarded Newton steps with a
 * bisection bracket; the result satisfies |chi2_cdf(q, nu) - p| <= 1e-9.
 */
inline double chi2_quantile(double p, double nu) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("chi2_quantile: p must lie in (0,1)");
    if (nu <= 0.0) throw DomainError("chi2_quantile: nu must be positive");

    // Bracket [lo, hi] with cdf(lo) <= p <= cdf(hi).
    const double wh = 1.0 - 2.0 / (9.0 * nu);  // Wilson-Hilferty cube-root normal approx
    double guess = nu * wh * wh * wh;
    if (guess <= 0.0) guess = nu;
    double lo = 0.0;
    double hi = guess;
    while (chi2_cdf(hi, nu) < p) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e12) break;
    }

    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const double f = chi2_cdf(x, nu) - p;
        if (f > 0.0) {
            hi = x;
        } else {
            lo = x;
        }
        if (std::abs(f) < 1e-12) break;
        // chi2 pdf at x
        const double logpdf = (0.5 * nu - 1.0) * std::log(x) - 0.5 * x -
                              std::lgamma(0.5 * nu) - 0.5 * nu * std::numbers::ln2;
        const double pdf = std::exp(logpdf);
        double next = (pdf > 0.0) ? x - f / pdf : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) < 1e-14 * (1.0 + x)) {
            x = next;
            break;
        }
        x = next;
    }
    return x;
}

/// Standard normal CDF.
inline double normal_cdf(double z) {
    return 0.5 * std::erfc(-z * std::numbers::sqrt2 / 2.0);
}

}  // namespace innoguard

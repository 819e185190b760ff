#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace exact {

/// Standard normal CDF. Accurate to a few ulps over the whole real line.
inline double std_normal_cdf(double x) noexcept {
    return 0.5 * std::erfc(-x * std::numbers::sqrt2 * 0.5);
}

inline double std_normal_pdf(double x) noexcept {
    constexpr double inv_sqrt_2pi = 0.3989422804014326779399461;
    return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

/// Density of N(mean, variance) evaluated at x.
inline double normal_pdf(double x, double mean, double variance) {
    const double sd = std::sqrt(variance);
    return std_normal_pdf((x - mean) / sd) / sd;
}

namespace detail {

template <std::size_t N>
constexpr double horner(const double (&c)[N], double x) noexcept {
    double acc = c[N - 1];
    for (std::size_t i = N - 1; i-- > 0;) acc = acc * x + c[i];
    return acc;
}

}  // namespace detail

/**
 * Inverse of the standard normal CDF (Wichura's AS 241, PPND16).
 *
 * Relative accuracy is about 1e-16 over (0, 1). Throws std::domain_error
 * outside the open unit interval.
 */
inline double std_normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("std_normal_quantile: p must lie in (0, 1)");

    const double q = p - 0.5;
    if (std::fabs(q) <= 0.425) {
        constexpr double a[] = {3.387132872796366608,   133.14166789178437745, 1971.5909503065514427,
                                13731.693765509461125,  45921.953931549871457, 67265.770927008700853,
                                33430.575583588128105,  2509.0809287301226727};
        constexpr double b[] = {1.0,
                                42.313330701600911252, 687.1870074920579083,  5394.1960214247511077,
                                21213.794301586595867, 39307.89580009271061,  28729.085735721942674,
                                5226.495278852545925};
        const double r = 0.180625 - q * q;
        return q * detail::horner(a, r) / detail::horner(b, r);
    }

    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double value;
    if (r <= 5.0) {
        constexpr double c[] = {1.42343711074968357734,    4.6303378461565452959,    5.7694972214606914055,
                                3.64784832476320460504,    1.27045825245236838258,   0.24178072517745061177,
                                0.0227238449892691845833,  7.7454501427834140764e-4};
        constexpr double d[] = {1.0,
                                2.05319162663775882187,    1.6763848301838038494,    0.68976733498510000455,
                                0.14810397642748007459,    0.0151986665636164571966, 5.475938084995344946e-4,
                                1.05075007164441684324e-9};
        r -= 1.6;
        value = detail::horner(c, r) / detail::horner(d, r);
    } else {
        constexpr double e[] = {6.6579046435011037772,     5.4637849111641143699,     1.7848265399172913358,
                                0.29656057182850489123,    0.026532189526576123093,   0.0012426609473880784386,
                                2.71155556874348757815e-5, 2.01033439929228813265e-7};
        constexpr double f[] = {1.0,
                                0.59983220655588793769,    0.13692988092273580531,    0.0148753612908506148525,
                                7.868691311456132591e-4,   1.8463183175100546818e-5,  1.4215117583164458887e-7,
                                2.04426310338993978564e-15};
        r -= 5.0;
        value = detail::horner(e, r) / detail::horner(f, r);
    }
    return q < 0.0 ? -value : value;
}

}  // namespace exact

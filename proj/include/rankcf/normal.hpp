#pragma once

#include <cmath>
#include <limits>

#include "rankcf/errors.hpp"

namespace rankcf {

inline constexpr double sqrt_2pi = 2.5066282746310005024;
inline constexpr double inv_sqrt_2pi = 0.3989422804014326779;
inline constexpr double sqrt_half = 0.7071067811865475244;

inline double norm_pdf(double x) {
    return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

inline double norm_cdf(double x) {
    return 0.5 * std::erfc(-x * sqrt_half);
}

namespace detail {

// Rational approximation for the lower half u in (0, 0.5]; Acklam's coefficients.
inline double norm_quantile_lower(double u) {
    static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                -2.759285104469687e+02, 1.383577518672690e+02,
                                -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                -1.556989798598866e+02, 6.680131188771972e+01,
                                -1.328068155288572e+01};
    static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                -2.400758277161838e+00, -2.549732539343734e+00,
                                4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                2.445134137142996e+00, 3.754408661907416e+00};
    double x;
    if (u < 0.02425) {
        double q = std::sqrt(-2.0 * std::log(u));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else {
        double q = u - 0.5;
        double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    }
    // One Halley refinement against the erfc-based cdf.
    double e = norm_cdf(x) - u;
    double t = e * sqrt_2pi * std::exp(0.5 * x * x);
    x -= t / (1.0 + 0.5 * x * t);
    return x;
}

} // namespace detail

// Inverse standard normal cdf; absolute error below 1e-10 on (1e-12, 1-1e-12).
// Reflection through 0.5 keeps the map exactly antisymmetric (1-u is exact there).
inline double norm_quantile(double u) {
    if (!(u > 0.0 && u < 1.0))
        throw domain_error("norm_quantile: argument must lie strictly inside (0, 1)");
    if (u == 0.5) return 0.0;
    if (u > 0.5) return -detail::norm_quantile_lower(1.0 - u);
    return detail::norm_quantile_lower(u);
}

// Inverse Mills ratio phi(x)/Phi(x). Direct evaluation underflows in the far left
// tail, so beyond x < -8 the tail expansion is evaluated as a continued fraction.
inline double mills_ratio(double x) {
    if (x >= -8.0) {
        double cdf = norm_cdf(x);
        return norm_pdf(x) / cdf;
    }
    double t = -x;
    // Phi(-t)/phi(t) = 1/(t + 1/(t + 2/(t + 3/(...)))), evaluated backward.
    double f = t;
    for (int j = 64; j >= 1; --j) f = t + static_cast<double>(j) / f;
    return f;
}

// cdf of Gamma(shape 2, rate 2), i.e. P(X <= x) = 1 - e^{-2x}(1 + 2x).
inline double gamma22_cdf(double x) {
    if (x <= 0.0) return 0.0;
    double s = 2.0 * x;
    if (s < 1.0) return -std::expm1(-s) - s * std::exp(-s);
    return 1.0 - std::exp(-s) * (1.0 + s);
}

// Survival function of the same distribution, accurate in the upper tail.
inline double gamma22_sf(double x) {
    if (x <= 0.0) return 1.0;
    double s = 2.0 * x;
    return std::exp(-s) * (1.0 + s);
}

} // namespace rankcf

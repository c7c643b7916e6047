#pragma once

#include <cmath>
#include <limits>

#include "critmass/errors.hpp"

namespace critmass {

inline double erf(double x) { return std::erf(x); }

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / 1.4142135623730950488016887242097); }

namespace detail {

// Continued fraction for the incomplete beta (modified Lentz), convergents per
// Numerical Recipes. Converges fast for x < (a+1)/(a+b+2).
inline double beta_cf(double a, double b, double x) {
    const double tiny = 1e-300;
    const double eps = 1e-15;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 300; ++m) {
        double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) break;
    }
    return h;
}

}  // namespace detail

// Regularized incomplete beta I_x(a, b).
inline double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw domain_error("incomplete beta requires a > 0 and b > 0");
    if (x < 0.0 || x > 1.0) throw domain_error("incomplete beta requires x in [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                      a * std::log(x) + b * std::log1p(-x);
    double front = std::exp(ln_front);
    // symmetry switch keeps the continued fraction in its fast region
    if (x < (a + 1.0) / (a + b + 2.0))
        return front * detail::beta_cf(a, b, x) / a;
    return 1.0 - front * detail::beta_cf(b, a, 1.0 - x) / b;
}

// Kolmogorov limiting distribution K(x) = P(sup|B(t)| <= x). For x >= 1 the
// alternating series 1 - 2 sum (-1)^{k-1} exp(-2 k^2 x^2) converges in a few
// terms; below that it degrades, so the Jacobi theta dual
// sqrt(2 pi)/x sum exp(-(2k-1)^2 pi^2 / (8 x^2)) is used instead.
inline double kolmogorov_cdf(double x) {
    if (x < 0.0) throw domain_error("kolmogorov_cdf requires x >= 0");
    if (x == 0.0) return 0.0;
    double cdf;
    if (x < 1.0) {
        const double w = 3.14159265358979323846 * 3.14159265358979323846 / (8.0 * x * x);
        double sum = 0.0;
        for (int k = 1; k <= 100; ++k) {
            double term = std::exp(-(2.0 * k - 1.0) * (2.0 * k - 1.0) * w);
            sum += term;
            if (term < 1e-300) break;
        }
        cdf = std::sqrt(2.0 * 3.14159265358979323846) / x * sum;
    } else {
        double sum = 0.0, sign = 1.0;
        for (int k = 1; k <= 100; ++k) {
            double term = std::exp(-2.0 * k * k * x * x);
            sum += sign * term;
            sign = -sign;
            if (term < 1e-12) break;
        }
        cdf = 1.0 - 2.0 * sum;
    }
    if (cdf < 0.0) cdf = 0.0;
    if (cdf > 1.0) cdf = 1.0;
    return cdf;
}

inline double kolmogorov_q(double x) { return 1.0 - kolmogorov_cdf(x); }

// Upper tail of F(d1, d2) at f, through the incomplete beta.
inline double f_test_p(double f, double d1, double d2) {
    if (f <= 0.0) return 1.0;
    return regularized_incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f));
}

// Two-sided p for Student t with dof degrees of freedom.
inline double t_test_p_two_sided(double t, double dof) {
    return regularized_incomplete_beta(dof / 2.0, 0.5, dof / (dof + t * t));
}

}  // namespace critmass

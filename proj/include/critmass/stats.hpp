#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "critmass/dataset.hpp"
#include "critmass/errors.hpp"
#include "critmass/ols.hpp"
#include "critmass/segmented.hpp"
#include "critmass/special.hpp"

namespace critmass {

struct TestResult {
    std::string name;
    double statistic = 0;
    double p_value = 1;
    double dof = std::numeric_limits<double>::quiet_NaN();
    bool reject_at_005 = false;
    bool approximate = false;
};

// F test of the straight-line fit against the constant model.
inline TestResult test_no_correlation(const std::vector<double>& x, const std::vector<double>& y) {
    const auto n = static_cast<double>(x.size());
    if (x.size() != y.size() || x.size() < 4) throw validation_error("need at least 4 points");
    LinearFit lf = fit_linear(x, y, 1);
    double sst = 0.0, mean = 0.0;
    for (double v : y) mean += v;
    mean /= n;
    for (double v : y) sst += (v - mean) * (v - mean);
    TestResult out;
    out.name = "no-correlation";
    out.dof = n - 2.0;
    out.statistic = (sst - lf.sse) / (lf.sse / (n - 2.0));
    out.p_value = f_test_p(out.statistic, 1.0, n - 2.0);
    out.reject_at_005 = out.p_value < 0.05;
    return out;
}

inline TestResult test_no_correlation(const Dataset& ds) {
    return test_no_correlation(ds.active_headcounts(), ds.active_qualities());
}

// t test that the segment above the breakpoint is flat, using only the
// records at or above it.
inline TestResult test_zero_right_slope(const Dataset& ds, const PiecewiseFit& fit) {
    std::vector<double> x, y;
    for (const auto* r : ds.active()) {
        if (r->headcount >= fit.breakpoint) {
            x.push_back(r->headcount);
            y.push_back(r->quality);
        }
    }
    if (x.size() < 3) throw degenerate_error("fewer than 3 records above the breakpoint");
    const double m = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double det = m * sxx - sx * sx;
    if (!(det > 0.0)) throw degenerate_error("right segment has no headcount spread");
    const double slope = (m * sxy - sx * sy) / det;
    const double intercept = (sy - slope * sx) / m;
    double sse = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - intercept - slope * x[i];
        sse += r * r;
    }
    TestResult out;
    out.name = "zero-right-slope";
    out.dof = m - 2.0;
    const double se = std::sqrt(sse / out.dof * m / det);
    // A noise-free segment has se == 0; the ratio is then 0 or +-inf by sign.
    if (se == 0.0)
        out.statistic = slope == 0.0 ? 0.0
                                     : std::copysign(std::numeric_limits<double>::infinity(), slope);
    else
        out.statistic = slope / se;
    out.p_value = t_test_p_two_sided(out.statistic, out.dof);
    out.reject_at_005 = out.p_value < 0.05;
    return out;
}

// Bootstrap test of b1 == b2: twice the fraction of replicates whose slope
// difference falls on the opposite side of zero from the point estimate.
inline TestResult test_equal_slopes(const PiecewiseFit& fit) {
    if (fit.replicates.empty()) throw state_error("slope-coincidence test requires bootstrap replicates");
    const double dhat = fit.b1 - fit.b2;
    TestResult out;
    out.name = "slope-coincidence";
    out.statistic = dhat;
    out.approximate = true;
    if (dhat == 0.0) {
        out.p_value = 1.0;
    } else {
        std::size_t crossed = 0;
        for (const auto& rep : fit.replicates) {
            const double d = rep[1] - rep[3];
            if (dhat > 0.0 ? d <= 0.0 : d >= 0.0) ++crossed;
        }
        out.p_value = std::min(1.0, 2.0 * static_cast<double>(crossed) /
                                        static_cast<double>(fit.replicates.size()));
    }
    out.reject_at_005 = out.p_value < 0.05;
    return out;
}

// Kolmogorov-Smirnov against a normal with mean and sd estimated from the
// sample. The asymptotic p value ignores the estimation, which biases it
// upward, so a non-rejection here is the conservative reading.
inline TestResult ks_normality(const std::vector<double>& sample) {
    const std::size_t n = sample.size();
    if (n < 5) throw validation_error("need at least 5 values for the normality test");
    double mean = 0.0;
    for (double v : sample) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : sample) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (!(sd > 0.0)) throw validation_error("zero variance sample");
    std::vector<double> z(sample);
    for (double& v : z) v = (v - mean) / sd;
    std::sort(z.begin(), z.end());
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double cdf = normal_cdf(z[i]);
        const double hi = static_cast<double>(i + 1) / static_cast<double>(n) - cdf;
        const double lo = cdf - static_cast<double>(i) / static_cast<double>(n);
        d = std::max(d, std::max(hi, lo));
    }
    TestResult out;
    out.name = "normal-residuals";
    out.statistic = d;
    out.p_value = kolmogorov_q(std::sqrt(static_cast<double>(n)) * d);
    out.reject_at_005 = out.p_value < 0.05;
    out.approximate = true;
    return out;
}

}  // namespace critmass

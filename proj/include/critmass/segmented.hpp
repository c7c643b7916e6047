#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "critmass/dataset.hpp"
#include "critmass/errors.hpp"
#include "critmass/ols.hpp"
#include "critmass/rng.hpp"

namespace critmass {

// free: independent OLS per segment, records at the breakpoint enter both.
// continuous: single regression constrained to meet at the breakpoint.
enum class continuity_mode { free, continuous };

struct PiecewiseFit {
    continuity_mode mode = continuity_mode::free;
    double a1 = 0, b1 = 0;  // left segment intercept/slope
    double a2 = 0, b2 = 0;  // right segment intercept/slope
    double breakpoint = 0;
    double se_a1 = std::numeric_limits<double>::quiet_NaN();
    double se_b1 = std::numeric_limits<double>::quiet_NaN();
    double se_a2 = std::numeric_limits<double>::quiet_NaN();
    double se_b2 = std::numeric_limits<double>::quiet_NaN();
    double se_breakpoint = std::numeric_limits<double>::quiet_NaN();
    double r_squared = 0, sse = 0;
    int n_active = 0;
    std::vector<double> residuals;  // input order, one entry per record
    std::vector<std::array<double, 5>> replicates;  // a1, b1, a2, b2, breakpoint
    int degenerate_resamples = 0;

    // Records exactly at the breakpoint belong to the left segment.
    double predict(double n) const { return n <= breakpoint ? a1 + b1 * n : a2 + b2 * n; }
};

namespace detail {

inline bool solve3(const double A[3][3], const double rhs[3], double out[3]) {
    double M[3][4];
    double scale = 0.0;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            M[i][j] = A[i][j];
            scale = std::max(scale, std::fabs(A[i][j]));
        }
        M[i][3] = rhs[i];
    }
    if (scale == 0.0) return false;
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::fabs(M[r][col]) > std::fabs(M[piv][col])) piv = r;
        if (std::fabs(M[piv][col]) <= 1e-12 * scale) return false;
        if (piv != col)
            for (int j = col; j < 4; ++j) std::swap(M[piv][j], M[col][j]);
        for (int r = col + 1; r < 3; ++r) {
            double f = M[r][col] / M[col][col];
            for (int j = col; j < 4; ++j) M[r][j] -= f * M[col][j];
        }
    }
    for (int i = 2; i >= 0; --i) {
        double v = M[i][3];
        for (int j = i + 1; j < 3; ++j) v -= M[i][j] * out[j];
        out[i] = v / M[i][i];
    }
    return true;
}

// Sorted copy of the points plus prefix sums, so each candidate breakpoint
// costs one O(log n) split and one O(n) residual pass.
struct seg_engine {
    std::size_t n = 0;
    std::vector<double> xs, ys;
    std::vector<double> px, pxx, py, pxy, pyy;
    std::vector<int> pd, sd;  // distinct-value counts over prefixes/suffixes

    seg_engine(const std::vector<double>& x, const std::vector<double>& y) : n(x.size()) {
        std::vector<std::size_t> ord(n);
        std::iota(ord.begin(), ord.end(), std::size_t{0});
        std::stable_sort(ord.begin(), ord.end(), [&](std::size_t i, std::size_t j) { return x[i] < x[j]; });
        xs.resize(n);
        ys.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            xs[i] = x[ord[i]];
            ys[i] = y[ord[i]];
        }
        px.assign(n + 1, 0.0);
        pxx.assign(n + 1, 0.0);
        py.assign(n + 1, 0.0);
        pxy.assign(n + 1, 0.0);
        pyy.assign(n + 1, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            px[i + 1] = px[i] + xs[i];
            pxx[i + 1] = pxx[i] + xs[i] * xs[i];
            py[i + 1] = py[i] + ys[i];
            pxy[i + 1] = pxy[i] + xs[i] * ys[i];
            pyy[i + 1] = pyy[i] + ys[i] * ys[i];
        }
        pd.assign(n + 1, 0);
        sd.assign(n + 1, 0);
        for (std::size_t i = 0; i < n; ++i) pd[i + 1] = pd[i] + (i == 0 || xs[i] != xs[i - 1] ? 1 : 0);
        for (std::size_t i = n; i-- > 0;) sd[i] = sd[i + 1] + (i + 1 == n || xs[i] != xs[i + 1] ? 1 : 0);
    }

    std::size_t upper(double c) const {
        return static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), c) - xs.begin());
    }
    std::size_t lower(double c) const {
        return static_cast<std::size_t>(std::lower_bound(xs.begin(), xs.end(), c) - xs.begin());
    }

    // A candidate needs three distinct sizes on {x <= c} and on {x >= c}.
    bool valid(double c) const { return pd[upper(c)] >= 3 && sd[lower(c)] >= 3; }

    double total_centered_yy() const {
        return pyy[n] - py[n] * py[n] / static_cast<double>(n);
    }

    // OLS over the sorted slice [lo, hi); the line depends only on slice
    // membership, never on the candidate value, so plateaus of equivalent
    // breakpoints evaluate bit-identically and ties resolve to the first.
    double side_sse(std::size_t lo, std::size_t hi) const {
        if (hi <= lo) return 0.0;
        const double m = static_cast<double>(hi - lo);
        const double sx = px[hi] - px[lo];
        const double sy = py[hi] - py[lo];
        const double sxx = pxx[hi] - pxx[lo];
        const double sxy = pxy[hi] - pxy[lo];
        const double det = m * sxx - sx * sx;
        double a, b;
        if (std::fabs(det) <= 1e-12 * m * std::max(sxx, 1.0)) {
            b = 0.0;
            a = sy / m;
        } else {
            b = (m * sxy - sx * sy) / det;
            a = (sy - b * sx) / m;
        }
        double sse = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
            const double r = ys[i] - a - b * xs[i];
            sse += r * r;
        }
        return sse;
    }

    double sse_free(double c) const { return side_sse(0, upper(c)) + side_sse(lower(c), n); }

    double sse_continuous(double c) const {
        const std::size_t k = upper(c);
        const double nl = static_cast<double>(k);
        const double nr = static_cast<double>(n - k);
        const double sl = px[k] - c * nl;
        const double sr = (px[n] - px[k]) - c * nr;
        const double sll = pxx[k] - 2.0 * c * px[k] + c * c * nl;
        const double srr = (pxx[n] - pxx[k]) - 2.0 * c * (px[n] - px[k]) + c * c * nr;
        const double sly = pxy[k] - c * py[k];
        const double sry = (pxy[n] - pxy[k]) - c * (py[n] - py[k]);
        const double A[3][3] = {{static_cast<double>(n), sl, sr}, {sl, sll, 0.0}, {sr, 0.0, srr}};
        const double rhs[3] = {py[n], sly, sry};
        double beta[3];
        if (!solve3(A, rhs, beta)) return std::numeric_limits<double>::infinity();
        double sse = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double pred = beta[0] + (i < k ? beta[1] : beta[2]) * (xs[i] - c);
            const double r = ys[i] - pred;
            sse += r * r;
        }
        return sse;
    }

    double sse(double c, continuity_mode mode) const {
        return mode == continuity_mode::continuous ? sse_continuous(c) : sse_free(c);
    }
};

inline PiecewiseFit finalize_fit(const std::vector<double>& x, const std::vector<double>& y, double c,
                                 continuity_mode mode, double sst) {
    const std::size_t n = x.size();
    PiecewiseFit fit;
    fit.mode = mode;
    fit.breakpoint = c;
    fit.n_active = static_cast<int>(n);
    if (mode == continuity_mode::continuous) {
        Eigen::MatrixXd X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), 3);
        Eigen::VectorXd yv(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            X(r, 0) = 1.0;
            X(r, x[i] <= c ? 1 : 2) = x[i] - c;
            yv(r) = y[i];
        }
        LinearFit lf = fit_design(X, yv);
        const double alpha = lf.coefficients(0);
        fit.b1 = lf.coefficients(1);
        fit.b2 = lf.coefficients(2);
        fit.a1 = alpha - fit.b1 * c;
        fit.a2 = alpha - fit.b2 * c;
        fit.sse = lf.sse;
        fit.residuals.assign(lf.residuals.data(), lf.residuals.data() + lf.residuals.size());
    } else {
        double coef[2][2];
        for (int side = 0; side < 2; ++side) {
            double m = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const bool in = side == 0 ? x[i] <= c : x[i] >= c;
                if (!in) continue;
                m += 1.0;
                sx += x[i];
                sy += y[i];
                sxx += x[i] * x[i];
                sxy += x[i] * y[i];
            }
            const double det = m * sxx - sx * sx;
            if (!(m >= 2.0) || std::fabs(det) <= 1e-12 * m * std::max(sxx, 1.0))
                throw degenerate_error("segment has no size variation");
            coef[side][1] = (m * sxy - sx * sy) / det;
            coef[side][0] = (sy - coef[side][1] * sx) / m;
        }
        fit.a1 = coef[0][0];
        fit.b1 = coef[0][1];
        fit.a2 = coef[1][0];
        fit.b2 = coef[1][1];
        double sse = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (x[i] <= c) {
                const double r = y[i] - fit.a1 - fit.b1 * x[i];
                sse += r * r;
            }
            if (x[i] >= c) {
                const double r = y[i] - fit.a2 - fit.b2 * x[i];
                sse += r * r;
            }
        }
        fit.sse = sse;
        fit.residuals.resize(n);
        for (std::size_t i = 0; i < n; ++i) fit.residuals[i] = y[i] - fit.predict(x[i]);
    }
    fit.r_squared = 1.0 - fit.sse / sst;
    return fit;
}

}  // namespace detail

// Global SSE minimizer over breakpoint candidates: 1000-cell uniform grid
// between the second-smallest and second-largest size, then golden-section
// refinement around the best cell. Ties resolve toward the smaller
// breakpoint; the refined value replaces the grid winner only when it is
// strictly better, so exact plateaus keep their leftmost candidate.
inline PiecewiseFit fit_piecewise(const std::vector<double>& x, const std::vector<double>& y,
                                  continuity_mode mode) {
    if (x.size() != y.size()) throw validation_error("size/quality length mismatch");
    const std::size_t n = x.size();
    if (n < 4) throw degenerate_error("need at least 4 records for a two-segment fit");
    detail::seg_engine eng(x, y);
    if (eng.xs.front() == eng.xs.back()) throw validation_error("all sizes identical");
    const double sst = eng.total_centered_yy();
    if (!(sst > 0.0)) throw validation_error("constant quality values");
    const double tie_eps = 1e-15 + 1e-12 * sst;  // scaled so exact plateaus compare as ties
    const double lo = eng.xs[1];
    const double hi = eng.xs[n - 2];
    double best_sse = std::numeric_limits<double>::infinity();
    double best_c = 0.0;
    if (hi > lo) {
        for (int i = 0; i <= 1000; ++i) {
            const double c = i == 1000 ? hi : lo + (hi - lo) * static_cast<double>(i) / 1000.0;
            if (!eng.valid(c)) continue;
            const double v = eng.sse(c, mode);
            if (v < best_sse - tie_eps) {
                best_sse = v;
                best_c = c;
            }
        }
    } else if (eng.valid(lo)) {
        best_c = lo;
        best_sse = eng.sse(lo, mode);
    }
    if (!(best_sse < std::numeric_limits<double>::infinity()))
        throw degenerate_error("no valid breakpoint candidate");
    double c_final = best_c;
    if (hi > lo) {
        const double h = (hi - lo) / 1000.0;
        double a = best_c - h, b = best_c + h;
        const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
        double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
        double f1 = eng.sse(x1, mode), f2 = eng.sse(x2, mode);
        while (b - a > 1e-9) {
            if (f1 <= f2) {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - gr * (b - a);
                f1 = eng.sse(x1, mode);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + gr * (b - a);
                f2 = eng.sse(x2, mode);
            }
        }
        if (eng.sse(a, mode) < best_sse - tie_eps) c_final = a;
    }
    return detail::finalize_fit(x, y, c_final, mode, sst);
}

inline PiecewiseFit fit_piecewise(const Dataset& ds, continuity_mode mode) {
    return fit_piecewise(ds.active_headcounts(), ds.active_qualities(), mode);
}

// Case-resampling bootstrap; resample i draws its indices from a stream
// seeded with seed + i, so runs are reproducible and order-independent.
inline void bootstrap_errors(PiecewiseFit& fit, const std::vector<double>& x, const std::vector<double>& y,
                             int resamples, std::uint64_t seed) {
    if (resamples < 200) throw validation_error("resamples must be at least 200");
    const std::size_t n = x.size();
    fit.replicates.clear();
    fit.degenerate_resamples = 0;
    std::vector<double> xb(n), yb(n);
    for (int i = 0; i < resamples; ++i) {
        rng stream(seed + static_cast<std::uint64_t>(i));
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t idx = stream.next_index(n);
            xb[k] = x[idx];
            yb[k] = y[idx];
        }
        try {
            PiecewiseFit f = fit_piecewise(xb, yb, fit.mode);
            fit.replicates.push_back({f.a1, f.b1, f.a2, f.b2, f.breakpoint});
        } catch (const error&) {
            ++fit.degenerate_resamples;
        }
    }
    if (2 * fit.degenerate_resamples > resamples)
        throw instability_error("more than half of the bootstrap resamples were degenerate");
    const std::size_t m = fit.replicates.size();
    double se[5];
    for (int j = 0; j < 5; ++j) {
        double mean = 0.0;
        for (const auto& rep : fit.replicates) mean += rep[static_cast<std::size_t>(j)];
        mean /= static_cast<double>(m);
        double ss = 0.0;
        for (const auto& rep : fit.replicates) {
            const double d = rep[static_cast<std::size_t>(j)] - mean;
            ss += d * d;
        }
        se[j] = std::sqrt(ss / static_cast<double>(m - 1));
    }
    fit.se_a1 = se[0];
    fit.se_b1 = se[1];
    fit.se_a2 = se[2];
    fit.se_b2 = se[3];
    fit.se_breakpoint = se[4];
}

inline void bootstrap_errors(PiecewiseFit& fit, const Dataset& ds, int resamples, std::uint64_t seed) {
    bootstrap_errors(fit, ds.active_headcounts(), ds.active_qualities(), resamples, seed);
}

// Quantile with linear interpolation between order statistics
// (h = (m - 1) p), the same convention most stats packages default to.
inline double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw validation_error("percentile of empty sample");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(h);
    if (lo + 1 >= values.size()) return values.back();
    return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

struct ConfidenceBand {
    std::vector<double> lower, upper;
};

inline ConfidenceBand confidence_band(const PiecewiseFit& fit, const std::vector<double>& grid, double level) {
    if (fit.replicates.empty()) throw state_error("confidence band requires bootstrap replicates");
    if (!(level > 0.0 && level < 1.0)) throw validation_error("band level must be inside (0, 1)");
    const double alpha = 1.0 - level;
    ConfidenceBand band;
    band.lower.reserve(grid.size());
    band.upper.reserve(grid.size());
    std::vector<double> preds(fit.replicates.size());
    for (double g : grid) {
        for (std::size_t j = 0; j < fit.replicates.size(); ++j) {
            const auto& rep = fit.replicates[j];
            preds[j] = g <= rep[4] ? rep[0] + rep[1] * g : rep[2] + rep[3] * g;
        }
        band.lower.push_back(percentile(preds, alpha / 2.0));
        band.upper.push_back(percentile(preds, 1.0 - alpha / 2.0));
    }
    return band;
}

struct CriticalMasses {
    double lower = 0, upper = 0;
    double se_lower = std::numeric_limits<double>::quiet_NaN();
    double se_upper = std::numeric_limits<double>::quiet_NaN();
};

// Lower critical mass is half the breakpoint by construction, so its
// uncertainty is half the breakpoint's.
inline CriticalMasses critical_masses(const PiecewiseFit& fit) {
    return {fit.breakpoint / 2.0, fit.breakpoint, fit.se_breakpoint / 2.0, fit.se_breakpoint};
}

struct Classification {
    int small = 0, medium = 0, large = 0;
};

inline const char* size_class(double n, double lower, double upper) {
    return n < lower ? "small" : n < upper ? "medium" : "large";
}

inline Classification classify(const Dataset& ds, double lower, double upper) {
    if (!(lower <= upper)) throw validation_error("lower mass must not exceed upper mass");
    Classification out;
    for (const auto* r : ds.active()) {
        if (r->headcount < lower)
            ++out.small;
        else if (r->headcount < upper)
            ++out.medium;
        else
            ++out.large;
    }
    return out;
}

inline std::vector<double> hat_values(const std::vector<double>& x, const PiecewiseFit& fit) {
    const std::size_t n = x.size();
    std::vector<double> h(n, 0.0);
    if (fit.mode == continuity_mode::continuous) {
        Eigen::MatrixXd X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), 3);
        for (std::size_t i = 0; i < n; ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            X(r, 0) = 1.0;
            X(r, x[i] <= fit.breakpoint ? 1 : 2) = x[i] - fit.breakpoint;
        }
        Eigen::MatrixXd xtx = X.transpose() * X;
        auto solver = xtx.ldlt();
        if (solver.info() != Eigen::Success) throw singularity_error("hat matrix is singular");
        for (std::size_t i = 0; i < n; ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            Eigen::VectorXd row = X.row(r).transpose();
            h[i] = row.dot(solver.solve(row));
        }
    } else {
        for (int side = 0; side < 2; ++side) {
            double m = 0, sx = 0, sxx = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const bool in = side == 0 ? x[i] <= fit.breakpoint : x[i] >= fit.breakpoint;
                if (!in) continue;
                m += 1.0;
                sx += x[i];
                sxx += x[i] * x[i];
            }
            if (m < 2.0) throw degenerate_error("segment too small for leverage");
            const double mean = sx / m;
            const double sxx_c = sxx - m * mean * mean;
            if (!(sxx_c > 0.0)) throw degenerate_error("segment has no size variation");
            for (std::size_t i = 0; i < n; ++i) {
                const bool report = side == 0 ? x[i] <= fit.breakpoint : x[i] > fit.breakpoint;
                if (report) h[i] = 1.0 / m + (x[i] - mean) * (x[i] - mean) / sxx_c;
            }
        }
    }
    return h;
}

}  // namespace critmass

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "critmass/dataset.hpp"
#include "critmass/errors.hpp"
#include "critmass/ols.hpp"
#include "critmass/rng.hpp"
#include "critmass/segmented.hpp"

namespace critmass {

enum class ansatz_kind { quadratic, cubic, power, logshift };

inline const char* ansatz_name(ansatz_kind k) {
    switch (k) {
        case ansatz_kind::quadratic: return "quadratic";
        case ansatz_kind::cubic: return "cubic";
        case ansatz_kind::power: return "power";
        default: return "logshift";
    }
}

inline int ansatz_arity(ansatz_kind k) { return k == ansatz_kind::cubic ? 4 : 3; }

struct AnsatzFit {
    ansatz_kind ansatz = ansatz_kind::quadratic;
    std::vector<double> parameters;
    std::vector<double> standard_errors;
    double r_squared = 0, sse = 0;
    bool converged = false;
    int iterations = 0;
};

namespace detail {

struct nls_model {
    ansatz_kind kind;
    double min_x;

    // Keeps the log argument positive across the sample.
    void clamp(std::vector<double>& p) const {
        if (kind == ansatz_kind::logshift) p[2] = std::max(p[2], -min_x + 1e-6);
    }

    double eval(const std::vector<double>& p, double x) const {
        if (kind == ansatz_kind::power) return p[0] + p[1] * std::pow(x, p[2]);
        return p[0] + p[1] * std::log(x + p[2]);
    }

    void jacobian_row(const std::vector<double>& p, double x, double* row) const {
        if (kind == ansatz_kind::power) {
            const double xp = std::pow(x, p[2]);
            row[0] = 1.0;
            row[1] = xp;
            row[2] = p[1] * xp * std::log(x);
        } else {
            const double shifted = x + p[2];
            row[0] = 1.0;
            row[1] = std::log(shifted);
            row[2] = p[1] / shifted;
        }
    }
};

inline double nls_sse(const nls_model& m, const std::vector<double>& p, const std::vector<double>& x,
                      const std::vector<double>& y) {
    double sse = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - m.eval(p, x[i]);
        sse += r * r;
    }
    return sse;
}

// Levenberg-Marquardt with multiplicative damping on diag(J'J).
inline AnsatzFit lm_fit(const nls_model& m, const std::vector<double>& x, const std::vector<double>& y,
                        std::vector<double> p) {
    const auto n = static_cast<Eigen::Index>(x.size());
    const Eigen::Index k = 3;
    m.clamp(p);
    AnsatzFit fit;
    fit.ansatz = m.kind;
    double sse = nls_sse(m, p, x, y);
    double lambda = 1e-3;
    Eigen::MatrixXd J(n, k);
    Eigen::VectorXd r(n);
    double row[3];
    int iter = 0;
    for (; iter < 500; ++iter) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            m.jacobian_row(p, x[ui], row);
            for (Eigen::Index d = 0; d < k; ++d) J(i, d) = row[static_cast<std::size_t>(d)];
            r(i) = y[ui] - m.eval(p, x[ui]);
        }
        Eigen::VectorXd g = J.transpose() * r;
        if (g.norm() < 1e-8 * (1.0 + sse)) {
            fit.converged = true;
            break;
        }
        Eigen::MatrixXd h = J.transpose() * J;
        Eigen::MatrixXd damped = h;
        for (Eigen::Index d = 0; d < k; ++d) damped(d, d) += lambda * h(d, d);
        Eigen::VectorXd step = damped.ldlt().solve(g);
        if (!step.allFinite()) {
            lambda *= 10.0;
            if (lambda > 1e12) break;
            continue;
        }
        std::vector<double> trial(p);
        for (Eigen::Index d = 0; d < k; ++d) trial[static_cast<std::size_t>(d)] += step(d);
        m.clamp(trial);
        const double trial_sse = nls_sse(m, trial, x, y);
        if (std::isfinite(trial_sse) && trial_sse < sse) {
            const double rel = (sse - trial_sse) / std::max(sse, 1e-300);
            const double lambda_used = lambda;
            p = trial;
            sse = trial_sse;
            lambda = std::max(lambda / 10.0, 1e-12);
            // A tiny gain under heavy damping only means the step was timid,
            // so the flat-valley exit requires a near-Gauss-Newton step.
            if (rel < 1e-12 && lambda_used <= 1e-3) {
                fit.converged = true;
                ++iter;
                break;
            }
        } else {
            lambda *= 10.0;
            if (lambda > 1e12) break;
        }
    }
    fit.iterations = iter;
    fit.parameters = p;
    fit.sse = sse;
    fit.standard_errors.assign(3, std::numeric_limits<double>::quiet_NaN());
    if (x.size() > 3) {
        for (Eigen::Index i = 0; i < n; ++i) {
            m.jacobian_row(p, x[static_cast<std::size_t>(i)], row);
            for (Eigen::Index d = 0; d < k; ++d) J(i, d) = row[static_cast<std::size_t>(d)];
        }
        Eigen::MatrixXd h = J.transpose() * J;
        Eigen::FullPivLU<Eigen::MatrixXd> lu(h);
        if (lu.isInvertible()) {
            const double sigma2 = sse / static_cast<double>(x.size() - 3);
            Eigen::MatrixXd cov = sigma2 * lu.inverse();
            for (Eigen::Index d = 0; d < k; ++d)
                fit.standard_errors[static_cast<std::size_t>(d)] = std::sqrt(std::max(cov(d, d), 0.0));
        }
    }
    return fit;
}

}  // namespace detail

// Data-driven starting point: anchor the offset at the lowest quality and
// scale the growth term to span the observed ranges.
inline std::vector<double> default_init(ansatz_kind kind, const std::vector<double>& x,
                                        const std::vector<double>& y) {
    const auto [xmin_it, xmax_it] = std::minmax_element(x.begin(), x.end());
    const auto [ymin_it, ymax_it] = std::minmax_element(y.begin(), y.end());
    const double xmin = *xmin_it, xmax = *xmax_it, ymin = *ymin_it, ymax = *ymax_it;
    if (kind == ansatz_kind::power) {
        const double denom = std::max(std::sqrt(xmax) - std::sqrt(xmin), 1e-6);
        return {ymin, (ymax - ymin) / denom, 0.5};
    }
    const double denom = std::max(std::log(std::max(xmax - xmin, 1e-6)), 1.0);
    return {ymin, (ymax - ymin) / denom, 1.0};
}

inline AnsatzFit fit_ansatz(const std::vector<double>& x, const std::vector<double>& y, ansatz_kind kind,
                            const std::vector<double>* init = nullptr) {
    if (x.size() != y.size()) throw validation_error("size/quality length mismatch");
    const std::size_t n = x.size();
    if (static_cast<int>(n) < ansatz_arity(kind) + 2)
        throw validation_error("too few records for the requested ansatz");
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(n);
    double sst = 0.0;
    for (double v : y) sst += (v - mean) * (v - mean);
    if (!(sst > 0.0)) throw validation_error("constant quality values");

    if (kind == ansatz_kind::quadratic || kind == ansatz_kind::cubic) {
        const int degree = kind == ansatz_kind::quadratic ? 2 : 3;
        LinearFit lf = fit_linear(x, y, degree);
        AnsatzFit fit;
        fit.ansatz = kind;
        fit.parameters.assign(lf.coefficients.data(), lf.coefficients.data() + lf.coefficients.size());
        fit.standard_errors.assign(lf.standard_errors.data(),
                                   lf.standard_errors.data() + lf.standard_errors.size());
        fit.r_squared = lf.r_squared;
        fit.sse = lf.sse;
        fit.converged = true;
        return fit;
    }

    const double min_x = *std::min_element(x.begin(), x.end());
    if (kind == ansatz_kind::power && min_x <= 0.0)
        throw validation_error("power ansatz requires positive sizes");
    if (min_x == *std::max_element(x.begin(), x.end()))
        throw validation_error("all sizes identical");
    detail::nls_model model{kind, min_x};
    const std::vector<double> base = init ? *init : default_init(kind, x, y);

    // Base start plus eight deterministic jittered restarts; keep the
    // converged run with the lowest SSE, earliest start on ties.
    AnsatzFit best;
    bool have = false;
    for (int start = 0; start <= 8; ++start) {
        std::vector<double> p = base;
        if (start > 0) {
            rng stream(1000 + static_cast<std::uint64_t>(start));
            for (double& v : p) v *= 1.0 + 0.25 * (2.0 * stream.next_double() - 1.0);
        }
        AnsatzFit run = detail::lm_fit(model, x, y, p);
        if (!run.converged) continue;
        if (!have || run.sse < best.sse) {
            best = run;
            have = true;
        }
    }
    if (!have) throw convergence_error(std::string(ansatz_name(kind)) + " fit did not converge");
    best.r_squared = 1.0 - best.sse / sst;
    return best;
}

inline AnsatzFit fit_ansatz(const Dataset& ds, ansatz_kind kind, const std::vector<double>* init = nullptr) {
    return fit_ansatz(ds.active_headcounts(), ds.active_qualities(), kind, init);
}

struct ComparisonRow {
    std::string model;
    int n_parameters = 0;
    double r_squared = std::numeric_limits<double>::quiet_NaN();
    double sse = std::numeric_limits<double>::quiet_NaN();
    bool converged = false;
    std::vector<double> parameters;
    std::string error;  // empty on success
};

inline std::vector<ComparisonRow> compare_ansaetze(const Dataset& ds,
                                                   continuity_mode mode = continuity_mode::free) {
    std::vector<ComparisonRow> rows;
    const ansatz_kind kinds[4] = {ansatz_kind::quadratic, ansatz_kind::cubic, ansatz_kind::power,
                                  ansatz_kind::logshift};
    for (ansatz_kind k : kinds) {
        ComparisonRow row;
        row.model = ansatz_name(k);
        row.n_parameters = ansatz_arity(k);
        try {
            AnsatzFit f = fit_ansatz(ds, k);
            row.r_squared = f.r_squared;
            row.sse = f.sse;
            row.converged = f.converged;
            row.parameters = f.parameters;
        } catch (const error& e) {
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    ComparisonRow pw;
    pw.model = "piecewise";
    pw.n_parameters = mode == continuity_mode::free ? 5 : 4;
    try {
        PiecewiseFit f = fit_piecewise(ds, mode);
        pw.r_squared = f.r_squared;
        pw.sse = f.sse;
        pw.converged = true;
        pw.parameters = {f.a1, f.b1, f.a2, f.b2, f.breakpoint};
    } catch (const error& e) {
        pw.error = e.what();
    }
    rows.push_back(std::move(pw));
    std::stable_sort(rows.begin(), rows.end(), [](const ComparisonRow& a, const ComparisonRow& b) {
        if (a.error.empty() != b.error.empty()) return a.error.empty();
        if (a.error.empty() && b.error.empty()) return a.r_squared > b.r_squared;
        return false;
    });
    return rows;
}

}  // namespace critmass

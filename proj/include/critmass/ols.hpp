#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "critmass/errors.hpp"

namespace critmass {

struct LinearFit {
    Eigen::VectorXd coefficients;
    Eigen::VectorXd standard_errors;
    Eigen::VectorXd residuals;
    Eigen::MatrixXd covariance;
    double r_squared = 0.0;
    double sse = 0.0;
    int dof = 0;
};

inline double r_squared(const Eigen::VectorXd& y, const Eigen::VectorXd& predictions) {
    if (y.size() != predictions.size() || y.size() < 2)
        throw validation_error("r_squared needs two equal-length vectors of size >= 2");
    double mean = y.mean();
    double sst = (y.array() - mean).square().sum();
    if (sst <= 0.0) throw validation_error("r_squared undefined for constant y");
    double sse = (y - predictions).squaredNorm();
    return 1.0 - sse / sst;
}

// OLS on an explicit design matrix via column-pivoted QR. Standard errors are
// sqrt of the diagonal of sigma2 (X'X)^-1 with sigma2 = SSE/dof.
inline LinearFit fit_design(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    if (X.rows() != y.size()) throw validation_error("design rows must match y length");
    if (X.rows() < X.cols()) throw validation_error("fewer observations than parameters");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() < X.cols())
        throw singularity_error("rank-deficient design matrix (rank " +
                                std::to_string(qr.rank()) + " of " + std::to_string(X.cols()) + ")");
    LinearFit fit;
    fit.coefficients = qr.solve(y);
    fit.residuals = y - X * fit.coefficients;
    fit.sse = fit.residuals.squaredNorm();
    fit.dof = static_cast<int>(X.rows() - X.cols());
    Eigen::MatrixXd xtx_inv = (X.transpose() * X).ldlt().solve(
        Eigen::MatrixXd::Identity(X.cols(), X.cols()));
    double sigma2 = fit.dof > 0 ? fit.sse / fit.dof : std::numeric_limits<double>::quiet_NaN();
    fit.covariance = sigma2 * xtx_inv;
    fit.standard_errors = fit.covariance.diagonal().array().max(0.0).sqrt();
    double mean = y.mean();
    double sst = (y.array() - mean).square().sum();
    fit.r_squared = sst > 0.0 ? 1.0 - fit.sse / sst : 1.0;
    return fit;
}

// Polynomial fit with raw (uncentered) powers, coefficient order low to high.
inline LinearFit fit_linear(const std::vector<double>& x, const std::vector<double>& y, int degree) {
    if (degree < 1) throw validation_error("degree must be >= 1");
    auto n = static_cast<Eigen::Index>(x.size());
    if (x.size() != y.size() || n < degree + 2)
        throw validation_error("fit_linear needs len(x) = len(y) >= degree + 2");
    bool varies = false;
    for (std::size_t i = 1; i < x.size(); ++i)
        if (x[i] != x[0]) { varies = true; break; }
    if (!varies) throw validation_error("fit_linear: x values are all identical");
    Eigen::MatrixXd X(n, degree + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        double p = 1.0;
        for (int j = 0; j <= degree; ++j) {
            X(i, j) = p;
            p *= x[static_cast<std::size_t>(i)];
        }
    }
    Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
    try {
        return fit_design(X, yv);
    } catch (const singularity_error&) {
        throw singularity_error("rank-deficient polynomial design at degree " + std::to_string(degree));
    }
}

}  // namespace critmass

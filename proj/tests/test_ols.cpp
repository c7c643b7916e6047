#include "catch.hpp"

#include <cmath>
#include <vector>

#include "critmass/ols.hpp"
#include "critmass/rng.hpp"
#include "helpers.hpp"

using namespace critmass;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

double sse_line(const std::vector<double>& x, const std::vector<double>& y, double a, double b) {
    double s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - a - b * x[i];
        s += r * r;
    }
    return s;
}

}  // namespace

TEST_CASE("five point line fit matches the closed form") {
    std::vector<double> x{1, 2, 3, 4, 5}, y{1, 2, 2, 4, 5};
    LinearFit lf = fit_linear(x, y, 1);
    CHECK_THAT(lf.coefficients(0), WithinAbs(-0.2, 1e-12));
    CHECK_THAT(lf.coefficients(1), WithinAbs(1.0, 1e-12));
    CHECK_THAT(lf.standard_errors(0), WithinRel(0.5416025603, 1e-9));
    CHECK_THAT(lf.standard_errors(1), WithinRel(0.1632993162, 1e-9));
    CHECK_THAT(lf.r_squared, WithinRel(0.9259259259, 1e-9));
    CHECK(lf.dof == 3);

    // No nearby parameter pair beats the least squares solution.
    const double best = sse_line(x, y, lf.coefficients(0), lf.coefficients(1));
    for (double da = -0.5; da <= 0.5; da += 0.01)
        for (double db = -0.5; db <= 0.5; db += 0.01)
            REQUIRE(best <= sse_line(x, y, lf.coefficients(0) + da, lf.coefficients(1) + db) + 1e-12);
}

TEST_CASE("exact line is recovered with zero residuals") {
    std::vector<double> x{1, 2, 4, 7, 9}, y;
    for (double v : x) y.push_back(3.0 + 2.0 * v);
    LinearFit lf = fit_linear(x, y, 1);
    CHECK_THAT(lf.coefficients(0), WithinAbs(3.0, 1e-10));
    CHECK_THAT(lf.coefficients(1), WithinAbs(2.0, 1e-10));
    CHECK(lf.sse < 1e-18);
    CHECK_THAT(lf.r_squared, WithinAbs(1.0, 1e-12));
    for (double r : lf.residuals) CHECK(std::fabs(r) < 1e-9);
}

TEST_CASE("polynomial fits on the survey data match frozen values") {
    Dataset ds = testutil::load_fixture_active();
    auto x = ds.active_headcounts();
    auto y = ds.active_qualities();

    LinearFit lin = fit_linear(x, y, 1);
    CHECK_THAT(lin.coefficients(0), WithinRel(22.2811695, 1e-8));
    CHECK_THAT(lin.coefficients(1), WithinRel(1.170281721, 1e-8));
    CHECK_THAT(lin.standard_errors(0), WithinRel(2.990413343, 1e-7));
    CHECK_THAT(lin.standard_errors(1), WithinRel(0.2151435754, 1e-7));
    CHECK_THAT(lin.r_squared, WithinRel(0.5228719047, 1e-9));
    CHECK_THAT(lin.sse, WithinRel(1519.516107, 1e-9));

    LinearFit quad = fit_linear(x, y, 2);
    CHECK_THAT(quad.coefficients(0), WithinRel(10.79966404, 1e-7));
    CHECK_THAT(quad.coefficients(1), WithinRel(3.108477929, 1e-7));
    CHECK_THAT(quad.coefficients(2), WithinRel(-0.06395969055, 1e-7));
    CHECK_THAT(quad.standard_errors(0), WithinRel(5.294616366, 1e-7));
    CHECK_THAT(quad.standard_errors(1), WithinRel(0.7906252542, 1e-7));
    CHECK_THAT(quad.standard_errors(2), WithinRel(0.025272645, 1e-7));
    CHECK_THAT(quad.r_squared, WithinRel(0.6171771445, 1e-9));
    CHECK_THAT(quad.sse, WithinRel(1219.180972, 1e-9));

    LinearFit cubic = fit_linear(x, y, 3);
    CHECK_THAT(cubic.coefficients(0), WithinRel(17.09154075, 1e-6));
    CHECK_THAT(cubic.coefficients(1), WithinRel(1.134165846, 1e-6));
    CHECK_THAT(cubic.coefficients(2), WithinRel(0.09958176588, 1e-6));
    CHECK_THAT(cubic.coefficients(3), WithinRel(-0.003730823922, 1e-6));
    CHECK_THAT(cubic.standard_errors(0), WithinRel(7.974661817, 1e-6));
    CHECK_THAT(cubic.standard_errors(1), WithinRel(2.033616815, 1e-6));
    CHECK_THAT(cubic.standard_errors(2), WithinRel(0.15729481, 1e-6));
    CHECK_THAT(cubic.standard_errors(3), WithinRel(0.003541898686, 1e-6));
    CHECK_THAT(cubic.r_squared, WithinRel(0.6334452177, 1e-9));
    CHECK_THAT(cubic.sse, WithinRel(1167.371826, 1e-9));

    // Nested models never lose explained variance.
    CHECK(lin.r_squared <= quad.r_squared + 1e-12);
    CHECK(quad.r_squared <= cubic.r_squared + 1e-12);
}

TEST_CASE("nested r squared is monotone on random data") {
    rng gen(1234);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> x, y;
        for (int i = 0; i < 25; ++i) {
            x.push_back(1.0 + 0.5 * i);
            y.push_back(3.0 + 0.7 * x.back() + 2.0 * gen.next_normal());
        }
        double prev = -1.0;
        for (int deg = 1; deg <= 3; ++deg) {
            LinearFit lf = fit_linear(x, y, deg);
            CHECK(lf.r_squared >= prev - 1e-12);
            prev = lf.r_squared;
        }
    }
}

TEST_CASE("residuals sum to zero when an intercept is present") {
    Dataset ds = testutil::load_fixture_active();
    LinearFit lf = fit_linear(ds.active_headcounts(), ds.active_qualities(), 2);
    double sum = 0;
    for (double r : lf.residuals) sum += r;
    CHECK_THAT(sum, WithinAbs(0.0, 1e-8));
}

TEST_CASE("covariance is symmetric with nonnegative diagonal") {
    Dataset ds = testutil::load_fixture_active();
    LinearFit lf = fit_linear(ds.active_headcounts(), ds.active_qualities(), 2);
    REQUIRE(lf.covariance.rows() == 3);
    for (int i = 0; i < 3; ++i) {
        CHECK(lf.covariance(i, i) >= 0.0);
        for (int j = 0; j < 3; ++j)
            CHECK_THAT(lf.covariance(i, j), WithinAbs(lf.covariance(j, i), 1e-12));
        CHECK_THAT(lf.standard_errors(i), WithinRel(std::sqrt(lf.covariance(i, i)), 1e-12));
    }
}

TEST_CASE("degenerate designs are rejected") {
    std::vector<double> x{2, 2, 2, 2}, y{1, 2, 3, 4};
    CHECK_THROWS_AS(fit_linear(x, y, 1), validation_error);

    Eigen::MatrixXd X(4, 2);
    Eigen::VectorXd yv(4);
    for (int i = 0; i < 4; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = 2.0;  // duplicate of the intercept direction
        yv(i) = i;
    }
    CHECK_THROWS_AS(fit_design(X, yv), singularity_error);

    CHECK_THROWS_AS(fit_linear({1, 2}, {1, 2, 3}, 1), validation_error);
    CHECK_THROWS_AS(fit_linear({1, 2, 3}, {1, 2, 3}, 3), validation_error);
}

TEST_CASE("r squared handles reference cases") {
    Eigen::VectorXd y(4), mean(4), flat(3), flatp(3);
    y << 1, 2, 3, 4;
    mean << 2.5, 2.5, 2.5, 2.5;
    flat << 3, 3, 3;
    flatp << 3, 3, 3;
    CHECK_THAT(r_squared(y, y), WithinAbs(1.0, 1e-15));
    CHECK_THAT(r_squared(y, mean), WithinAbs(0.0, 1e-15));
    CHECK_THROWS_AS(r_squared(flat, flatp), validation_error);
}

#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cbr::fit {

struct FitData {
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> weights;  // empty means all ones

    std::size_t size() const noexcept { return y.size(); }
    double weight(std::size_t i) const { return weights.empty() ? 1.0 : weights[i]; }
};

struct Bound {
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
};

// residual(p, data, r) writes one unweighted residual per data point
// (model - observation). jacobian(p, data, J) fills d r_i / d p_j.
using ResidualFn = std::function<void(std::span<const double>, const FitData&, std::span<double>)>;
using JacobianFn = std::function<void(std::span<const double>, const FitData&, Eigen::MatrixXd&)>;

struct FitModel {
    std::size_t n_params = 0;
    ResidualFn residual;
    JacobianFn jacobian;        // optional
    std::vector<Bound> bounds;  // empty means unbounded
    std::vector<std::string> names;

    void validate() const;
};

// model(p, x) - y with a scalar curve f(p, x).
FitModel make_curve_model(std::size_t n_params,
                          std::function<double(std::span<const double>, double)> f,
                          std::vector<std::string> names = {});

struct FitOptions {
    double initial_lambda = 1e-3;
    double param_tolerance = 1e-10;
    double cost_tolerance = 1e-12;
    int max_iterations = 500;
};

struct FitResult {
    std::vector<double> params;
    Eigen::MatrixXd covariance;  // (J^T W J)^-1 at the solution
    double chi2 = 0.0;           // weighted sum of squared residuals
    double reduced_chi2 = 0.0;
    int iterations = 0;
    bool converged = false;
    std::size_t n_points = 0;
    std::vector<std::string> names;
    std::vector<bool> at_bound;
    std::vector<double> cost_history;  // chi2 after every accepted step
};

// Damped Gauss-Newton with Marquardt scaling. Parameters are clamped to their
// bounds; a parameter sitting on a bound whose gradient points outward is
// frozen for that step.
FitResult least_squares_fit(const FitModel& model, const FitData& data, std::vector<double> init,
                            const FitOptions& options = {});

// Central differences, step max(1e-8, 1e-8 |p_i|); one-sided near a bound.
Eigen::MatrixXd numerical_jacobian(const FitModel& model, std::span<const double> params,
                                   const FitData& data);

// sqrt(diag(covariance) * reduced_chi2)
std::vector<double> parameter_uncertainties(const FitResult& result);

double weighted_cost(const FitModel& model, const FitData& data, std::span<const double> params);

}  // namespace cbr::fit

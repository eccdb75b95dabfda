#pragma once

// Levenberg-Marquardt least squares with box bounds (Ceres trust region).
// Small dense problems only: every fit in this library has <= 5 parameters.

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <vector>

namespace qnl::lsq {

using ResidualFn =
    std::function<void(std::span<const double> params, std::span<double> residuals)>;

struct Bounds {
  std::vector<double> lower;  // empty = unbounded
  std::vector<double> upper;
};

struct Options {
  int max_iterations = 400;
  double ftol = 1e-15;  // relative SSR decrease considered converged
  double xtol = 1e-13;  // relative parameter step considered converged
  double initial_damping = 1e-3;
  /// Typical magnitudes used for finite-difference steps; empty = |x0| (or 1).
  std::vector<double> scale;
};

struct Result {
  std::vector<double> params;
  std::vector<double> std_errors;
  Eigen::MatrixXd covariance;
  double residual_norm = 0.0;          // ||r(params)||_2
  double initial_residual_norm = 0.0;  // ||r(x0)||_2
  int iterations = 0;
  bool converged = false;
  std::vector<bool> at_bound;
};

/// Minimize ||r(x)||^2 starting from x0. The returned residual norm never
/// exceeds the initial one: only steps that decrease the cost are accepted.
Result minimize(const ResidualFn& residuals, std::size_t n_residuals, std::vector<double> x0,
                const Bounds& bounds = {}, const Options& options = {});

/// Central-difference Jacobian, column j stepped by h_j.
Eigen::MatrixXd numeric_jacobian(const ResidualFn& residuals, std::size_t n_residuals,
                                 std::span<const double> x, std::span<const double> steps);

}  // namespace qnl::lsq

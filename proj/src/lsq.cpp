#include "qnl/lsq.hpp"

#include "qnl/error.hpp"

#include <ceres/ceres.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace qnl::lsq {

namespace {

void project(std::vector<double>& x, const Bounds& b) {
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (!b.lower.empty()) x[j] = std::max(x[j], b.lower[j]);
    if (!b.upper.empty()) x[j] = std::min(x[j], b.upper[j]);
  }
}

}  // namespace

Eigen::MatrixXd numeric_jacobian(const ResidualFn& residuals, std::size_t n_residuals,
                                 std::span<const double> x, std::span<const double> steps) {
  const std::size_t n = x.size();
  Eigen::MatrixXd jac(static_cast<Eigen::Index>(n_residuals), static_cast<Eigen::Index>(n));
  std::vector<double> xp(x.begin(), x.end());
  Eigen::VectorXd rp(static_cast<Eigen::Index>(n_residuals));
  Eigen::VectorXd rm(static_cast<Eigen::Index>(n_residuals));
  for (std::size_t j = 0; j < n; ++j) {
    const double h = steps[j];
    xp[j] = x[j] + h;
    residuals(xp, {rp.data(), n_residuals});
    xp[j] = x[j] - h;
    residuals(xp, {rm.data(), n_residuals});
    xp[j] = x[j];
    jac.col(static_cast<Eigen::Index>(j)) = (rp - rm) / (2.0 * h);
  }
  return jac;
}

namespace {

// Residuals in normalized variables u = (x - origin) / scale, which keeps every
// coordinate O(1) for the solver. The Jacobian is a scale-aware central difference.
class ResidualCost final : public ceres::CostFunction {
 public:
  ResidualCost(const ResidualFn& fn, std::size_t m, std::vector<double> origin, std::vector<double> scale)
      : fn_(fn), m_(m), origin_(std::move(origin)), scale_(std::move(scale)) {
    set_num_residuals(static_cast<int>(m));
    mutable_parameter_block_sizes()->push_back(static_cast<int>(origin_.size()));
  }

  std::vector<double> to_x(const double* u) const {
    std::vector<double> x(origin_.size());
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = origin_[j] + scale_[j] * u[j];
    return x;
  }

  bool Evaluate(double const* const* params, double* res, double** jac) const override {
    const auto x = to_x(params[0]);
    fn_(x, {res, m_});
    for (std::size_t i = 0; i < m_; ++i)
      if (!std::isfinite(res[i])) return false;
    if (jac != nullptr && jac[0] != nullptr) {
      const std::size_t n = x.size();
      std::vector<double> steps(n);
      for (std::size_t j = 0; j < n; ++j) steps[j] = 1e-7 * std::max(std::abs(x[j]), scale_[j]);
      Eigen::MatrixXd j = numeric_jacobian(fn_, m_, x, steps);
      if (!j.allFinite()) return false;
      for (std::size_t c = 0; c < n; ++c) j.col(static_cast<Eigen::Index>(c)) *= scale_[c];
      Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          jac[0], static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(n)) = j;
    }
    return true;
  }

 private:
  const ResidualFn& fn_;
  std::size_t m_;
  std::vector<double> origin_;
  std::vector<double> scale_;
};

}  // namespace

Result minimize(const ResidualFn& residuals, std::size_t n_residuals, std::vector<double> x0,
                const Bounds& bounds, const Options& options) {
  const std::size_t n = x0.size();
  if (n == 0) throw FitError("least squares: no parameters");
  if (n_residuals < n) throw FitError("least squares: fewer residuals than parameters");

  std::vector<double> scale = options.scale;
  if (scale.empty()) {
    scale.resize(n);
    for (std::size_t j = 0; j < n; ++j) scale[j] = x0[j] != 0.0 ? std::abs(x0[j]) : 1.0;
  }

  project(x0, bounds);
  std::vector<double> x = x0;
  const auto m = static_cast<Eigen::Index>(n_residuals);
  Eigen::VectorXd r(m);
  residuals(x, {r.data(), n_residuals});
  if (!r.allFinite()) throw FitError("least squares: non-finite residuals at start point");

  Result out;
  out.initial_residual_norm = r.norm();

  ceres::Problem::Options problem_options;
  problem_options.cost_function_ownership = ceres::DO_NOT_TAKE_OWNERSHIP;
  ceres::Problem problem(problem_options);
  ResidualCost cost_fn(residuals, n_residuals, x0, scale);
  std::vector<double> u(n, 0.0);
  problem.AddResidualBlock(&cost_fn, nullptr, u.data());
  for (std::size_t j = 0; j < n; ++j) {
    const int jj = static_cast<int>(j);
    if (!bounds.lower.empty() && std::isfinite(bounds.lower[j]))
      problem.SetParameterLowerBound(u.data(), jj, (bounds.lower[j] - x0[j]) / scale[j]);
    if (!bounds.upper.empty() && std::isfinite(bounds.upper[j]))
      problem.SetParameterUpperBound(u.data(), jj, (bounds.upper[j] - x0[j]) / scale[j]);
  }

  ceres::Solver::Options so;
  so.minimizer_type = ceres::TRUST_REGION;
  so.trust_region_strategy_type = ceres::LEVENBERG_MARQUARDT;
  so.linear_solver_type = ceres::DENSE_QR;
  so.max_num_iterations = options.max_iterations;
  so.function_tolerance = options.ftol;
  so.parameter_tolerance = options.xtol;
  so.gradient_tolerance = 0.0;
  so.initial_trust_region_radius = 1.0 / options.initial_damping;
  so.logging_type = ceres::SILENT;
  so.minimizer_progress_to_stdout = false;
  so.num_threads = 1;
  ceres::Solver::Summary summary;
  ceres::Solve(so, &problem, &summary);
  x = cost_fn.to_x(u.data());
  project(x, bounds);

  residuals(x, {r.data(), n_residuals});
  double cost = r.squaredNorm();
  if (!r.allFinite() || cost > out.initial_residual_norm * out.initial_residual_norm) {
    x = x0;
    residuals(x, {r.data(), n_residuals});
    cost = r.squaredNorm();
  }
  out.converged = summary.termination_type == ceres::CONVERGENCE;
  out.iterations = std::max(static_cast<int>(summary.iterations.size()) - 1, 0);
  out.params = x;
  out.residual_norm = std::sqrt(cost);

  std::vector<double> steps(n);
  for (std::size_t j = 0; j < n; ++j) steps[j] = 1e-7 * std::max(std::abs(x[j]), scale[j]);
  const Eigen::MatrixXd jac = numeric_jacobian(residuals, n_residuals, x, steps);
  const double dof = static_cast<double>(n_residuals) - static_cast<double>(n);
  const double sigma2 = dof > 0 ? cost / dof : 0.0;
  // Pseudo-inverse in scaled variables, mapped back.
  Eigen::VectorXd d(static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) d(static_cast<Eigen::Index>(j)) = scale[j];
  const Eigen::MatrixXd js = jac * d.asDiagonal();
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(js.transpose() * js);
  out.covariance = d.asDiagonal() * cod.pseudoInverse() * d.asDiagonal() * sigma2;
  out.std_errors.resize(n);
  out.at_bound.assign(n, false);
  for (std::size_t j = 0; j < n; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    out.std_errors[j] = std::sqrt(std::max(out.covariance(jj, jj), 0.0));
    // Bounds are applied in normalized variables, so allow rounding at the edge.
    const double slack = 1e-9 * scale[j];
    const bool lo = !bounds.lower.empty() && x[j] <= bounds.lower[j] + slack;
    const bool hi = !bounds.upper.empty() && x[j] >= bounds.upper[j] - slack;
    out.at_bound[j] = lo || hi;
  }
  return out;
}

}  // namespace qnl::lsq

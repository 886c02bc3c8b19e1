#ifndef QDBLINK_LEAST_SQUARES_HPP
#define QDBLINK_LEAST_SQUARES_HPP

#include <Eigen/Dense>
#include <unsupported/Eigen/LevenbergMarquardt>

#include <utility>

#include "qdblink/error.hpp"

namespace qdb {

struct LeastSquaresOptions {
  int max_iterations = 200;
  double step_tolerance = 1e-9;  // relative to the parameter norm
};

struct LeastSquaresResult {
  Eigen::VectorXd parameters;
  Eigen::VectorXd residuals;  // weighted: (model - data) / sigma
  Eigen::MatrixXd jacobian;   // of the weighted residuals
  double chi2 = 0.0;
  int iterations = 0;
  bool converged = false;

  int dof() const { return static_cast<int>(residuals.size() - parameters.size()); }

  /// (J^T J)^-1 at the minimizer; throws NumericalError when singular.
  Eigen::MatrixXd covariance() const {
    const Eigen::MatrixXd jtj = jacobian.transpose() * jacobian;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jtj);
    if (!lu.isInvertible()) throw NumericalError("fit covariance is singular");
    return lu.inverse();
  }
};

namespace detail {

template <typename Residual>
struct LmFunctor : Eigen::DenseFunctor<double> {
  LmFunctor(Residual& f, int n, int m) : Eigen::DenseFunctor<double>(n, m), fn(f) {}
  int operator()(const Eigen::VectorXd& p, Eigen::VectorXd& r) const {
    fn(p, r, nullptr);
    return 0;
  }
  int df(const Eigen::VectorXd& p, Eigen::MatrixXd& jac) const {
    Eigen::VectorXd r(values());
    fn(p, r, &jac);
    return 0;
  }
  Residual& fn;
};

}  // namespace detail

/// Damped least squares (MINPACK-style Levenberg-Marquardt). `fn(p, r, J)`
/// fills the weighted residual vector r and, when J is non-null, its Jacobian.
template <typename Residual>
LeastSquaresResult damped_least_squares(Residual fn, Eigen::VectorXd initial, int n_residuals,
                                        const LeastSquaresOptions& options = {}) {
  const auto n = static_cast<int>(initial.size());
  if (n_residuals < n) throw ValidationError("fit needs at least as many points as parameters");
  detail::LmFunctor<Residual> functor(fn, n, n_residuals);
  Eigen::LevenbergMarquardt<detail::LmFunctor<Residual>> lm(functor);
  lm.setXtol(options.step_tolerance);
  lm.setFtol(1e-14);
  lm.setGtol(0.0);
  lm.setMaxfev(100 * (options.max_iterations + 1));

  LeastSquaresResult out;
  Eigen::VectorXd x = std::move(initial);
  auto status = lm.minimizeInit(x);
  if (status == Eigen::LevenbergMarquardtSpace::ImproperInputParameters) {
    throw ValidationError("fit received improper input parameters");
  }
  int it = 0;
  status = Eigen::LevenbergMarquardtSpace::Running;
  while (status == Eigen::LevenbergMarquardtSpace::Running && it < options.max_iterations) {
    status = lm.minimizeOneStep(x);
    ++it;
  }
  out.converged = status != Eigen::LevenbergMarquardtSpace::Running &&
                  status != Eigen::LevenbergMarquardtSpace::TooManyFunctionEvaluation &&
                  status != Eigen::LevenbergMarquardtSpace::ImproperInputParameters &&
                  status != Eigen::LevenbergMarquardtSpace::UserAsked;
  out.iterations = it;
  out.residuals.resize(n_residuals);
  out.jacobian.resize(n_residuals, n);
  fn(x, out.residuals, &out.jacobian);
  out.chi2 = out.residuals.squaredNorm();
  out.parameters = std::move(x);
  return out;
}

}  // namespace qdb

#endif  // QDBLINK_LEAST_SQUARES_HPP

#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "skynav/error.hpp"
#include "skynav/gnss.hpp"

namespace skynav::detail {

struct LeastSquaresSummary {
  int iterations{0};
  double initial_cost{0};
  double final_cost{0};
  Eigen::MatrixXd normal;  // J^T W J at the solution
};

/// Largest / smallest eigenvalue of the Jacobi-scaled normal matrix, so the
/// test does not depend on the units of individual unknowns.
inline double scaled_condition(const Eigen::MatrixXd& normal) {
  const Eigen::VectorXd d = normal.diagonal();
  if ((d.array() <= 0.0).any()) return std::numeric_limits<double>::infinity();
  const Eigen::VectorXd s = d.cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd scaled = s.asDiagonal() * normal * s.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scaled, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

/// Levenberg-damped Gauss-Newton on a weighted residual vector r = z - h(x).
///
/// `problem.evaluate(x, r, J)` fills residuals and the Jacobian of h;
/// `problem.weights()` holds the diagonal weights; `problem.step_norm(dx)`
/// measures the step used for the convergence test. The damping starts at
/// options.initial_damping, is multiplied by damping_factor after a rejected
/// step and divided by it after an accepted one.
template <typename Problem>
LeastSquaresSummary damped_gauss_newton(Problem& problem, Eigen::VectorXd& x, const SolverOptions& options) {
  const Eigen::VectorXd& w = problem.weights();
  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  problem.evaluate(x, r, jac);
  double cost = r.dot(w.cwiseProduct(r));

  LeastSquaresSummary summary;
  summary.initial_cost = cost;
  double lambda = options.initial_damping;
  bool converged = false;
  double last_step = std::numeric_limits<double>::infinity();

  for (int it = 1; it <= options.max_iterations; ++it) {
    summary.iterations = it;
    const Eigen::MatrixXd normal = jac.transpose() * w.asDiagonal() * jac;
    if (scaled_condition(normal) > options.max_condition) {
      throw Error(ErrorCode::SingularGeometry, "normal matrix is ill-conditioned");
    }
    const Eigen::VectorXd gradient = jac.transpose() * w.cwiseProduct(r);
    Eigen::MatrixXd damped = normal;
    damped.diagonal() *= (1.0 + lambda);
    const Eigen::VectorXd dx = damped.ldlt().solve(gradient);
    const double step = problem.step_norm(dx);

    Eigen::VectorXd x_new = x + dx;
    Eigen::VectorXd r_new;
    Eigen::MatrixXd jac_new;
    problem.evaluate(x_new, r_new, jac_new);
    const double cost_new = r_new.dot(w.cwiseProduct(r_new));

    if (std::isfinite(cost_new) && cost_new <= cost) {
      x = std::move(x_new);
      r = std::move(r_new);
      jac = std::move(jac_new);
      cost = cost_new;
      lambda /= options.damping_factor;
    } else {
      lambda *= options.damping_factor;
    }
    last_step = step;
    // A rejected step this small means the cost cannot be lowered further.
    if (step < options.step_tolerance) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw Error(ErrorCode::Diverged, "no convergence within " + std::to_string(options.max_iterations) +
                                         " iterations (last step " + std::to_string(last_step) + ")");
  }
  summary.final_cost = cost;
  summary.normal = jac.transpose() * w.asDiagonal() * jac;
  return summary;
}

}  // namespace skynav::detail

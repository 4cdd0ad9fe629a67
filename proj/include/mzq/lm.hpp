#pragma once

// Damped least squares (Levenberg-Marquardt) for small dense problems.

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace mzq {

struct LmProblem {
  // Fills r (resized by the callee) for the parameter vector p. Throwing
  // Error(DegenerateScatterer) or returning non-finite residuals rejects the
  // trial point.
  std::function<void(const Eigen::VectorXd& p, Eigen::VectorXd& r)> residuals;
  Eigen::VectorXd lower;  // box bounds, may be +-inf
  Eigen::VectorXd upper;
  Eigen::VectorXd scale;  // typical magnitudes for finite-difference steps
};

struct LmOptions {
  int max_iterations = 200;
  double rel_tolerance = 1e-10;  // on the objective change per accepted step
  double rel_step = 1e-6;        // finite-difference step
  double abs_tolerance = 0.0;    // stop once the objective falls below this
};

struct LmResult {
  Eigen::VectorXd p;
  Eigen::VectorXd r;
  Eigen::MatrixXd jacobian;
  double sse = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string message;
  std::vector<double> sse_history;  // objective after each accepted step
};

// Throws BadInitialization when the residuals at p0 are not finite.
LmResult lm_solve(const LmProblem& prob, Eigen::VectorXd p0, const LmOptions& opt = {});

Eigen::MatrixXd numeric_jacobian(const LmProblem& prob, const Eigen::VectorXd& p,
                                 const Eigen::VectorXd& r0, double rel_step);

// s^2 (J^T J)^-1 with s^2 = sse / dof. Entries are +inf when J is rank
// deficient or dof is 0.
Eigen::MatrixXd lm_covariance(const Eigen::MatrixXd& jacobian, double sse, std::size_t dof);

// Two-sided 95% Student-t quantile.
double student_t95(std::size_t dof);
// One-sided 95% quantile.
double student_t95_one_sided(std::size_t dof);

}  // namespace mzq

#include "mzq/lm.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>

#include "mzq/error.hpp"

namespace mzq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd clamp(const LmProblem& prob, Eigen::VectorXd p) {
  for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = std::clamp(p[i], prob.lower[i], prob.upper[i]);
  return p;
}

// Sum of squares, or +inf for a rejected point.
double evaluate(const LmProblem& prob, const Eigen::VectorXd& p, Eigen::VectorXd& r) {
  try {
    prob.residuals(p, r);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DegenerateScatterer && e.code() != ErrorCode::SingularSystem) throw;
    return kInf;
  }
  if (!r.allFinite()) return kInf;
  return r.squaredNorm();
}

double quantile(std::size_t dof, double p) {
  if (dof == 0) return kInf;
  boost::math::students_t dist(static_cast<double>(dof));
  return boost::math::quantile(dist, p);
}

// Damped step with parameters that sit on a bound and push outward held
// fixed; any remaining overshoot is clamped.
Eigen::VectorXd bounded_step(const LmProblem& prob, const Eigen::VectorXd& p, const Eigen::MatrixXd& a,
                             const Eigen::VectorXd& g, const Eigen::VectorXd& d, double lambda) {
  const Eigen::Index n = p.size();
  std::vector<bool> fixed(static_cast<std::size_t>(n), false);
  Eigen::VectorXd step = Eigen::VectorXd::Zero(n);
  for (Eigen::Index round = 0; round <= n; ++round) {
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!fixed[static_cast<std::size_t>(i)]) free.push_back(i);
    }
    step.setZero();
    if (free.empty()) break;
    const auto k = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd m(k, k);
    Eigen::VectorXd rhs(k);
    // Solved in units of the parameter scales to keep the system balanced.
    for (Eigen::Index r = 0; r < k; ++r) {
      const double sr = prob.scale[free[r]];
      for (Eigen::Index c = 0; c < k; ++c) m(r, c) = a(free[r], free[c]) * sr * prob.scale[free[c]];
      m(r, r) += lambda * d[free[r]] * sr * sr;
      rhs[r] = -g[free[r]] * sr;
    }
    Eigen::VectorXd x = m.completeOrthogonalDecomposition().solve(rhs);
    for (Eigen::Index r = 0; r < k; ++r) x[r] *= prob.scale[free[r]];
    bool changed = false;
    for (Eigen::Index r = 0; r < k; ++r) {
      const Eigen::Index i = free[r];
      step[i] = x[r];
      const bool push_low = p[i] <= prob.lower[i] && x[r] < 0.0;
      const bool push_high = p[i] >= prob.upper[i] && x[r] > 0.0;
      if (push_low || push_high) {
        fixed[static_cast<std::size_t>(i)] = true;
        changed = true;
      }
    }
    if (!changed) break;
  }
  // Shorten the whole step so it stays inside the box.
  double t = 1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (step[i] < 0.0 && p[i] + step[i] < prob.lower[i]) t = std::min(t, (prob.lower[i] - p[i]) / step[i]);
    if (step[i] > 0.0 && p[i] + step[i] > prob.upper[i]) t = std::min(t, (prob.upper[i] - p[i]) / step[i]);
  }
  return clamp(prob, p + t * step) - p;
}

}  // namespace

double student_t95(std::size_t dof) { return quantile(dof, 0.975); }
double student_t95_one_sided(std::size_t dof) { return quantile(dof, 0.95); }

Eigen::MatrixXd numeric_jacobian(const LmProblem& prob, const Eigen::VectorXd& p,
                                 const Eigen::VectorXd& r0, double rel_step) {
  const Eigen::Index n = p.size();
  Eigen::MatrixXd jac(r0.size(), n);
  Eigen::VectorXd r;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double h = rel_step * std::max(std::abs(p[i]), prob.scale[i]);
    bool done = false;
    for (double dir : {1.0, -1.0}) {
      Eigen::VectorXd q = p;
      q[i] = p[i] + dir * h;
      if (q[i] > prob.upper[i] || q[i] < prob.lower[i]) continue;
      if (!std::isfinite(evaluate(prob, q, r)) || r.size() != r0.size()) continue;
      jac.col(i) = (r - r0) / (q[i] - p[i]);
      done = true;
      break;
    }
    if (!done) jac.col(i).setZero();
  }
  return jac;
}

LmResult lm_solve(const LmProblem& prob, Eigen::VectorXd p0, const LmOptions& opt) {
  const Eigen::Index n = p0.size();
  if (prob.lower.size() != n || prob.upper.size() != n || prob.scale.size() != n) {
    fail(ErrorCode::InvalidArgument, "lm_solve: bounds and scales must match the parameter count");
  }
  LmResult res;
  res.p = clamp(prob, std::move(p0));
  res.sse = evaluate(prob, res.p, res.r);
  if (!std::isfinite(res.sse)) {
    fail(ErrorCode::BadInitialization, "residuals are not finite at the initial parameters");
  }
  if (res.r.size() < n) fail(ErrorCode::IllPosed, "fewer residuals than parameters");

  const double sse_start = res.sse;
  double lambda = -1.0;
  double nu = 2.0;
  Eigen::VectorXd r_trial;
  while (true) {
    if (res.sse <= opt.abs_tolerance) {
      res.converged = true;
      res.message = "objective below absolute tolerance";
      break;
    }
    if (res.iterations >= opt.max_iterations) {
      res.message = "iteration cap reached";
      break;
    }
    res.jacobian = numeric_jacobian(prob, res.p, res.r, opt.rel_step);
    const Eigen::MatrixXd a = res.jacobian.transpose() * res.jacobian;
    const Eigen::VectorXd g = res.jacobian.transpose() * res.r;
    Eigen::VectorXd d = a.diagonal();
    const double dmax = (d.array() * prob.scale.array().square()).maxCoeff();
    if (!(dmax > 0.0)) {
      res.message = "jacobian vanishes";
      break;
    }
    d = d.cwiseMax(1e-12 * dmax * prob.scale.array().square().inverse().matrix());
    if (lambda < 0.0) lambda = 1e-3;

    int stall = 0;  // 1: no predicted gain left, 2: damping blew up
    const Eigen::VectorXd gn_step = bounded_step(prob, res.p, a, g, d, 1e-12);
    {
      const double predicted = res.sse - (res.r + res.jacobian * gn_step).squaredNorm();
      // Converged once even the undamped step would change the objective by
      // less than the relative tolerance.
      if (predicted >= 0.0 && predicted <= opt.rel_tolerance * res.sse) stall = 1;
    }
    bool accepted = stall != 0;
    while (!accepted) {
      const Eigen::VectorXd delta = bounded_step(prob, res.p, a, g, d, lambda);
      const Eigen::VectorXd trial = res.p + delta;
      const double predicted = res.sse - (res.r + res.jacobian * delta).squaredNorm();
      const double sse_trial = predicted > 0.0 ? evaluate(prob, trial, r_trial) : kInf;
      const double actual = res.sse - sse_trial;
      if (predicted > 0.0 && actual > 0.0 && std::isfinite(sse_trial)) {
        const double rho = actual / predicted;
        lambda *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
        nu = 2.0;
        res.p = trial;
        res.r = r_trial;
        res.sse = sse_trial;
        res.sse_history.push_back(sse_trial);
        ++res.iterations;
        accepted = true;
      } else {
        lambda *= nu;
        nu *= 2.0;
        if (lambda > 1e20) {
          stall = 2;
          break;
        }
      }
    }
    if (stall == 2 && res.sse <= 1e-20 * sse_start) {
      res.converged = true;
      res.message = "objective at rounding level";
      break;
    }
    if (stall == 2 && ((gn_step.array().abs() <= 1e-8 * res.p.array().abs().max(prob.scale.array()))).all()) {
      res.converged = true;
      res.message = "step below parameter resolution";
      break;
    }
    if (stall != 0) {
      res.converged = stall == 1;
      res.message = stall == 1 ? "relative objective change below tolerance" : "stalled step";
      break;
    }
    if (res.converged) break;
  }
  res.jacobian = numeric_jacobian(prob, res.p, res.r, opt.rel_step);
  return res;
}

Eigen::MatrixXd lm_covariance(const Eigen::MatrixXd& jacobian, double sse, std::size_t dof) {
  const Eigen::Index n = jacobian.cols();
  const Eigen::MatrixXd inf = Eigen::MatrixXd::Constant(n, n, kInf);
  if (dof == 0) return inf;
  Eigen::VectorXd norms = jacobian.colwise().norm();
  if ((norms.array() <= 0.0).any()) return inf;
  const Eigen::MatrixXd scaled = jacobian * norms.cwiseInverse().asDiagonal();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(scaled, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (!(sv[n - 1] > 1e-10 * sv[0])) return inf;
  const Eigen::MatrixXd vs = svd.matrixV() * sv.cwiseInverse().asDiagonal();
  const Eigen::MatrixXd inv_scaled = vs * vs.transpose();
  const double s2 = sse / static_cast<double>(dof);
  return s2 * norms.cwiseInverse().asDiagonal() * inv_scaled * norms.cwiseInverse().asDiagonal();
}

}  // namespace mzq

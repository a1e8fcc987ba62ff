#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "ensemble/errors.hpp"
#include "ensemble/gramian.hpp"
#include "ensemble/system.hpp"
#include "ensemble/targets.hpp"
#include "ensemble/time_grid.hpp"

namespace ensemble {

// Stacked moment data F_N = (f(theta_1), ..., f(theta_N)) in R^{Nn}.
struct MomentVector {
  MomentGrid moments;
  Eigen::VectorXd values;  // N * n, block k holds f(theta_k)

  MomentVector(MomentGrid m, Eigen::VectorXd v) : moments(std::move(m)), values(std::move(v)) {
    if (values.size() % moments.N() != 0)
      throw InvalidInputError("moment vector length must be a multiple of the moment count");
    if (!values.allFinite()) throw InvalidInputError("moment vector must be finite");
  }

  int block_dim() const { return static_cast<int>(values.size()) / moments.N(); }
  Eigen::VectorXd block(int k) const { return values.segment(k * block_dim(), block_dim()); }
};

inline MomentVector moment_vector(const EnsembleSystem& system, const TargetProfile& f,
                                  const MomentGrid& moments) {
  Eigen::VectorXd F(moments.N() * system.n());
  for (int k = 0; k < moments.N(); ++k)
    F.segment(k * system.n(), system.n()) = f.evaluate(system, moments[k]);
  return MomentVector(moments, std::move(F));
}

// Output of the moment-collocation solve: coefficients alpha with
// Q alpha = F_N and the reconstructed input u(s) = sum_k B_k^T e^{A_k^T(T-s)} alpha_k.
struct CollocationSolution {
  Eigen::VectorXd alpha;  // N * n
  InputSignal input;
  MomentGrid moments;
  double residual = 0.0;  // ||Q alpha - F|| / ||F|| against the unshifted Q
  bool residual_warning = false;
  double condition_estimate = 0.0;
  double tikhonov_lambda = 0.0;
};

inline constexpr double kResidualWarningThreshold = 1e-6;

inline CollocationSolution solve_collocation(const EnsembleSystem& system,
                                             const MomentVector& F, const TimeGrid& grid,
                                             double tikhonov_lambda = 0.0) {
  if (F.block_dim() != system.n())
    throw InvalidInputError("moment vector block dimension does not match system state dimension");
  const BlockGramian Q(system, F.moments, grid, tikhonov_lambda);
  const Eigen::VectorXd alpha = Q.solve(F.values);

  const double fnorm = F.values.norm();
  const double residual = fnorm > 0.0 ? (Q.matrix() * alpha - F.values).norm() / fnorm : 0.0;

  // u_N = sum_k R_k^* alpha_k, sampled on the grid.
  Eigen::MatrixXd samples = Eigen::MatrixXd::Zero(system.m(), grid.size());
  for (int k = 0; k < F.moments.N(); ++k) {
    const detail::MomentOperator op(system, F.moments[k], grid);
    samples += op.adjoint(alpha.segment(k * system.n(), system.n()));
  }

  CollocationSolution sol{alpha,
                          InputSignal(grid, std::move(samples)),
                          F.moments,
                          residual,
                          residual > kResidualWarningThreshold,
                          Q.condition_estimate(),
                          tikhonov_lambda};
  return sol;
}

inline CollocationSolution solve_collocation(const EnsembleSystem& system, const TargetProfile& f,
                                             const MomentGrid& moments, const TimeGrid& grid,
                                             double tikhonov_lambda = 0.0) {
  return solve_collocation(system, moment_vector(system, f, moments), grid, tikhonov_lambda);
}

// Minimal-norm input steering the single member at theta to target value v:
// u = B^T e^{A^T(T-.)} W^{-1} v. Refuses near-singular Gramians.
inline InputSignal minimal_norm_input(const EnsembleSystem& system, double theta,
                                      const Eigen::VectorXd& v, const TimeGrid& grid) {
  if (v.size() != system.n()) throw InvalidInputError("target value dimension mismatch");
  const detail::MomentOperator op(system, theta, grid);
  const Eigen::MatrixXd W = op.gramian();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(W, Eigen::EigenvaluesOnly);
  const double eig_min = es.eigenvalues().minCoeff();
  const double eig_max = es.eigenvalues().maxCoeff();
  if (!(eig_min > system.n() * std::numeric_limits<double>::epsilon() * std::max(eig_max, 0.0)))
    throw NotControllableAtMomentError("controllability Gramian at theta = " +
                                       std::to_string(theta) + " is singular to working precision");
  Eigen::LLT<Eigen::MatrixXd> llt(W);
  Eigen::VectorXd gamma = llt.solve(v);
  gamma += llt.solve(v - W * gamma);
  return InputSignal(grid, op.adjoint(gamma));
}

}  // namespace ensemble

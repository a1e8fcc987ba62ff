#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <utility>
#include <vector>

#include "ensemble/collocation.hpp"
#include "ensemble/errors.hpp"
#include "ensemble/gramian.hpp"
#include "ensemble/system.hpp"
#include "ensemble/targets.hpp"
#include "ensemble/time_grid.hpp"

namespace ensemble {

// Equispaced evaluation grid on the parameter interval, endpoints included.
inline std::vector<double> evaluation_grid(const ParameterInterval& interval, int eval_points) {
  if (eval_points < 2) throw InvalidInputError("evaluation grid needs >= 2 points");
  std::vector<double> pts(eval_points);
  for (int i = 0; i < eval_points; ++i)
    pts[i] = interval.lo + interval.length() * static_cast<double>(i) / (eval_points - 1);
  pts.back() = interval.hi;
  return pts;
}

// theta -> ||(R u)(theta) - f(theta)|| sampled over the evaluation points.
inline std::vector<std::pair<double, double>> error_curve(const EnsembleSystem& system,
                                                          const InputSignal& u,
                                                          const TargetProfile& f,
                                                          const std::vector<double>& eval_points) {
  std::vector<std::pair<double, double>> curve;
  curve.reserve(eval_points.size());
  for (double theta : eval_points) {
    const double err = (reachability_apply(system, u, theta) - f.evaluate(system, theta)).norm();
    curve.emplace_back(theta, err);
  }
  return curve;
}

struct SupError {
  double value = 0.0;
  double argmax = 0.0;
};

// Sup-norm steering error over an equispaced evaluation grid.
inline SupError sup_error(const EnsembleSystem& system, const InputSignal& u,
                          const TargetProfile& f, int eval_points = 201) {
  const auto curve = error_curve(system, u, f, evaluation_grid(system.interval(), eval_points));
  SupError best{curve.front().second, curve.front().first};
  for (const auto& [theta, err] : curve)
    if (err > best.value) best = {err, theta};
  return best;
}

struct DeltaMetrics {
  double delta_N = 0.0;    // covering radius sup_theta min_k |theta - theta_k|
  double delta_max = 0.0;  // max consecutive gap (0 when N == 1, see flag)
  bool single_moment = false;
};

inline DeltaMetrics delta_metrics(const MomentGrid& moments, const ParameterInterval& interval) {
  for (int k = 0; k < moments.N(); ++k)
    if (!interval.contains(moments[k]))
      throw DomainError("moment outside the parameter interval");
  DeltaMetrics d;
  d.delta_N = std::max(moments[0] - interval.lo, interval.hi - moments[moments.N() - 1]);
  for (int k = 0; k + 1 < moments.N(); ++k) {
    const double gap = moments[k + 1] - moments[k];
    d.delta_N = std::max(d.delta_N, 0.5 * gap);
    d.delta_max = std::max(d.delta_max, gap);
  }
  d.single_moment = (moments.N() == 1);
  return d;
}

// Sample-based estimates of the constants in the a-priori bound:
//   M_Q    = sup |Q(tau, eta)_ij| over P x P,
//   L_Q    = Lipschitz constant of (tau, eta) -> Q(tau, eta) in the scaled
//            max norm ||M||_{n,inf} = n * max |M_ij|,
//   R_norm = operator norm of the reachability operator R.
struct RateConstants {
  double M_Q = 0.0;
  double L_Q = 0.0;
  double R_norm = 0.0;
  int resolution = 0;
};

inline RateConstants estimate_constants(const EnsembleSystem& system, int resolution = 128,
                                        const TimeGrid& grid_in = TimeGrid{}) {
  if (resolution < 2) throw InvalidInputError("constant estimation needs resolution >= 2");
  const TimeGrid grid =
      grid_in.size() > 0 ? grid_in : TimeGrid::gauss_legendre(system.horizon());
  const int n = system.n();
  const int res = resolution;
  const auto thetas = evaluation_grid(system.interval(), res);

  std::vector<detail::MomentOperator> ops;
  ops.reserve(res);
  for (double theta : thetas) ops.emplace_back(system, theta, grid);

  // Kernel samples Q(theta_i, theta_j) over the res x res grid.
  std::vector<Eigen::MatrixXd> Q(static_cast<size_t>(res) * res);
  for (int i = 0; i < res; ++i)
    for (int j = i; j < res; ++j) {
      Q[i * res + j] = ops[i].cross_gramian(ops[j]);
      if (j != i) Q[j * res + i] = Q[i * res + j].transpose();
    }

  RateConstants c;
  c.resolution = res;
  for (const auto& blk : Q) c.M_Q = std::max(c.M_Q, blk.cwiseAbs().maxCoeff());

  // Max finite-difference quotient over horizontally/vertically adjacent pairs.
  const double h = system.interval().length() / (res - 1);
  for (int i = 0; i < res; ++i)
    for (int j = 0; j < res; ++j) {
      if (i + 1 < res) {
        const double d = n * (Q[(i + 1) * res + j] - Q[i * res + j]).cwiseAbs().maxCoeff();
        c.L_Q = std::max(c.L_Q, d / h);
      }
      if (j + 1 < res) {
        const double d = n * (Q[i * res + j + 1] - Q[i * res + j]).cwiseAbs().maxCoeff();
        c.L_Q = std::max(c.L_Q, d / h);
      }
    }

  // ||R||^2 = largest eigenvalue of R R*, whose kernel is Q. Power iteration
  // on the theta-grid discretization: (R R* v)(theta_i) ~ sum_j w_j Q_ij v_j
  // with trapezoid weights, in the weighted inner product <a,b> = a^T W b.
  Eigen::MatrixXd K(res * n, res * n);
  for (int i = 0; i < res; ++i)
    for (int j = 0; j < res; ++j) K.block(i * n, j * n, n, n) = Q[i * res + j];
  Eigen::VectorXd w = Eigen::VectorXd::Constant(res, h);
  w(0) = 0.5 * h;
  w(res - 1) = 0.5 * h;
  Eigen::VectorXd W(res * n);
  for (int i = 0; i < res; ++i) W.segment(i * n, n).setConstant(w(i));

  Eigen::VectorXd v = Eigen::VectorXd::Ones(res * n);
  v /= std::sqrt(v.dot(W.asDiagonal() * v));
  double lambda = 0.0;
  for (int it = 0; it < 20000; ++it) {
    const Eigen::VectorXd Mv = K * (W.asDiagonal() * v);
    const double next = v.dot(W.asDiagonal() * Mv);
    const double norm = std::sqrt(std::max(Mv.dot(W.asDiagonal() * Mv), 0.0));
    if (norm == 0.0) {
      lambda = 0.0;
      break;
    }
    v = Mv / norm;
    if (std::abs(next - lambda) <= 1e-8 * std::max(1.0, std::abs(next))) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  c.R_norm = std::sqrt(std::max(lambda, 0.0));
  return c;
}

// A-priori sup-norm rate bound for moment grids with max gap delta_max:
//   sqrt(delta_max * 3n * (4 M_Q e^{-2/delta_max} + L_Q sqrt(delta_max))) * ||g||.
inline double rate_bound(int n, const RateConstants& consts, double delta_max, double g_norm) {
  if (!(delta_max > 0.0)) throw InvalidInputError("rate_bound requires delta_max > 0");
  if (n < 1 || consts.M_Q < 0.0 || consts.L_Q < 0.0 || g_norm < 0.0)
    throw InvalidInputError("rate_bound requires nonnegative constants");
  const double inner =
      4.0 * consts.M_Q * std::exp(-2.0 / delta_max) + consts.L_Q * std::sqrt(delta_max);
  return std::sqrt(delta_max * 3.0 * n * inner) * g_norm;
}

// Spacing threshold certifying sup-norm accuracy epsilon:
//   epsilon^2 / (||R||^2 ||g||^2 * 3n * (4 M_Q e^{-2/span} + L_Q sqrt(span))).
inline double required_spacing(double epsilon, int n, const RateConstants& consts, double g_norm,
                               double theta_span) {
  if (!(epsilon > 0.0) || !(theta_span > 0.0) || n < 1)
    throw InvalidInputError("required_spacing requires positive inputs");
  if (!(consts.R_norm > 0.0) || !(g_norm > 0.0))
    throw InvalidInputError("required_spacing requires nonzero operator and source norms");
  const double inner =
      4.0 * consts.M_Q * std::exp(-2.0 / theta_span) + consts.L_Q * std::sqrt(theta_span);
  return (epsilon * epsilon) /
         (consts.R_norm * consts.R_norm * g_norm * g_norm * 3.0 * n * inner);
}

// Range-space test problem: f = R R* g tabulated on the evaluation points and
// the representer u* = R* g with f = R u* by construction.
struct OracleTarget {
  TargetProfile f;
  InputSignal u_star;
};

inline OracleTarget oracle_target(const EnsembleSystem& system, const SourceProfile& g,
                                  const std::vector<double>& eval_points, const TimeGrid& grid) {
  TargetProfile kernel = TargetProfile::kernel_generated(g);
  const InputSignal& u_star = kernel.kernel_input(system, grid);
  Eigen::MatrixXd values(system.n(), static_cast<Eigen::Index>(eval_points.size()));
  for (size_t i = 0; i < eval_points.size(); ++i)
    values.col(static_cast<Eigen::Index>(i)) = reachability_apply(system, u_star, eval_points[i]);
  return OracleTarget{TargetProfile::tabulated(eval_points, std::move(values)), u_star};
}

inline OracleTarget oracle_target(const EnsembleSystem& system, const SourceProfile& g,
                                  int eval_points = 201) {
  return oracle_target(system, g, evaluation_grid(system.interval(), eval_points),
                       TimeGrid::gauss_legendre(system.horizon()));
}

}  // namespace ensemble

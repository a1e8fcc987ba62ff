#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ensemble/collocation.hpp"
#include "ensemble/errors.hpp"
#include "ensemble/gramian.hpp"
#include "ensemble/system.hpp"
#include "ensemble/time_grid.hpp"

namespace ensemble {

// Step-size schedule eta(t) = c / (1 + t)^p: positive, nonincreasing, C^1,
// vanishing at infinity and non-integrable (p <= 1).
struct EtaSchedule {
  double c = 1.0;
  double p = 1.0;

  EtaSchedule() = default;
  EtaSchedule(double c_in, double p_in) : c(c_in), p(p_in) {
    if (!(c > 0.0) || !std::isfinite(c)) throw InvalidInputError("eta schedule requires c > 0");
    if (!(p > 0.0 && p <= 1.0)) throw InvalidInputError("eta schedule requires p in (0, 1]");
  }

  double operator()(double t) const { return c / std::pow(1.0 + t, p); }
};

// Snapshot of the N-agent state with residuals recomputed on demand.
struct FlowState {
  std::vector<InputSignal> agents;
  double time = 0.0;
  Eigen::VectorXd residuals;  // ||R_k u_k - f_k|| per agent
};

struct FlowSample {
  double t = 0.0;
  double V = 0.0;  // 1/2 sum_k ||R_k u_k - f_k||^2
  double max_residual = 0.0;
  double spread = 0.0;  // max_{i,j} ||u_i - u_j||_{L^2}
};

struct FlowReport {
  std::vector<FlowSample> samples;
  InputSignal final_input;
  std::vector<InputSignal> final_agents;
  bool converged = false;
  long iterations = 0;  // RK4 steps taken
  // Max ||mean(u) - z||_{L^2} over logged samples when the averaging flow runs
  // its agent-level debug integration alongside the mean ODE.
  std::optional<double> debug_mean_mismatch;
};

namespace detail {

// Discretized operators at the moments, acting on flattened sample vectors
// (column-major m x M -> length D = m*M):
//   R_k u  = G[k] * u,     R_k^* v = E[k]^T * v,     W_k = G[k] * E[k]^T.
struct FlowWorkspace {
  int N, n, m, M, D;
  TimeGrid grid;
  Eigen::VectorXd wdiag;  // quadrature weight per flattened sample
  std::vector<Eigen::MatrixXd> E;
  std::vector<Eigen::MatrixXd> G;
  std::vector<Eigen::MatrixXd> Wmat;
  std::vector<Eigen::LLT<Eigen::MatrixXd>> Wllt;
  Eigen::MatrixXd F;  // n x N target blocks

  FlowWorkspace(const EnsembleSystem& system, const MomentGrid& moments, const MomentVector& Fvec,
                const TimeGrid& g)
      : N(moments.N()), n(system.n()), m(system.m()), M(g.size()), D(system.m() * g.size()),
        grid(g) {
    if (Fvec.block_dim() != n)
      throw InvalidInputError("moment vector block dimension does not match system");
    if (Fvec.moments.N() != N)
      throw InvalidInputError("moment vector does not match the moment grid");
    for (int k = 0; k < N; ++k)
      if (Fvec.moments[k] != moments[k])
        throw InvalidInputError("moment vector was built on a different moment grid");

    wdiag.resize(D);
    for (int j = 0; j < M; ++j) wdiag.segment(j * m, m).setConstant(grid.weights(j));

    F.resize(n, N);
    E.reserve(N);
    G.reserve(N);
    Wmat.reserve(N);
    Wllt.reserve(N);
    for (int k = 0; k < N; ++k) {
      const MomentOperator op(system, moments[k], grid);
      E.push_back(op.E);
      G.push_back(op.E * wdiag.asDiagonal());
      Wmat.push_back(op.gramian());
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Wmat.back(), Eigen::EigenvaluesOnly);
      const double eig_min = es.eigenvalues().minCoeff();
      const double eig_max = es.eigenvalues().maxCoeff();
      if (!(eig_min > n * std::numeric_limits<double>::epsilon() * std::max(eig_max, 0.0)))
        throw NotControllableAtMomentError("controllability Gramian at theta = " +
                                           std::to_string(moments[k]) +
                                           " is singular to working precision");
      Wllt.emplace_back(Wmat.back());
      F.col(k) = Fvec.block(k);
    }
  }

  Eigen::VectorXd winv(int k, const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd x = Wllt[k].solve(rhs);
    x += Wllt[k].solve(rhs - Wmat[k] * x);
    return x;
  }

  // Moment input u_k = R_k^* W_k^{-1} f_k, flattened.
  Eigen::VectorXd moment_input(int k) const { return E[k].transpose() * winv(k, F.col(k)); }

  double residual(int k, const Eigen::VectorXd& u) const { return (G[k] * u - F.col(k)).norm(); }

  double l2_dist(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    const Eigen::VectorXd d = a - b;
    return std::sqrt(std::max(0.0, d.dot(wdiag.cwiseProduct(d))));
  }

  // (1/N) sum_k R_k^*(R_k u_k - f_k), the gradient term common to all agents.
  Eigen::VectorXd common_gradient(const Eigen::MatrixXd& U) const {
    Eigen::VectorXd gc = Eigen::VectorXd::Zero(D);
    for (int k = 0; k < N; ++k) gc.noalias() += E[k].transpose() * (G[k] * U.col(k) - F.col(k));
    return gc / N;
  }

  // P_{M_i} g = g - R_i^*(W_i^{-1}(R_i g - f_i)), flattened.
  Eigen::VectorXd project(int i, const Eigen::VectorXd& g) const {
    return g - E[i].transpose() * winv(i, G[i] * g - F.col(i));
  }

  InputSignal unflatten(const Eigen::VectorXd& u) const {
    return InputSignal(grid, Eigen::Map<const Eigen::MatrixXd>(u.data(), m, M));
  }

  FlowSample metrics(const Eigen::MatrixXd& U, double t) const {
    FlowSample s;
    s.t = t;
    const bool per_agent = U.cols() == N;
    for (int k = 0; k < N; ++k) {
      const double r = residual(k, per_agent ? U.col(k) : U.col(0));
      s.V += 0.5 * r * r;
      s.max_residual = std::max(s.max_residual, r);
    }
    if (per_agent)
      for (int i = 0; i < N; ++i)
        for (int j = i + 1; j < N; ++j) s.spread = std::max(s.spread, l2_dist(U.col(i), U.col(j)));
    return s;
  }
};

inline constexpr long kMaxFlowSamples = 40000;

// Fixed-step classical RK4 over [0, t_final] with trajectory logging, the
// convergence test evaluated at log points, and a divergence guard.
template <typename RhsFn>
FlowReport run_flow(const FlowWorkspace& ws, Eigen::MatrixXd U, double t_final, double step,
                    double tol, bool spread_in_stop, RhsFn&& rhs) {
  if (!(t_final > 0.0) || !(step > 0.0) || !(tol > 0.0))
    throw InvalidInputError("flow integration requires positive t_final, step, tol");

  const long total = std::max<long>(1, static_cast<long>(std::ceil(t_final / step - 1e-12)));
  const long stride = std::max<long>(1, (total + kMaxFlowSamples - 1) / kMaxFlowSamples);

  FlowReport report;
  const FlowSample first = ws.metrics(U, 0.0);
  report.samples.push_back(first);

  double guard = 0.0;
  for (int k = 0; k < ws.N; ++k) guard = std::max(guard, ws.F.col(k).norm());
  guard = 10.0 * std::max(first.max_residual, guard);

  Eigen::MatrixXd k1, k2, k3, k4;
  for (long i = 0; i < total; ++i) {
    const double t0 = i * step;
    const double h = std::min(step, t_final - t0);
    k1 = rhs(t0, U);
    k2 = rhs(t0 + 0.5 * h, U + (0.5 * h) * k1);
    k3 = rhs(t0 + 0.5 * h, U + (0.5 * h) * k2);
    k4 = rhs(t0 + h, U + h * k3);
    U += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    report.iterations = i + 1;

    const bool last = (i + 1 == total);
    if ((i + 1) % stride != 0 && !last) continue;

    const FlowSample s = ws.metrics(U, std::min((i + 1) * step, t_final));
    report.samples.push_back(s);
    if (!U.allFinite() || (guard > 0.0 && s.max_residual > guard))
      throw DivergenceError("flow diverged at t = " + std::to_string(s.t) +
                            " (max residual " + std::to_string(s.max_residual) +
                            "); reduce the integration step");
    if (s.max_residual < tol && (!spread_in_stop || s.spread < tol)) {
      report.converged = true;
      break;
    }
  }

  if (U.cols() == ws.N) {
    report.final_agents.reserve(ws.N);
    for (int k = 0; k < ws.N; ++k) report.final_agents.push_back(ws.unflatten(U.col(k)));
    report.final_input = ws.unflatten(U.rowwise().mean());
  } else {
    report.final_input = ws.unflatten(U.col(0));
    report.final_agents.push_back(report.final_input);
  }
  return report;
}

}  // namespace detail

// Orthogonal projection onto M_i = {u : R_i u = f_i}:
//   P_{M_i} g = g - R_i^*(W_i^{-1} R_i g) + R_i^*(W_i^{-1} f_i).
inline InputSignal projection_Mi(const EnsembleSystem& system, double theta_i,
                                 const Eigen::VectorXd& f_i, const InputSignal& g) {
  if (f_i.size() != system.n()) throw InvalidInputError("target value dimension mismatch");
  if (g.m() != system.m()) throw InvalidInputError("signal dimension mismatch");
  const detail::MomentOperator op(system, theta_i, g.grid);
  const Eigen::MatrixXd W = op.gramian();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(W, Eigen::EigenvaluesOnly);
  const double eig_min = es.eigenvalues().minCoeff();
  const double eig_max = es.eigenvalues().maxCoeff();
  if (!(eig_min > system.n() * std::numeric_limits<double>::epsilon() * std::max(eig_max, 0.0)))
    throw NotControllableAtMomentError("controllability Gramian at theta = " +
                                       std::to_string(theta_i) +
                                       " is singular to working precision");
  Eigen::LLT<Eigen::MatrixXd> llt(W);
  const Eigen::VectorXd r = op.apply(g.samples) - f_i;
  Eigen::VectorXd y = llt.solve(r);
  y += llt.solve(r - W * y);
  return InputSignal(g.grid, g.samples - op.adjoint(y));
}

// Consensus projection P_C: every agent replaced by the agent average.
inline std::vector<InputSignal> consensus_projection(const std::vector<InputSignal>& agents) {
  if (agents.empty()) throw InvalidInputError("consensus projection needs >= 1 agent");
  Eigen::MatrixXd mean = agents[0].samples;
  for (size_t i = 1; i < agents.size(); ++i) {
    if (!agents[i].grid.same_as(agents[0].grid))
      throw IncompatibleGridError("agents must share one grid");
    mean += agents[i].samples;
  }
  mean /= static_cast<double>(agents.size());
  return std::vector<InputSignal>(agents.size(), InputSignal(agents[0].grid, mean));
}

// Literal per-agent right-hand side of the weak flow,
//   du_i = (1/N) sum_k (u_k - u_i) - (1/N) sum_k (R_k^* R_k u_k - R_k^* f_k),
// provided for consistency checks against the stacked form -u + P_C(u - grad V(u)).
inline std::vector<InputSignal> weak_flow_rhs(const EnsembleSystem& system,
                                              const MomentGrid& moments, const MomentVector& F,
                                              const std::vector<InputSignal>& agents) {
  const int N = moments.N();
  if (static_cast<int>(agents.size()) != N)
    throw InvalidInputError("agent count must match moment count");
  const detail::FlowWorkspace ws(system, moments, F, agents[0].grid);
  Eigen::MatrixXd U(ws.D, N);
  for (int k = 0; k < N; ++k) {
    if (!agents[k].grid.same_as(agents[0].grid))
      throw IncompatibleGridError("agents must share one grid");
    U.col(k) = Eigen::Map<const Eigen::VectorXd>(agents[k].samples.data(), ws.D);
  }
  std::vector<InputSignal> out;
  out.reserve(N);
  for (int i = 0; i < N; ++i) {
    Eigen::VectorXd du = Eigen::VectorXd::Zero(ws.D);
    for (int k = 0; k < N; ++k) {
      du += U.col(k) - U.col(i);
      du -= ws.E[k].transpose() * (ws.G[k] * U.col(k)) - ws.E[k].transpose() * ws.F.col(k);
    }
    out.push_back(ws.unflatten(du / N));
  }
  return out;
}

// Weak consensus flow: agents start at their own moment inputs; converged when
// max residual and consensus spread both drop below tol.
inline FlowReport weak_flow(const EnsembleSystem& system, const MomentGrid& moments,
                            const MomentVector& F, const TimeGrid& grid, double t_final,
                            double step, double tol) {
  const detail::FlowWorkspace ws(system, moments, F, grid);
  Eigen::MatrixXd U(ws.D, ws.N);
  for (int k = 0; k < ws.N; ++k) U.col(k) = ws.moment_input(k);
  auto rhs = [&ws](double, const Eigen::MatrixXd& S) {
    const Eigen::VectorXd drive = S.rowwise().mean() - ws.common_gradient(S);
    return (drive * Eigen::RowVectorXd::Ones(ws.N) - S).eval();
  };
  return detail::run_flow(ws, std::move(U), t_final, step, tol, /*spread_in_stop=*/true, rhs);
}

// Strongly convergent eta-modified flow: all agents start at one common moment
// input (1-based selection index, default the first moment).
inline FlowReport strong_flow(const EnsembleSystem& system, const MomentGrid& moments,
                              const MomentVector& F, const TimeGrid& grid, double t_final,
                              double step, double tol, const EtaSchedule& eta,
                              int start_index = 1) {
  if (start_index < 1 || start_index > moments.N())
    throw InvalidInputError("strong flow start index out of range");
  const detail::FlowWorkspace ws(system, moments, F, grid);
  Eigen::MatrixXd U(ws.D, ws.N);
  const Eigen::VectorXd u0 = ws.moment_input(start_index - 1);
  for (int k = 0; k < ws.N; ++k) U.col(k) = u0;
  auto rhs = [&ws, &eta](double t, const Eigen::MatrixXd& S) {
    const Eigen::VectorXd drive =
        (1.0 - eta(t)) * S.rowwise().mean() - ws.common_gradient(S);
    return (drive * Eigen::RowVectorXd::Ones(ws.N) - S).eval();
  };
  return detail::run_flow(ws, std::move(U), t_final, step, tol, /*spread_in_stop=*/false, rhs);
}

// Projection-consensus averaging flow. The agent mean obeys the closed ODE
//   dz = -sum_k R_k^*(W_k^{-1} R_k z) + sum_k R_k^*(W_k^{-1} f_k),
// which is integrated directly; with debug_agents the full N-agent system
//   du_i = sum_k (P_{M_i} u_k - u_i)
// is integrated alongside and its mean compared against z at every log point.
inline FlowReport averaging_flow(const EnsembleSystem& system, const MomentGrid& moments,
                                 const MomentVector& F, const TimeGrid& grid, double t_final,
                                 double step, double tol, bool debug_agents = false) {
  const detail::FlowWorkspace ws(system, moments, F, grid);
  Eigen::MatrixXd Z(ws.D, 1);
  Z.setZero();
  for (int k = 0; k < ws.N; ++k) Z.col(0) += ws.moment_input(k);
  Z /= static_cast<double>(ws.N);

  auto zrhs = [&ws](double, const Eigen::MatrixXd& S) {
    Eigen::MatrixXd dz = Eigen::MatrixXd::Zero(S.rows(), 1);
    for (int k = 0; k < ws.N; ++k)
      dz.col(0) -= ws.E[k].transpose() * ws.winv(k, ws.G[k] * S.col(0) - ws.F.col(k));
    return dz;
  };

  if (!debug_agents)
    return detail::run_flow(ws, std::move(Z), t_final, step, tol, /*spread_in_stop=*/false, zrhs);

  // Debug mode: stack [z | u_1 ... u_N] into one state and integrate jointly.
  Eigen::MatrixXd S0(ws.D, ws.N + 1);
  S0.col(0) = Z.col(0);
  for (int k = 0; k < ws.N; ++k) S0.col(k + 1) = ws.moment_input(k);
  auto rhs = [&ws, &zrhs](double t, const Eigen::MatrixXd& S) {
    Eigen::MatrixXd dS(S.rows(), S.cols());
    dS.col(0) = zrhs(t, S.leftCols(1)).col(0);
    const Eigen::VectorXd mean = S.rightCols(ws.N).rowwise().mean();
    for (int i = 0; i < ws.N; ++i)
      dS.col(i + 1) = ws.N * (ws.project(i, mean) - S.col(i + 1));
    return dS;
  };

  // Integrate manually so both halves share one trajectory, then report on z.
  const long total = std::max<long>(1, static_cast<long>(std::ceil(t_final / step - 1e-12)));
  const long stride = std::max<long>(1, (total + detail::kMaxFlowSamples - 1) / detail::kMaxFlowSamples);
  Eigen::MatrixXd S = S0;
  FlowReport report;
  report.samples.push_back(ws.metrics(S.leftCols(1), 0.0));
  double mismatch = ws.l2_dist(S.col(0), S.rightCols(ws.N).rowwise().mean());
  double guard = 0.0;
  for (int k = 0; k < ws.N; ++k) guard = std::max(guard, ws.F.col(k).norm());
  guard = 10.0 * std::max(report.samples.front().max_residual, guard);

  Eigen::MatrixXd k1, k2, k3, k4;
  for (long i = 0; i < total; ++i) {
    const double t0 = i * step;
    const double h = std::min(step, t_final - t0);
    k1 = rhs(t0, S);
    k2 = rhs(t0 + 0.5 * h, S + (0.5 * h) * k1);
    k3 = rhs(t0 + 0.5 * h, S + (0.5 * h) * k2);
    k4 = rhs(t0 + h, S + h * k3);
    S += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    report.iterations = i + 1;
    const bool last = (i + 1 == total);
    if ((i + 1) % stride != 0 && !last) continue;
    const FlowSample s = ws.metrics(S.leftCols(1), std::min((i + 1) * step, t_final));
    report.samples.push_back(s);
    mismatch = std::max(mismatch, ws.l2_dist(S.col(0), S.rightCols(ws.N).rowwise().mean()));
    if (!S.allFinite() || (guard > 0.0 && s.max_residual > guard))
      throw DivergenceError("flow diverged at t = " + std::to_string(s.t) +
                            "; reduce the integration step");
    if (s.max_residual < tol) {
      report.converged = true;
      break;
    }
  }
  report.final_input = ws.unflatten(S.col(0));
  report.final_agents.reserve(ws.N);
  for (int k = 0; k < ws.N; ++k) report.final_agents.push_back(ws.unflatten(S.col(k + 1)));
  report.debug_mean_mismatch = mismatch;
  return report;
}

// Recomputes per-agent residuals for a state snapshot.
inline FlowState flow_state(const EnsembleSystem& system, const MomentGrid& moments,
                            const MomentVector& F, std::vector<InputSignal> agents, double time) {
  if (static_cast<int>(agents.size()) != moments.N())
    throw InvalidInputError("agent count must match moment count");
  FlowState st;
  st.time = time;
  st.residuals.resize(moments.N());
  for (int k = 0; k < moments.N(); ++k)
    st.residuals(k) =
        (reachability_apply(system, agents[k], moments[k]) - F.block(k)).norm();
  st.agents = std::move(agents);
  return st;
}

// Symmetric positive-definite square root used in tests of the mean-ODE
// reformulation: returns S with S * S = W^{-1}.
inline Eigen::MatrixXd inverse_gramian_sqrt(const Eigen::MatrixXd& W) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(W);
  if (!(es.eigenvalues().minCoeff() > 0.0))
    throw NotControllableAtMomentError("Gramian is not positive definite");
  return es.eigenvectors() *
         es.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

}  // namespace ensemble

#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "ensemble/errors.hpp"
#include "ensemble/matrix_exp.hpp"
#include "ensemble/system.hpp"
#include "ensemble/time_grid.hpp"

namespace ensemble {

// Ordered moments theta_1 < ... < theta_N inside the parameter interval.
class MomentGrid {
 public:
  explicit MomentGrid(std::vector<double> moments) : moments_(std::move(moments)) {
    if (moments_.empty()) throw InvalidInputError("moment grid must be nonempty");
    for (size_t k = 0; k + 1 < moments_.size(); ++k)
      if (!(moments_[k] < moments_[k + 1]))
        throw InvalidInputError("moments must be strictly ascending");
  }

  // Equidistant moments including both endpoints; a single moment is placed at
  // the interval midpoint.
  static MomentGrid equidistant(const ParameterInterval& interval, int N) {
    if (N < 1) throw InvalidInputError("moment count must be >= 1");
    std::vector<double> m(N);
    if (N == 1) {
      m[0] = interval.midpoint();
    } else {
      const double h = interval.length() / (N - 1);
      for (int k = 0; k < N; ++k) m[k] = interval.lo + k * h;
      m[N - 1] = interval.hi;  // avoid rounding drift at the right endpoint
    }
    return MomentGrid(std::move(m));
  }

  int N() const { return static_cast<int>(moments_.size()); }
  double operator[](int k) const { return moments_[k]; }
  const std::vector<double>& moments() const { return moments_; }

  double delta_max() const {
    double d = 0.0;
    for (size_t k = 0; k + 1 < moments_.size(); ++k)
      d = std::max(d, moments_[k + 1] - moments_[k]);
    return d;
  }

 private:
  std::vector<double> moments_;
};

namespace detail {

// Cached evaluation of the adjoint kernel at one parameter value: the stack of
// E_j = e^{A(theta)(T - s_j)} B(theta) over the grid nodes. Everything in this
// module is a weighted contraction of these stacks:
//   (R u)(theta)       = sum_j w_j E_j u_j
//   (R* v)(s_j)        = E_j^T v
//   W(theta)           = sum_j w_j E_j E_j^T
//   Q(theta, eta)      = sum_j w_j E_j(theta) E_j(eta)^T
struct MomentOperator {
  const int n;
  const int m;
  TimeGrid grid;
  Eigen::MatrixXd E;  // n x (m * grid.size()), column block j is E_j

  MomentOperator(const EnsembleSystem& system, double theta, const TimeGrid& g)
      : n(system.n()), m(system.m()), grid(g), E(system.n(), system.m() * g.size()) {
    const auto [A, B] = eval_system(system, theta);
    const double T = system.horizon();
    for (int j = 0; j < g.size(); ++j)
      E.middleCols(j * m, m) = matrix_exp(A, T - g.nodes(j)) * B;
  }

  Eigen::VectorXd apply(const Eigen::MatrixXd& samples) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    for (int j = 0; j < grid.size(); ++j)
      out.noalias() += grid.weights(j) * (E.middleCols(j * m, m) * samples.col(j));
    return out;
  }

  Eigen::MatrixXd adjoint(const Eigen::VectorXd& v) const {
    Eigen::MatrixXd samples(m, grid.size());
    for (int j = 0; j < grid.size(); ++j)
      samples.col(j).noalias() = E.middleCols(j * m, m).transpose() * v;
    return samples;
  }

  Eigen::MatrixXd gramian() const {
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n, n);
    for (int j = 0; j < grid.size(); ++j) {
      const auto Ej = E.middleCols(j * m, m);
      W.noalias() += grid.weights(j) * (Ej * Ej.transpose());
    }
    return W;
  }

  Eigen::MatrixXd cross_gramian(const MomentOperator& other) const {
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n, other.n);
    for (int j = 0; j < grid.size(); ++j)
      Q.noalias() += grid.weights(j) * (E.middleCols(j * m, m) *
                                        other.E.middleCols(j * other.m, other.m).transpose());
    return Q;
  }
};

}  // namespace detail

// (R u)(theta) = int_0^T e^{A(theta)(T-s)} B(theta) u(s) ds by grid quadrature.
inline Eigen::VectorXd reachability_apply(const EnsembleSystem& system, const InputSignal& u,
                                          double theta) {
  if (std::abs(u.grid.horizon - system.horizon()) > 1e-12 * std::max(1.0, system.horizon()))
    throw IncompatibleGridError("signal grid horizon does not match system horizon");
  if (u.m() != system.m()) throw InvalidInputError("signal dimension does not match system input");
  return detail::MomentOperator(system, theta, u.grid).apply(u.samples);
}

// (R* v)(s) = B(theta)^T e^{A(theta)^T (T-s)} v sampled on the grid.
inline InputSignal adjoint_apply(const EnsembleSystem& system, const Eigen::VectorXd& v,
                                 double theta, const TimeGrid& grid) {
  if (v.size() != system.n()) throw InvalidInputError("adjoint vector dimension mismatch");
  return InputSignal(grid, detail::MomentOperator(system, theta, grid).adjoint(v));
}

// Controllability Gramian W(theta) = int_0^T e^{A(T-s)} B B^T e^{A^T(T-s)} ds.
inline Eigen::MatrixXd gramian(const EnsembleSystem& system, double theta, const TimeGrid& grid) {
  return detail::MomentOperator(system, theta, grid).gramian();
}
inline Eigen::MatrixXd gramian(const EnsembleSystem& system, double theta) {
  return gramian(system, theta, TimeGrid::gauss_legendre(system.horizon()));
}

// Reproducing kernel block Q(theta, eta) = int_0^T e^{A(theta)(T-s)} B(theta)
// B(eta)^T e^{A(eta)^T(T-s)} ds; Q(theta,theta) = W(theta).
inline Eigen::MatrixXd kernel_Q(const EnsembleSystem& system, double theta, double eta,
                                const TimeGrid& grid) {
  const detail::MomentOperator a(system, theta, grid);
  const detail::MomentOperator b(system, eta, grid);
  return a.cross_gramian(b);
}
inline Eigen::MatrixXd kernel_Q(const EnsembleSystem& system, double theta, double eta) {
  return kernel_Q(system, theta, eta, TimeGrid::gauss_legendre(system.horizon()));
}

// The (Nn)x(Nn) block kernel matrix Q (the Gramian of the parallel connection),
// optionally shifted by an explicit Tikhonov term lambda*I. The conditioning
// gate applies to the matrix actually factored: Q itself when lambda == 0,
// Q + lambda*I otherwise. The shift is never applied unless requested.
class BlockGramian {
 public:
  static constexpr double kConditionLimit = 1e14;

  BlockGramian(const EnsembleSystem& system, MomentGrid moments, const TimeGrid& grid,
               double tikhonov_lambda = 0.0)
      : moments_(std::move(moments)), lambda_(tikhonov_lambda), n_(system.n()) {
    if (lambda_ < 0.0) throw InvalidInputError("tikhonov shift must be >= 0");
    const int N = moments_.N();
    std::vector<detail::MomentOperator> ops;
    ops.reserve(N);
    for (int k = 0; k < N; ++k) ops.emplace_back(system, moments_[k], grid);

    matrix_.resize(N * n_, N * n_);
    for (int l = 0; l < N; ++l)
      for (int k = l; k < N; ++k) {
        const Eigen::MatrixXd blk = ops[l].cross_gramian(ops[k]);
        matrix_.block(l * n_, k * n_, n_, n_) = blk;
        if (k != l) matrix_.block(k * n_, l * n_, n_, n_) = blk.transpose();
      }
    matrix_ = 0.5 * (matrix_ + matrix_.transpose()).eval();

    Eigen::MatrixXd shifted = matrix_;
    if (lambda_ > 0.0) shifted.diagonal().array() += lambda_;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(shifted, Eigen::EigenvaluesOnly);
    const double eig_min = es.eigenvalues().minCoeff();
    const double eig_max = es.eigenvalues().maxCoeff();
    if (!(eig_min > 0.0)) {
      throw IllConditionedGramianError(
          "block Gramian is not positive definite (Cholesky cannot succeed); "
          "moments too close or family not ensemble controllable",
          std::numeric_limits<double>::infinity());
    }
    condition_estimate_ = eig_max / eig_min;
    if (condition_estimate_ > kConditionLimit) {
      throw IllConditionedGramianError(
          "block Gramian condition estimate " + std::to_string(condition_estimate_) +
              " exceeds 1e14; moments too close or loss of ensemble controllability",
          condition_estimate_);
    }
  }

  const Eigen::MatrixXd& matrix() const { return matrix_; }
  const MomentGrid& moments() const { return moments_; }
  double tikhonov_lambda() const { return lambda_; }
  double condition_estimate() const { return condition_estimate_; }
  int block_dim() const { return n_; }

  // Lower-triangular Cholesky factor of the (shifted) matrix, computed once on
  // first use and immutable afterwards.
  const Eigen::LLT<Eigen::MatrixXd>& factor() const {
    std::call_once(factor_once_, [this] {
      Eigen::MatrixXd shifted = matrix_;
      if (lambda_ > 0.0) shifted.diagonal().array() += lambda_;
      factor_ = std::make_unique<Eigen::LLT<Eigen::MatrixXd>>(shifted);
      if (factor_->info() != Eigen::Success)
        throw IllConditionedGramianError("Cholesky factorization of the block Gramian failed",
                                         condition_estimate_);
    });
    return *factor_;
  }

  // Solve (Q + lambda I) alpha = F with one step of iterative refinement.
  Eigen::VectorXd solve(const Eigen::VectorXd& F) const {
    const auto& llt = factor();
    Eigen::MatrixXd shifted = matrix_;
    if (lambda_ > 0.0) shifted.diagonal().array() += lambda_;
    Eigen::VectorXd alpha = llt.solve(F);
    const Eigen::VectorXd r = F - shifted * alpha;
    alpha += llt.solve(r);
    return alpha;
  }

 private:
  Eigen::MatrixXd matrix_;  // symmetrized raw Q, without the shift
  MomentGrid moments_;
  double lambda_;
  int n_;
  double condition_estimate_ = 0.0;
  mutable std::once_flag factor_once_;
  mutable std::unique_ptr<Eigen::LLT<Eigen::MatrixXd>> factor_;
};

inline BlockGramian block_gramian(const EnsembleSystem& system, const MomentGrid& moments,
                                  const TimeGrid& grid, double tikhonov_lambda = 0.0) {
  return BlockGramian(system, moments, grid, tikhonov_lambda);
}
inline BlockGramian block_gramian(const EnsembleSystem& system, const MomentGrid& moments,
                                  double tikhonov_lambda = 0.0) {
  return BlockGramian(system, moments, TimeGrid::gauss_legendre(system.horizon()),
                      tikhonov_lambda);
}

}  // namespace ensemble

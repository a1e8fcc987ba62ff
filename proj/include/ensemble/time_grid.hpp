#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <tuple>
#include <utility>

#include "ensemble/errors.hpp"

namespace ensemble {

namespace detail {

// Gauss-Legendre nodes/weights on [-1, 1] by Golub-Welsch: eigenvalues of the
// symmetric tridiagonal Jacobi matrix, weights from the first eigenvector
// components. Deterministic and accurate to machine precision.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> legendre_rule(int order) {
  if (order < 1) throw InvalidInputError("quadrature order must be >= 1");
  if (order == 1) {
    Eigen::VectorXd x(1), w(1);
    x << 0.0;
    w << 2.0;
    return {x, w};
  }
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(order, order);
  for (int k = 1; k < order; ++k) {
    const double beta = k / std::sqrt(4.0 * k * k - 1.0);
    J(k - 1, k) = beta;
    J(k, k - 1) = beta;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  Eigen::VectorXd x = es.eigenvalues();
  Eigen::VectorXd w(order);
  for (int k = 0; k < order; ++k) {
    const double v0 = es.eigenvectors()(0, k);
    w(k) = 2.0 * v0 * v0;
  }
  return {x, w};
}

// Composite Gauss-Legendre rule on [a, b]: `panels` equal panels, `order`
// nodes per panel.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> composite_legendre(double a, double b,
                                                                      int panels, int order) {
  if (!(b > a) || !std::isfinite(a) || !std::isfinite(b))
    throw InvalidInputError("quadrature interval must be finite with positive length");
  if (panels < 1) throw InvalidInputError("panel count must be >= 1");
  auto [x, w] = legendre_rule(order);
  Eigen::VectorXd nodes(panels * order), weights(panels * order);
  const double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double left = a + p * h;
    for (int k = 0; k < order; ++k) {
      nodes(p * order + k) = left + 0.5 * h * (x(k) + 1.0);
      weights(p * order + k) = 0.5 * h * w(k);
    }
  }
  return {nodes, weights};
}

}  // namespace detail

// Discretization of L^2_m([0,T]): quadrature nodes and positive weights.
// Default rule is composite Gauss-Legendre (32 panels x 4 nodes); a uniform
// trapezoid rule (which includes the endpoints 0 and T) is also provided.
struct TimeGrid {
  enum class Rule { gauss_legendre, trapezoid };

  double horizon = 0.0;
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
  Rule rule = Rule::gauss_legendre;

  static TimeGrid gauss_legendre(double T, int panels = 32, int order = 4) {
    if (!(T > 0.0) || !std::isfinite(T)) throw InvalidInputError("horizon must be positive");
    TimeGrid g;
    g.horizon = T;
    g.rule = Rule::gauss_legendre;
    std::tie(g.nodes, g.weights) = detail::composite_legendre(0.0, T, panels, order);
    return g;
  }

  static TimeGrid trapezoid(double T, int num_nodes) {
    if (!(T > 0.0) || !std::isfinite(T)) throw InvalidInputError("horizon must be positive");
    if (num_nodes < 2) throw InvalidInputError("trapezoid rule needs at least 2 nodes");
    TimeGrid g;
    g.horizon = T;
    g.rule = Rule::trapezoid;
    g.nodes.setLinSpaced(num_nodes, 0.0, T);
    const double h = T / (num_nodes - 1);
    g.weights = Eigen::VectorXd::Constant(num_nodes, h);
    g.weights(0) = 0.5 * h;
    g.weights(num_nodes - 1) = 0.5 * h;
    return g;
  }

  int size() const { return static_cast<int>(nodes.size()); }

  bool same_as(const TimeGrid& other) const {
    return size() == other.size() && std::abs(horizon - other.horizon) <= 1e-12 &&
           nodes.isApprox(other.nodes, 1e-14);
  }
};

// A vector-valued input u: [0,T] -> R^m sampled on a TimeGrid; the discrete
// element of L^2_m([0,T]). samples is m x (number of nodes).
struct InputSignal {
  TimeGrid grid;
  Eigen::MatrixXd samples;

  InputSignal() = default;
  InputSignal(TimeGrid g, Eigen::MatrixXd s) : grid(std::move(g)), samples(std::move(s)) {
    if (samples.cols() != grid.nodes.size())
      throw InvalidInputError("sample count must match grid node count");
    if (!samples.allFinite()) throw InvalidInputError("signal samples must be finite");
  }

  static InputSignal zero(const TimeGrid& g, int m) {
    return InputSignal(g, Eigen::MatrixXd::Zero(m, g.size()));
  }
  static InputSignal constant(const TimeGrid& g, const Eigen::VectorXd& value) {
    return InputSignal(g, value * Eigen::RowVectorXd::Ones(g.size()));
  }

  int m() const { return static_cast<int>(samples.rows()); }
};

// L^2 inner product via the grid quadrature weights.
inline double inner_product(const InputSignal& a, const InputSignal& b) {
  if (!a.grid.same_as(b.grid))
    throw IncompatibleGridError("inner_product requires signals on the same grid");
  if (a.m() != b.m()) throw InvalidInputError("inner_product requires equal signal dimensions");
  return ((a.samples.array() * b.samples.array()).colwise().sum().transpose() *
          a.grid.weights.array())
      .sum();
}

inline double l2_norm(const InputSignal& u) { return std::sqrt(std::max(0.0, inner_product(u, u))); }

inline InputSignal operator+(const InputSignal& a, const InputSignal& b) {
  if (!a.grid.same_as(b.grid)) throw IncompatibleGridError("signal addition requires one grid");
  return InputSignal(a.grid, a.samples + b.samples);
}

inline InputSignal operator-(const InputSignal& a, const InputSignal& b) {
  if (!a.grid.same_as(b.grid)) throw IncompatibleGridError("signal subtraction requires one grid");
  return InputSignal(a.grid, a.samples - b.samples);
}

inline InputSignal operator*(double c, const InputSignal& u) {
  return InputSignal(u.grid, c * u.samples);
}

}  // namespace ensemble

#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <cmath>

#include "ensemble/errors.hpp"

namespace ensemble {

namespace detail {

inline bool is_diagonal(const Eigen::MatrixXd& M) {
  for (int i = 0; i < M.rows(); ++i)
    for (int j = 0; j < M.cols(); ++j)
      if (i != j && M(i, j) != 0.0) return false;
  return true;
}

// Strictly triangular (zero diagonal) matrices are nilpotent with index <= n,
// so the exponential series terminates exactly.
inline bool is_strictly_triangular(const Eigen::MatrixXd& M) {
  bool upper = true, lower = true;
  for (int i = 0; i < M.rows(); ++i) {
    if (M(i, i) != 0.0) return false;
    for (int j = 0; j < i; ++j)
      if (M(i, j) != 0.0) upper = false;
    for (int j = i + 1; j < M.cols(); ++j)
      if (M(i, j) != 0.0) lower = false;
  }
  return upper || lower;
}

}  // namespace detail

// e^{M t}. Diagonal and strictly-triangular (nilpotent) matrices take exact
// shortcuts; everything else goes through scaling-and-squaring with diagonal
// Pade order 13 (Eigen's matrix exponential).
inline Eigen::MatrixXd matrix_exp(const Eigen::MatrixXd& M, double t) {
  if (!M.allFinite() || !std::isfinite(t))
    throw InvalidInputError("matrix_exp requires finite entries and finite t");
  if (M.rows() != M.cols()) throw InvalidInputError("matrix_exp requires a square matrix");
  const int n = static_cast<int>(M.rows());

  if (detail::is_diagonal(M)) {
    Eigen::MatrixXd E = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) E(i, i) = std::exp(M(i, i) * t);
    return E;
  }
  if (detail::is_strictly_triangular(M)) {
    Eigen::MatrixXd E = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n, n);
    for (int k = 1; k < n; ++k) {
      term = (term * M * (t / k)).eval();
      E += term;
    }
    return E;
  }
  return (M * t).exp();
}

}  // namespace ensemble

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "ensemble/errors.hpp"

namespace ensemble {

// Real polynomial with coefficients in ascending degree order.
// Entries of A(theta), B(theta), target profiles and source profiles are all
// polynomials in the ensemble parameter.
class Polynomial {
 public:
  Polynomial() : coeffs_{0.0} {}
  explicit Polynomial(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) {
    if (coeffs_.empty()) coeffs_.push_back(0.0);
    for (double c : coeffs_) {
      if (!std::isfinite(c)) throw InvalidInputError("polynomial coefficient not finite");
    }
  }
  static Polynomial constant(double c) { return Polynomial({c}); }

  // Horner evaluation.
  double operator()(double x) const {
    double acc = 0.0;
    for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * x + *it;
    return acc;
  }

  const std::vector<double>& coeffs() const { return coeffs_; }
  int degree() const { return static_cast<int>(coeffs_.size()) - 1; }

 private:
  std::vector<double> coeffs_;
};

// Compact parameter interval P = [lo, hi].
struct ParameterInterval {
  double lo;
  double hi;

  ParameterInterval(double lo, double hi) : lo(lo), hi(hi) {
    if (!(std::isfinite(lo) && std::isfinite(hi)))
      throw InvalidInputError("parameter interval endpoints must be finite");
    if (!(lo < hi)) throw InvalidInputError("parameter interval requires lo < hi");
  }

  double length() const { return hi - lo; }
  double midpoint() const { return 0.5 * (lo + hi); }
  bool contains(double theta) const { return theta >= lo && theta <= hi; }
};

// The parameter-dependent family (A(theta), B(theta)) with polynomial entries,
// a fixed horizon T > 0 and the parameter interval P.
class EnsembleSystem {
 public:
  EnsembleSystem(int n, int m, std::vector<Polynomial> A_entries,
                 std::vector<Polynomial> B_entries, double horizon,
                 ParameterInterval interval)
      : n_(n),
        m_(m),
        A_(std::move(A_entries)),
        B_(std::move(B_entries)),
        horizon_(horizon),
        interval_(interval) {
    if (n_ <= 0 || m_ <= 0) throw InvalidInputError("system dimensions must be positive");
    if (static_cast<int>(A_.size()) != n_ * n_)
      throw InvalidInputError("A_entries must contain n*n polynomials (row-major)");
    if (static_cast<int>(B_.size()) != n_ * m_)
      throw InvalidInputError("B_entries must contain n*m polynomials (row-major)");
    if (!(std::isfinite(horizon_) && horizon_ > 0.0))
      throw InvalidInputError("horizon T must be positive and finite");
  }

  int n() const { return n_; }
  int m() const { return m_; }
  double horizon() const { return horizon_; }
  const ParameterInterval& interval() const { return interval_; }
  const Polynomial& A_entry(int i, int j) const { return A_[i * n_ + j]; }
  const Polynomial& B_entry(int i, int j) const { return B_[i * m_ + j]; }

 private:
  int n_;
  int m_;
  std::vector<Polynomial> A_;  // row-major n x n
  std::vector<Polynomial> B_;  // row-major n x m
  double horizon_;
  ParameterInterval interval_;
};

// Evaluates (A(theta), B(theta)) by Horner evaluation of each entry.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> eval_system(const EnsembleSystem& system,
                                                               double theta) {
  if (!system.interval().contains(theta))
    throw DomainError("theta = " + std::to_string(theta) + " outside parameter interval [" +
                      std::to_string(system.interval().lo) + ", " +
                      std::to_string(system.interval().hi) + "]");
  Eigen::MatrixXd A(system.n(), system.n());
  for (int i = 0; i < system.n(); ++i)
    for (int j = 0; j < system.n(); ++j) A(i, j) = system.A_entry(i, j)(theta);
  Eigen::MatrixXd B(system.n(), system.m());
  for (int i = 0; i < system.n(); ++i)
    for (int j = 0; j < system.m(); ++j) B(i, j) = system.B_entry(i, j)(theta);
  return {A, B};
}

}  // namespace ensemble

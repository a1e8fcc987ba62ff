#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ensemble/errors.hpp"
#include "ensemble/gramian.hpp"
#include "ensemble/matrix_exp.hpp"
#include "ensemble/system.hpp"
#include "ensemble/time_grid.hpp"

namespace ensemble {

// Quadrature rule used for integrals over the parameter interval.
inline constexpr int kParameterPanels = 64;
inline constexpr int kParameterOrder = 4;

// Profile g: P -> R^n with polynomial components; the generator of
// kernel-generated targets f = R R* g and the weight in the a-priori bound.
struct SourceProfile {
  std::vector<Polynomial> components;

  explicit SourceProfile(std::vector<Polynomial> comps) : components(std::move(comps)) {
    if (components.empty()) throw InvalidInputError("source profile must have >= 1 component");
  }

  static SourceProfile constant(const Eigen::VectorXd& value) {
    std::vector<Polynomial> comps;
    comps.reserve(value.size());
    for (int i = 0; i < value.size(); ++i) comps.push_back(Polynomial::constant(value(i)));
    return SourceProfile(std::move(comps));
  }

  int n() const { return static_cast<int>(components.size()); }

  Eigen::VectorXd evaluate(double theta) const {
    Eigen::VectorXd v(n());
    for (int i = 0; i < n(); ++i) v(i) = components[i](theta);
    return v;
  }

  // L^2(P) norm by composite Gauss-Legendre quadrature.
  double l2_norm(const ParameterInterval& interval) const {
    auto [nodes, weights] =
        detail::composite_legendre(interval.lo, interval.hi, kParameterPanels, kParameterOrder);
    double acc = 0.0;
    for (int q = 0; q < nodes.size(); ++q) acc += weights(q) * evaluate(nodes(q)).squaredNorm();
    return std::sqrt(std::max(0.0, acc));
  }
};

// Target profile f: P -> R^n. Three representations:
//   polynomial        -- componentwise polynomials in theta,
//   tabulated         -- samples at ascending points, linear interpolation,
//   kernel_generated  -- f = R R* g for a polynomial source profile g (the
//                        range-space form for which the a-priori rate bound
//                        applies; evaluated through the cached representer
//                        u* = R* g, so that f = R u* holds by construction).
class TargetProfile {
 public:
  enum class Kind { polynomial, tabulated, kernel_generated };

  static TargetProfile polynomial(std::vector<Polynomial> comps) {
    if (comps.empty()) throw InvalidInputError("polynomial target must have >= 1 component");
    TargetProfile f(Kind::polynomial);
    f.dim_ = static_cast<int>(comps.size());
    f.polys_ = std::move(comps);
    return f;
  }

  static TargetProfile tabulated(std::vector<double> points, Eigen::MatrixXd values) {
    if (points.size() < 2) throw InvalidInputError("tabulated target needs >= 2 points");
    for (size_t i = 0; i + 1 < points.size(); ++i)
      if (!(points[i] < points[i + 1]))
        throw InvalidInputError("tabulated points must be strictly ascending");
    if (values.cols() != static_cast<Eigen::Index>(points.size()))
      throw InvalidInputError("tabulated values must have one column per point");
    if (!values.allFinite()) throw InvalidInputError("tabulated values must be finite");
    TargetProfile f(Kind::tabulated);
    f.dim_ = static_cast<int>(values.rows());
    f.tab_points_ = std::move(points);
    f.tab_values_ = std::move(values);
    return f;
  }

  static TargetProfile kernel_generated(SourceProfile g) {
    TargetProfile f(Kind::kernel_generated);
    f.dim_ = g.n();
    f.source_ = std::make_shared<SourceProfile>(std::move(g));
    return f;
  }

  Kind kind() const { return kind_; }
  int n() const { return dim_; }

  const SourceProfile& source() const {
    if (!source_) throw InvalidInputError("target profile has no source profile");
    return *source_;
  }

  // The representer u*(s) = int_P B(eta)^T e^{A(eta)^T (T-s)} g(eta) d eta on
  // the given time grid; f = R u* exactly (up to parameter quadrature).
  // Cached per grid; only meaningful for kernel-generated targets.
  const InputSignal& kernel_input(const EnsembleSystem& system, const TimeGrid& grid) const {
    if (kind_ != Kind::kernel_generated)
      throw InvalidInputError("kernel_input requires a kernel-generated target");
    if (source_->n() != system.n())
      throw InvalidInputError("source profile dimension does not match system state dimension");
    if (!cache_ || !cache_->grid.same_as(grid)) {
      auto [nodes, weights] = detail::composite_legendre(
          system.interval().lo, system.interval().hi, kParameterPanels, kParameterOrder);
      Eigen::MatrixXd samples = Eigen::MatrixXd::Zero(system.m(), grid.size());
      for (int q = 0; q < nodes.size(); ++q) {
        const detail::MomentOperator op(system, nodes(q), grid);
        samples.noalias() += weights(q) * op.adjoint(source_->evaluate(nodes(q)));
      }
      cache_ = std::make_shared<InputSignal>(grid, std::move(samples));
    }
    return *cache_;
  }

  Eigen::VectorXd evaluate(const EnsembleSystem& system, double theta) const {
    if (dim_ != system.n())
      throw InvalidInputError("target profile dimension does not match system state dimension");
    switch (kind_) {
      case Kind::polynomial: {
        Eigen::VectorXd v(dim_);
        for (int i = 0; i < dim_; ++i) v(i) = polys_[i](theta);
        return v;
      }
      case Kind::tabulated: {
        const double span = tab_points_.back() - tab_points_.front();
        const double tol = 1e-12 * std::max(1.0, std::abs(span));
        if (theta < tab_points_.front() - tol || theta > tab_points_.back() + tol)
          throw DomainError("theta = " + std::to_string(theta) + " outside tabulated range");
        const double t = std::clamp(theta, tab_points_.front(), tab_points_.back());
        auto it = std::upper_bound(tab_points_.begin(), tab_points_.end(), t);
        int hi = static_cast<int>(it - tab_points_.begin());
        hi = std::clamp(hi, 1, static_cast<int>(tab_points_.size()) - 1);
        const int lo = hi - 1;
        const double w = (t - tab_points_[lo]) / (tab_points_[hi] - tab_points_[lo]);
        return (1.0 - w) * tab_values_.col(lo) + w * tab_values_.col(hi);
      }
      case Kind::kernel_generated: {
        const InputSignal& us =
            kernel_input(system, cache_ ? cache_->grid : TimeGrid::gauss_legendre(system.horizon()));
        return reachability_apply(system, us, theta);
      }
    }
    throw InvalidInputError("unknown target profile kind");
  }

 private:
  explicit TargetProfile(Kind kind) : kind_(kind) {}

  Kind kind_;
  int dim_ = 0;
  std::vector<Polynomial> polys_;
  std::vector<double> tab_points_;
  Eigen::MatrixXd tab_values_;
  std::shared_ptr<SourceProfile> source_;
  mutable std::shared_ptr<InputSignal> cache_;
};

// Reduces steering from an initial profile x0 to the zero-initial-state form:
// the shifted target f(theta) - e^{A(theta) T} x0(theta), tabulated at the
// given sample points.
inline TargetProfile shift_target(const EnsembleSystem& system, const TargetProfile& f,
                                  const SourceProfile& x0, std::vector<double> sample_points) {
  if (x0.n() != system.n())
    throw InvalidInputError("initial profile dimension does not match system state dimension");
  if (sample_points.size() < 2) throw InvalidInputError("shift_target needs >= 2 sample points");
  Eigen::MatrixXd values(system.n(), static_cast<Eigen::Index>(sample_points.size()));
  for (size_t i = 0; i < sample_points.size(); ++i) {
    const double theta = sample_points[i];
    const auto [A, B] = eval_system(system, theta);
    (void)B;
    values.col(static_cast<Eigen::Index>(i)) =
        f.evaluate(system, theta) - matrix_exp(A, system.horizon()) * x0.evaluate(theta);
  }
  return TargetProfile::tabulated(std::move(sample_points), std::move(values));
}

inline TargetProfile shift_target(const EnsembleSystem& system, const TargetProfile& f,
                                  const SourceProfile& x0, int eval_points = 201) {
  if (eval_points < 2) throw InvalidInputError("shift_target needs >= 2 sample points");
  std::vector<double> pts(eval_points);
  const auto& P = system.interval();
  for (int i = 0; i < eval_points; ++i)
    pts[i] = P.lo + P.length() * static_cast<double>(i) / (eval_points - 1);
  pts.back() = P.hi;
  return shift_target(system, f, x0, std::move(pts));
}

}  // namespace ensemble

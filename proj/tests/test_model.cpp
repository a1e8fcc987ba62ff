#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace ensemble;

TEST(Polynomial, HornerEvaluation) {
  // 1 + 2x + 3x^2 at x = 2 -> 17.
  Polynomial p({1.0, 2.0, 3.0});
  EXPECT_DOUBLE_EQ(p(2.0), 17.0);
  EXPECT_DOUBLE_EQ(p(0.0), 1.0);
  EXPECT_EQ(p.degree(), 2);
}

TEST(Polynomial, ConstantAndEmpty) {
  EXPECT_DOUBLE_EQ(Polynomial::constant(4.5)(123.0), 4.5);
  Polynomial zero(std::vector<double>{});
  EXPECT_DOUBLE_EQ(zero(3.0), 0.0);
}

TEST(Polynomial, RejectsNonFiniteCoefficients) {
  EXPECT_THROW(Polynomial({1.0, std::numeric_limits<double>::quiet_NaN()}), InvalidInputError);
  EXPECT_THROW(Polynomial({std::numeric_limits<double>::infinity()}), InvalidInputError);
}

TEST(ParameterIntervalTest, BasicProperties) {
  ParameterInterval p(-1.0, 3.0);
  EXPECT_DOUBLE_EQ(p.length(), 4.0);
  EXPECT_DOUBLE_EQ(p.midpoint(), 1.0);
  EXPECT_TRUE(p.contains(-1.0));
  EXPECT_TRUE(p.contains(3.0));
  EXPECT_FALSE(p.contains(3.0000001));
  EXPECT_THROW(ParameterInterval(1.0, 1.0), InvalidInputError);
  EXPECT_THROW(ParameterInterval(2.0, 1.0), InvalidInputError);
}

TEST(EnsembleSystemTest, EvalScalarExp) {
  auto sys = bench::scalar_exp();
  auto [A, B] = eval_system(sys, 0.3);
  ASSERT_EQ(A.rows(), 1);
  ASSERT_EQ(B.cols(), 1);
  EXPECT_DOUBLE_EQ(A(0, 0), 0.3);
  EXPECT_DOUBLE_EQ(B(0, 0), 1.0);
}

TEST(EnsembleSystemTest, EvalRotation) {
  auto sys = bench::rotation();
  auto [A, B] = eval_system(sys, 0.7);
  EXPECT_DOUBLE_EQ(A(0, 1), 0.7);
  EXPECT_DOUBLE_EQ(A(1, 0), -0.7);
  EXPECT_DOUBLE_EQ(A(0, 0), 0.0);
  EXPECT_TRUE(B.isApprox(Eigen::Matrix2d::Identity()));
}

TEST(EnsembleSystemTest, EvalOutsideIntervalThrows) {
  auto sys = bench::scalar_exp();
  EXPECT_THROW(eval_system(sys, -0.1), DomainError);
  EXPECT_THROW(eval_system(sys, 1.1), DomainError);
}

TEST(EnsembleSystemTest, RejectsBadDimensions) {
  EXPECT_THROW(EnsembleSystem(0, 1, {}, {}, 1.0, ParameterInterval(0.0, 1.0)),
               InvalidInputError);
  // A has n*n = 1 entry, but two are supplied.
  EXPECT_THROW(EnsembleSystem(1, 1, {Polynomial::constant(0.0), Polynomial::constant(0.0)},
                              {Polynomial::constant(1.0)}, 1.0, ParameterInterval(0.0, 1.0)),
               InvalidInputError);
  EXPECT_THROW(EnsembleSystem(1, 1, {Polynomial::constant(0.0)}, {Polynomial::constant(1.0)},
                              -1.0, ParameterInterval(0.0, 1.0)),
               InvalidInputError);
}

TEST(MatrixExp, ZeroMatrixGivesIdentity) {
  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(3, 3);
  EXPECT_TRUE(matrix_exp(Z, 2.5).isApprox(Eigen::MatrixXd::Identity(3, 3), 1e-15));
}

TEST(MatrixExp, DiagonalClosedForm) {
  Eigen::MatrixXd D = Eigen::Vector2d(1.0, 2.0).asDiagonal();
  Eigen::MatrixXd E = matrix_exp(D, 0.5);
  EXPECT_NEAR(E(0, 0), std::exp(0.5), 1e-15);
  EXPECT_NEAR(E(1, 1), std::exp(1.0), 1e-15);
  EXPECT_DOUBLE_EQ(E(0, 1), 0.0);
}

TEST(MatrixExp, NilpotentJordanBlockExact) {
  Eigen::MatrixXd A(2, 2);
  A << 0.0, 1.0, 0.0, 0.0;
  const double t = 0.37;
  Eigen::MatrixXd E = matrix_exp(A, t);
  EXPECT_DOUBLE_EQ(E(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(E(0, 1), t);
  EXPECT_DOUBLE_EQ(E(1, 0), 0.0);
  EXPECT_DOUBLE_EQ(E(1, 1), 1.0);
}

TEST(MatrixExp, RotationClosedForm) {
  // exp(t * [[0, w], [-w, 0]]) = [[cos wt, sin wt], [-sin wt, cos wt]].
  const double w = 0.8, t = 1.3;
  Eigen::MatrixXd A(2, 2);
  A << 0.0, w, -w, 0.0;
  Eigen::MatrixXd E = matrix_exp(A, t);
  EXPECT_NEAR(E(0, 0), std::cos(w * t), 1e-14);
  EXPECT_NEAR(E(0, 1), std::sin(w * t), 1e-14);
  EXPECT_NEAR(E(1, 0), -std::sin(w * t), 1e-14);
}

TEST(MatrixExp, InverseAndSemigroupProperties) {
  std::mt19937 rng(20260815);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::MatrixXd M(3, 3);
    for (int i = 0; i < 9; ++i) M(i / 3, i % 3) = bench::random_vector(1, rng)(0);
    Eigen::MatrixXd P = matrix_exp(M, 0.4) * matrix_exp(M, -0.4);
    EXPECT_TRUE(P.isApprox(Eigen::MatrixXd::Identity(3, 3), 1e-12));
    Eigen::MatrixXd S = matrix_exp(M, 0.3) * matrix_exp(M, 0.5);
    EXPECT_TRUE(S.isApprox(matrix_exp(M, 0.8), 1e-12));
  }
}

TEST(MatrixExp, RejectsBadInput) {
  EXPECT_THROW(matrix_exp(Eigen::MatrixXd::Zero(2, 3), 1.0), InvalidInputError);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(2, 2);
  M(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(matrix_exp(M, 1.0), InvalidInputError);
}

TEST(TimeGridTest, GaussLegendreWeightsSumToHorizon) {
  auto grid = TimeGrid::gauss_legendre(1.0, 32, 4);
  EXPECT_EQ(grid.size(), 128);
  EXPECT_NEAR(grid.weights.sum(), 1.0, 1e-14);
  EXPECT_GT(grid.nodes.minCoeff(), 0.0);
  EXPECT_LT(grid.nodes.maxCoeff(), 1.0);
  // Nodes strictly increasing.
  for (int i = 1; i < grid.size(); ++i) EXPECT_LT(grid.nodes[i - 1], grid.nodes[i]);
}

TEST(TimeGridTest, GaussLegendreIsExactForPolynomials) {
  // 4-point Gauss-Legendre integrates degree <= 7 exactly; int_0^1 s^7 ds = 1/8.
  auto grid = TimeGrid::gauss_legendre(1.0, 2, 4);
  double acc = 0.0;
  for (int i = 0; i < grid.size(); ++i) acc += grid.weights[i] * std::pow(grid.nodes[i], 7);
  EXPECT_NEAR(acc, 0.125, 1e-15);
}

TEST(TimeGridTest, TrapezoidEndpointsAndWeights) {
  auto grid = TimeGrid::trapezoid(2.0, 5);
  EXPECT_EQ(grid.size(), 5);
  EXPECT_DOUBLE_EQ(grid.nodes[0], 0.0);
  EXPECT_DOUBLE_EQ(grid.nodes[4], 2.0);
  EXPECT_NEAR(grid.weights.sum(), 2.0, 1e-14);
  EXPECT_DOUBLE_EQ(grid.weights[0], grid.weights[4]);
  EXPECT_DOUBLE_EQ(grid.weights[1], 2.0 * grid.weights[0]);
}

TEST(TimeGridTest, SameAsDetectsMismatch) {
  auto a = TimeGrid::gauss_legendre(1.0, 8, 4);
  auto b = TimeGrid::gauss_legendre(1.0, 8, 4);
  auto c = TimeGrid::gauss_legendre(1.0, 16, 4);
  EXPECT_TRUE(a.same_as(b));
  EXPECT_FALSE(a.same_as(c));
}

TEST(InputSignalTest, NormAndInnerProduct) {
  auto grid = TimeGrid::gauss_legendre(1.0, 16, 4);
  auto ones = InputSignal::constant(grid, Eigen::VectorXd::Ones(1));
  EXPECT_NEAR(inner_product(ones, ones), 1.0, 1e-14);
  // u(s) = s has L2 norm 1/sqrt(3) on [0, 1].
  InputSignal ramp(grid, grid.nodes.transpose());
  EXPECT_NEAR(l2_norm(ramp), 1.0 / std::sqrt(3.0), 1e-14);
  // Bilinearity: <u + v, w> = <u, w> + <v, w>.
  std::mt19937 rng(7);
  auto u = bench::random_signal(grid, 2, rng);
  auto v = bench::random_signal(grid, 2, rng);
  auto w = bench::random_signal(grid, 2, rng);
  EXPECT_NEAR(inner_product(u + v, w), inner_product(u, w) + inner_product(v, w), 1e-12);
  EXPECT_NEAR(l2_norm(u - u), 0.0, 1e-15);
  EXPECT_NEAR(l2_norm(2.0 * u), 2.0 * l2_norm(u), 1e-12);
}

TEST(InputSignalTest, MismatchedGridsThrow) {
  auto a = TimeGrid::gauss_legendre(1.0, 8, 4);
  auto b = TimeGrid::gauss_legendre(1.0, 16, 4);
  auto u = InputSignal::zero(a, 1);
  auto v = InputSignal::zero(b, 1);
  EXPECT_THROW(inner_product(u, v), IncompatibleGridError);
  EXPECT_THROW(u + v, IncompatibleGridError);
}

TEST(SourceProfileTest, L2Norms) {
  // g == 1 on [0,1] has norm 1; g(theta) = theta has norm 1/sqrt(3).
  SourceProfile ones = SourceProfile::constant(Eigen::VectorXd::Ones(1));
  EXPECT_NEAR(ones.l2_norm(ParameterInterval(0.0, 1.0)), 1.0, 1e-13);
  SourceProfile ramp{{Polynomial({0.0, 1.0})}};
  EXPECT_NEAR(ramp.l2_norm(ParameterInterval(0.0, 1.0)), 1.0 / std::sqrt(3.0), 1e-13);
}

TEST(TargetProfileTest, PolynomialEvaluate) {
  auto sys = bench::jordan2();
  auto f = TargetProfile::polynomial({Polynomial({1.0, 1.0}), Polynomial::constant(0.0)});
  Eigen::VectorXd val = f.evaluate(sys, 0.25);
  EXPECT_DOUBLE_EQ(val(0), 1.25);
  EXPECT_DOUBLE_EQ(val(1), 0.0);
}

TEST(TargetProfileTest, TabulatedInterpolation) {
  auto sys = bench::scalar_exp();
  std::vector<double> pts = {0.0, 0.5, 1.0};
  Eigen::MatrixXd vals(1, 3);
  vals << 1.0, 2.0, 5.0;
  auto f = TargetProfile::tabulated(pts, vals);
  EXPECT_DOUBLE_EQ(f.evaluate(sys, 0.25)(0), 1.5);
  EXPECT_DOUBLE_EQ(f.evaluate(sys, 0.75)(0), 3.5);
  EXPECT_DOUBLE_EQ(f.evaluate(sys, 1.0)(0), 5.0);
}

TEST(TargetProfileTest, TabulatedRejectsOutOfRange) {
  auto sys = bench::scalar_exp();
  std::vector<double> pts = {0.2, 0.8};
  Eigen::MatrixXd vals = Eigen::MatrixXd::Ones(1, 2);
  auto f = TargetProfile::tabulated(pts, vals);
  EXPECT_THROW(f.evaluate(sys, 0.1), DomainError);
  EXPECT_THROW(f.evaluate(sys, 0.9), DomainError);
}

TEST(TargetProfileTest, TabulatedValidation) {
  std::vector<double> bad = {0.5, 0.5};  // not strictly increasing
  EXPECT_THROW(TargetProfile::tabulated(bad, Eigen::MatrixXd::Ones(1, 2)), InvalidInputError);
  std::vector<double> one = {0.5};
  EXPECT_THROW(TargetProfile::tabulated(one, Eigen::MatrixXd::Ones(1, 1)), InvalidInputError);
}

TEST(ShiftTargetTest, ZeroInitialStateIsIdentity) {
  auto sys = bench::scalar_exp();
  auto f = TargetProfile::polynomial({Polynomial({2.0, -1.0})});
  auto x0 = SourceProfile::constant(Eigen::VectorXd::Zero(1));
  auto shifted = shift_target(sys, f, x0, 101);
  for (double theta : {0.0, 0.3, 0.75, 1.0}) {
    EXPECT_NEAR(shifted.evaluate(sys, theta)(0), f.evaluate(sys, theta)(0), 1e-12);
  }
}

TEST(ShiftTargetTest, ScalarClosedForm) {
  // f == 2, x0 == 0.5: shifted f(theta) = 2 - 0.5 e^{theta}.
  auto sys = bench::scalar_exp();
  auto f = TargetProfile::polynomial({Polynomial::constant(2.0)});
  auto x0 = SourceProfile::constant(Eigen::VectorXd::Constant(1, 0.5));
  std::vector<double> pts;
  for (int i = 0; i <= 100; ++i) pts.push_back(i / 100.0);
  auto shifted = shift_target(sys, f, x0, pts);
  for (double theta : {0.0, 0.42, 1.0}) {
    EXPECT_NEAR(shifted.evaluate(sys, theta)(0), 2.0 - 0.5 * std::exp(theta), 1e-12);
  }
}

TEST(ShiftTargetTest, Jordan2ClosedForm) {
  // e^{A T} = [[1, 1], [0, 1]] at T = 1, so x0 = (a, b) shifts f by (a + b, b).
  auto sys = bench::jordan2();
  auto f = TargetProfile::polynomial(
      {Polynomial::constant(1.0), Polynomial::constant(0.0)});
  SourceProfile x0{{Polynomial::constant(0.25), Polynomial::constant(0.5)}};
  auto shifted = shift_target(sys, f, x0, 51);
  Eigen::VectorXd v = shifted.evaluate(sys, 0.5);
  EXPECT_NEAR(v(0), 1.0 - 0.75, 1e-12);
  EXPECT_NEAR(v(1), 0.0 - 0.5, 1e-12);
}

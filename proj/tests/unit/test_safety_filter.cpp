#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dobcbf/safety_filter.hpp"

namespace dobcbf {
namespace {

ControlAffineSystem scalar_plant() {
  ControlAffineSystem s;
  s.n = s.m = s.p = 1;
  s.f = [](const Vector&) { return Vector(Vector::Zero(1)); };
  s.g1 = [](const Vector&) { return Matrix(Matrix::Ones(1, 1)); };
  s.g2 = s.g1;
  return s;
}

BarrierSpec identity_barrier() {
  BarrierSpec b;
  b.h = [](const Vector& x) { return x[0]; };
  b.grad_h = [](const Vector&) { return RowVector(RowVector::Ones(1)); };
  return b;
}

ControlAffineSystem double_integrator() {
  ControlAffineSystem s;
  s.n = 2;
  s.m = s.p = 1;
  s.f = [](const Vector& x) {
    Vector dx(2);
    dx << x[1], 0.0;
    return dx;
  };
  s.g1 = [](const Vector&) {
    Matrix g(2, 1);
    g << 0.0, 1.0;
    return g;
  };
  s.g2 = s.g1;
  return s;
}

BarrierSpec box_barrier() {
  BarrierSpec b;
  b.h = [](const Vector& x) { return 1.0 - x[0]; };
  b.grad_h = [](const Vector&) {
    RowVector g(2);
    g << -1.0, 0.0;
    return g;
  };
  b.relative_degree = 2;
  b.lie_f = {[](const Vector& x) { return -x[1]; }, [](const Vector&) { return 0.0; }};
  b.lie_g1_fr = [](const Vector&) { return RowVector(RowVector::Constant(1, -1.0)); };
  b.lie_g2_fr = b.lie_g1_fr;
  b.poles = {1.0, 1.0};
  return b;
}

FilterParams params(double alpha, double beta, double gamma, double nu, double omega) {
  FilterParams fp;
  fp.alpha = alpha;
  fp.beta = beta;
  fp.gamma = gamma;
  fp.nu = nu;
  fp.omega = omega;
  return fp;
}

Vector scalar(double v) { return Vector::Constant(1, v); }

Vector v2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

TEST(PsiRel1, HandEvaluation) {
  const auto c = psi_rel1(scalar_plant(), identity_barrier(), params(2, 1, 1, 1, 0), scalar(1.0),
                          scalar(0.0));
  EXPECT_DOUBLE_EQ(c.psi0, 0.75);
  EXPECT_DOUBLE_EQ(c.psi1[0], 1.0);
}

TEST(PsiRel1, LinearInEstimate) {
  const auto c = psi_rel1(scalar_plant(), identity_barrier(), params(2, 1, 1, 1, 0), scalar(1.0),
                          scalar(2.0));
  EXPECT_DOUBLE_EQ(c.psi0, 2.75);
}

TEST(PsiRel1, OmegaTermIsAdditive) {
  const auto base = psi_rel1(scalar_plant(), identity_barrier(), params(2, 1, 1, 1, 0),
                             scalar(1.0), scalar(0.0));
  const auto with = psi_rel1(scalar_plant(), identity_barrier(), params(2, 1, 1, 1, 2),
                             scalar(1.0), scalar(0.0));
  EXPECT_DOUBLE_EQ(base.psi0 - with.psi0, 2.0);
  auto fp = params(2, 1, 1, 1, 2);
  fp.mode = OmegaMode::kNoOmega;
  const auto dropped = psi_rel1(scalar_plant(), identity_barrier(), fp, scalar(1.0), scalar(0.0));
  EXPECT_DOUBLE_EQ(dropped.psi0, base.psi0);
}

TEST(PsiRel1, DegenerateDenominatorThrows) {
  EXPECT_THROW(psi_rel1(scalar_plant(), identity_barrier(), params(1, 1, 1, 1, 0), scalar(1.0),
                        scalar(0.0)),
               ParameterError);
}

TEST(PsiRel1, MatchesFiniteDifferenceLieDerivatives) {
  ControlAffineSystem s;
  s.n = 2;
  s.m = 2;
  s.p = 1;
  s.f = [](const Vector& x) { return v2(x[1], -std::sin(x[0])); };
  s.g1 = [](const Vector& x) {
    Matrix g(2, 2);
    g << 1.0, 0.0, x[0], 1.0;
    return g;
  };
  s.g2 = [](const Vector& x) {
    Matrix g(2, 1);
    g << 0.5, std::cos(x[1]);
    return g;
  };
  BarrierSpec b;
  b.h = [](const Vector& x) { return 4.0 - x.squaredNorm() + 0.1 * x[0] * x[1]; };
  b.grad_h = [](const Vector& x) {
    RowVector g(2);
    g << -2.0 * x[0] + 0.1 * x[1], -2.0 * x[1] + 0.1 * x[0];
    return g;
  };
  const auto fp = params(3.0, 2.0, 1.5, 0.5, 0.7);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const double eps = 1e-6;
  auto dir = [&](const Vector& x, const Vector& v) {
    return (b.h(x + eps * v) - b.h(x - eps * v)) / (2.0 * eps);
  };
  for (int i = 0; i < 100; ++i) {
    const Vector x = v2(u(rng), u(rng));
    const Vector dh = scalar(u(rng));
    const double lf = dir(x, s.f(x));
    const double lg2 = dir(x, s.g2(x).col(0));
    const double expected = lf + lg2 * dh[0] - fp.omega * fp.omega / (2 * fp.nu * fp.beta) -
                            fp.beta * lg2 * lg2 / (4 * fp.alpha - 2 * fp.gamma - 2 * fp.nu) +
                            fp.gamma * b.h(x);
    const auto c = psi_rel1(s, b, fp, x, dh);
    EXPECT_NEAR(c.psi0, expected, 1e-6 * std::max(1.0, std::abs(expected)));
    for (int k = 0; k < 2; ++k) EXPECT_NEAR(c.psi1[k], dir(x, s.g1(x).col(k)), 1e-6);
  }
}

TEST(PsiRelr, DoubleIntegratorAtOrigin) {
  const auto c = psi_relr(double_integrator(), box_barrier(), params(2, 1, 0, 1, 0), v2(0, 0),
                          scalar(0.0));
  EXPECT_DOUBLE_EQ(c.psi0, 0.75);
  EXPECT_DOUBLE_EQ(c.psi1[0], -1.0);
}

TEST(PsiRelr, LinearInEstimate) {
  const auto c = psi_relr(double_integrator(), box_barrier(), params(2, 1, 0, 1, 0), v2(0, 0),
                          scalar(1.0));
  EXPECT_DOUBLE_EQ(c.psi0, -0.25);
}

TEST(PsiRelr, OffOriginHandExpansion) {
  const auto c = psi_relr(double_integrator(), box_barrier(), params(2, 1, 0, 1, 0), v2(0.5, -1.0),
                          scalar(0.0));
  EXPECT_DOUBLE_EQ(c.psi0, 2.25);
}

TEST(PsiRelr, DegenerateDenominatorThrows) {
  // 4 alpha - 2 lambda_r - 2 nu = 0
  EXPECT_THROW(psi_relr(double_integrator(), box_barrier(), params(1, 1, 0, 1, 0), v2(0, 0),
                        scalar(0.0)),
               ParameterError);
}

TEST(AugmentedBarrier, ZeroErrorIsScaledBarrier) {
  const auto v = augmented_barrier(scalar_plant(), identity_barrier(), params(2, 3, 1, 1, 0),
                                   scalar(1.5), scalar(0.0));
  EXPECT_DOUBLE_EQ(v.value, 4.5);
}

TEST(AugmentedBarrier, Arithmetic) {
  const auto v = augmented_barrier(scalar_plant(), identity_barrier(), params(2, 10, 1, 1, 0),
                                   scalar(16.0), scalar(std::sqrt(2.0)));
  EXPECT_NEAR(v.value, 159.0, 1e-12);
}

TEST(AugmentedBarrier, UsesLastSForHigherDegree) {
  const auto v = augmented_barrier(double_integrator(), box_barrier(), params(2, 2, 0, 1, 0),
                                   v2(0.5, -1.0), scalar(1.0));
  EXPECT_DOUBLE_EQ(v.value, 2.0 * 1.5 - 0.5);
}

TEST(ValidateParams, ArmParametersPass) {
  const double h0 = 16.0 - 4.0 - 6.25;
  const std::vector<double> s0{h0};
  const double e0 = 0.99 * std::sqrt(2.0 * 10.0 * h0);
  const auto rep = validate_params(identity_barrier(), params(500, 10, 2, 1, 0), s0, e0);
  EXPECT_TRUE(rep.pass());
  ASSERT_NE(rep.find("alpha_bound"), nullptr);
  ASSERT_NE(rep.find("beta_bound"), nullptr);
}

TEST(ValidateParams, AlphaBelowThresholdFails) {
  const std::vector<double> s0{1.0};
  const auto rep = validate_params(identity_barrier(), params(1, 10, 2, 1, 0), s0, 0.0);
  EXPECT_FALSE(rep.pass());
  EXPECT_FALSE(rep.find("alpha_bound")->pass);
}

TEST(ValidateParams, BetaAtBoundFails) {
  const std::vector<double> s0{2.0};
  // beta bound e0^2 / (2 h0) = 4 / 4 = 1
  const auto rep = validate_params(identity_barrier(), params(10, 1, 1, 1, 0), s0, 2.0);
  EXPECT_FALSE(rep.find("beta_bound")->pass);
  const auto ok = validate_params(identity_barrier(), params(10, 1.0001, 1, 1, 0), s0, 2.0);
  EXPECT_TRUE(ok.find("beta_bound")->pass);
}

TEST(ValidateParams, HigherDegreeChecksEverySk) {
  const std::vector<double> good{1.0, 1.5};
  EXPECT_TRUE(validate_params(box_barrier(), params(2, 2, 0, 1, 0), good, 0.5).pass());
  const std::vector<double> bad{1.0, -0.1};
  const auto rep = validate_params(box_barrier(), params(2, 2, 0, 1, 0), bad, 0.5);
  EXPECT_FALSE(rep.pass());
  EXPECT_FALSE(rep.find("s1_positive")->pass);
}

TEST(RobustPsi, ZeroBoundIsNominalCbf) {
  const auto c = robust_psi_rel1(scalar_plant(), identity_barrier(), 1.0, 0.0, scalar(1.0));
  EXPECT_DOUBLE_EQ(c.psi0, 1.0);
  EXPECT_DOUBLE_EQ(c.psi1[0], 1.0);
}

TEST(RobustPsi, WorstCaseShift) {
  const auto c = robust_psi_rel1(scalar_plant(), identity_barrier(), 1.0, 2.0, scalar(1.0));
  EXPECT_DOUBLE_EQ(c.psi0, -1.0);
}

TEST(ViolationFloor, StartsAtZero) {
  auto fp = params(10, 10, 2, 1, 2);
  fp.mode = OmegaMode::kNoOmega;
  EXPECT_EQ(violation_floor(fp, 0.0), 0.0);
}

TEST(ViolationFloor, Limit) {
  auto fp = params(10, 10, 2, 1, 2);
  fp.mode = OmegaMode::kNoOmega;
  EXPECT_NEAR(violation_floor(fp, 100.0), -0.1, 1e-15);
}

TEST(ViolationFloor, ZeroOmega) {
  auto fp = params(10, 10, 2, 1, 0);
  fp.mode = OmegaMode::kNoOmega;
  for (double t : {0.0, 1.0, 50.0}) EXPECT_EQ(violation_floor(fp, t), 0.0);
}

TEST(ViolationFloor, FullModeNotApplicable) {
  EXPECT_THROW(violation_floor(params(10, 10, 2, 1, 2), 1.0), NotApplicableError);
}

}  // namespace
}  // namespace dobcbf

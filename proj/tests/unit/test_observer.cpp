#include <gtest/gtest.h>

#include <cmath>

#include "dobcbf/observer.hpp"
#include "dobcbf/simulator.hpp"

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

Vector scalar(double v) { return Vector::Constant(1, v); }

TEST(Estimate, ZeroCase) {
  ObserverConfig cfg;
  cfg.p_fn = [](const Vector&) { return Vector(Vector::Zero(1)); };
  EXPECT_EQ(estimate(cfg, ObserverState{scalar(0.0)}, scalar(5.0))[0], 0.0);
}

TEST(Estimate, DirectSum) {
  ObserverConfig cfg;
  cfg.p_fn = [](const Vector& x) { return Vector(2.0 * x); };
  EXPECT_EQ(estimate(cfg, ObserverState{scalar(1.0)}, scalar(3.0))[0], 7.0);
}

TEST(Estimate, ZeroEstimateInitialization) {
  const auto cfg = constant_gain_observer(Matrix::Ones(1, 1), 4.0, 1.0, 0.0);
  const Vector x0 = scalar(2.5);
  EXPECT_EQ(estimate(cfg, zero_estimate_state(cfg, x0), x0)[0], 0.0);
}

TEST(ZDerivative, AllZero) {
  ObserverConfig cfg;
  cfg.gain = [](const Vector&) { return Matrix(Matrix::Ones(1, 1)); };
  cfg.p_fn = [](const Vector&) { return Vector(Vector::Zero(1)); };
  EXPECT_EQ(z_derivative(cfg, ObserverState{scalar(0.0)}, scalar_plant(), scalar(0.0), scalar(0.0))[0],
            0.0);
}

TEST(ZDerivative, ScalarHandEvaluation) {
  const auto cfg = constant_gain_observer(Matrix::Ones(1, 1), 2.0, 1.0, 0.0);
  EXPECT_DOUBLE_EQ(
      z_derivative(cfg, ObserverState{scalar(1.0)}, scalar_plant(), scalar(0.0), scalar(0.0))[0],
      -2.0);
}

TEST(ConstantGainObserver, GainTimesG2IsAlphaIdentity) {
  Matrix g2(3, 2);
  g2 << 1.0, 0.5, -2.0, 1.0, 0.3, 4.0;
  const auto cfg = constant_gain_observer(g2, 3.0, 1.0, 0.0);
  const Matrix lg = cfg.gain(Vector::Zero(3)) * g2;
  EXPECT_LE((lg - 3.0 * Matrix::Identity(2, 2)).norm(), 1e-12);
}

TEST(ConstantGainObserver, RankDeficientRejected) {
  Matrix g2(2, 2);
  g2 << 1.0, 2.0, 2.0, 4.0;
  EXPECT_THROW(constant_gain_observer(g2, 1.0, 1.0, 0.0), ParameterError);
}

double envelope_oracle(double kappa, double nu, double omega, double e0, double t) {
  // E^2 = e0^2 exp(-2 kappa t) + omega^2 (1 - exp(-2 kappa t)) / (2 kappa nu)
  const double decay = std::exp(-2.0 * kappa * t);
  return std::sqrt(e0 * e0 * decay + omega * omega * (1.0 - decay) / (2.0 * kappa * nu));
}

ObserverConfig with_kappa(double kappa, double nu, double omega) {
  ObserverConfig cfg;
  cfg.nu = nu;
  cfg.alpha = kappa + 0.5 * nu;
  cfg.omega = omega;
  return cfg;
}

TEST(ErrorEnvelope, ZeroCase) {
  const auto cfg = with_kappa(1.0, 1.0, 0.0);
  for (double t : {0.0, 0.5, 10.0}) EXPECT_EQ(error_envelope(cfg, 0.0, t), 0.0);
}

TEST(ErrorEnvelope, LimitIsUltimateBound) {
  const auto cfg = with_kappa(1.0, 1.0, 1.0);
  EXPECT_NEAR(error_envelope(cfg, 0.0, 60.0), 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(ultimate_bound(cfg), 0.70711, 1e-5);
}

TEST(ErrorEnvelope, MatchesIndependentFormula) {
  const auto cfg = with_kappa(2.0, 1.0, 3.0);
  EXPECT_NEAR(error_envelope(cfg, 5.0, 0.5), envelope_oracle(2.0, 1.0, 3.0, 5.0, 0.5), 1e-12);
  EXPECT_DOUBLE_EQ(error_envelope(cfg, 5.0, 0.0), 5.0);
}

TEST(ErrorEnvelope, NonPositiveKappaThrows) {
  ObserverConfig cfg;
  cfg.alpha = 0.5;
  cfg.nu = 1.0;
  EXPECT_THROW(error_envelope(cfg, 1.0, 1.0), ParameterError);
}

TEST(UltimateBound, ZeroOmega) { EXPECT_EQ(ultimate_bound(with_kappa(3.0, 1.0, 0.0)), 0.0); }

TEST(ValidateGain, ScalarPlantPasses) {
  const auto cfg = constant_gain_observer(Matrix::Ones(1, 1), 2.0, 1.0, 0.0);
  const auto rep = validate_gain(cfg, scalar_plant(), {scalar(-1.0), scalar(0.0), scalar(3.0)});
  EXPECT_TRUE(rep.pass);
  EXPECT_NEAR(rep.min_decay, 2.0, 1e-12);
  EXPECT_NEAR(rep.worst_gain_margin, 0.0, 1e-12);
}

TEST(ValidateGain, FullColumnRankEqualityMargin) {
  Matrix g2(3, 2);
  g2 << 1.0, 0.0, 0.5, 1.0, 0.0, 2.0;
  ControlAffineSystem sys;
  sys.n = 3;
  sys.m = 1;
  sys.p = 2;
  sys.f = [](const Vector& x) { return Vector(-x); };
  sys.g1 = [](const Vector&) { return Matrix(Matrix::Ones(3, 1)); };
  sys.g2 = [g2](const Vector&) { return g2; };
  const auto cfg = constant_gain_observer(g2, 5.0, 1.0, 0.0);
  const auto rep = validate_gain(cfg, sys, {Vector::Zero(3), Vector::Ones(3)});
  EXPECT_TRUE(rep.pass);
  EXPECT_NEAR(rep.worst_gain_margin, 0.0, 1e-9);
}

TEST(ValidateGain, SignFlippedGainFails) {
  auto cfg = constant_gain_observer(Matrix::Ones(1, 1), 2.0, 1.0, 0.0);
  cfg.gain = [](const Vector&) { return Matrix(Matrix::Constant(1, 1, -2.0)); };
  cfg.p_fn = [](const Vector& x) { return Vector(-2.0 * x); };
  const auto rep = validate_gain(cfg, scalar_plant(), {scalar(0.0), scalar(1.0)});
  EXPECT_FALSE(rep.pass);
  EXPECT_LT(rep.worst_gain_margin, -3.9);
}

TEST(ValidateGain, JacobianMismatchFails) {
  auto cfg = constant_gain_observer(Matrix::Ones(1, 1), 2.0, 1.0, 0.0);
  cfg.p_fn = [](const Vector& x) { return Vector(3.0 * x); };
  const auto rep = validate_gain(cfg, scalar_plant(), {scalar(0.5)});
  EXPECT_FALSE(rep.pass);
  EXPECT_GT(rep.worst_jacobian_error, 0.1);
}

// Simulates the observer against ed' = -L_d g2 e_d - d' to confirm the error
// decays at rate alpha for a constant disturbance (exponential oracle) and
// diverges when the gain sign is flipped.
TEST(ObserverDynamics, ConstantDisturbanceDecaysAtAlpha) {
  const auto sys = scalar_plant();
  const double alpha = 3.0;
  const double d = 1.5;
  const auto cfg = constant_gain_observer(Matrix::Ones(1, 1), alpha, 1.0, 0.0);
  const Vector x0 = scalar(0.2);
  Vector state(2);
  state << x0[0], zero_estimate_state(cfg, x0).z[0];
  const OdeRhs rhs = [&](double, const Vector& s) {
    const Vector x = s.head(1);
    const Vector u = scalar(-x[0]);
    Vector out(2);
    out << sys.rhs(x, u, scalar(d))[0], z_derivative(cfg, ObserverState{s.tail(1)}, sys, x, u)[0];
    return out;
  };
  double t = 0.0;
  const double dt = 1e-3;
  for (int k = 0; k < 2000; ++k) {
    state = rk4_step(rhs, t, state, dt);
    t += dt;
  }
  const double err = estimate(cfg, ObserverState{state.tail(1)}, state.head(1))[0] - d;
  EXPECT_NEAR(err, -d * std::exp(-alpha * t), 1e-9);
  EXPECT_LE(std::abs(err), error_envelope(cfg, d, t) + 1e-3);
}

TEST(ObserverDynamics, SignFlippedGainDiverges) {
  const auto sys = scalar_plant();
  ObserverConfig cfg;
  cfg.gain = [](const Vector&) { return Matrix(Matrix::Constant(1, 1, -2.0)); };
  cfg.p_fn = [](const Vector& x) { return Vector(-2.0 * x); };
  Vector state(2);
  state << 0.0, 0.0;
  const OdeRhs rhs = [&](double, const Vector& s) {
    const Vector x = s.head(1);
    Vector out(2);
    out << sys.rhs(x, scalar(0.0), scalar(1.0))[0],
        z_derivative(cfg, ObserverState{s.tail(1)}, sys, x, scalar(0.0))[0];
    return out;
  };
  for (int k = 0; k < 2000; ++k) state = rk4_step(rhs, k * 1e-3, state, 1e-3);
  const double err = estimate(cfg, ObserverState{state.tail(1)}, state.head(1))[0] - 1.0;
  EXPECT_GT(std::abs(err), 10.0);
}

}  // namespace
}  // namespace dobcbf

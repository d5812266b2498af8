#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "dobcbf/core_model.hpp"

namespace dobcbf {

/// Nonlinear disturbance observer  d_hat = z + p(x),
/// z' = -L_d(x) (f + g1 u + g2 z + g2 p(x)).
///
/// `gain` must satisfy v' L_d g2 v >= alpha |v|^2 and dp/dx = L_d; both are
/// sampled by validate_gain(). `omega` bounds |d'|, `nu` is the Young split
/// used in the error bound, and kappa = alpha - nu/2 must be positive.
struct ObserverConfig {
  std::function<Matrix(const Vector&)> gain;
  std::function<Vector(const Vector&)> p_fn;
  double alpha = 1.0;
  double nu = 1.0;
  double omega = 0.0;

  double kappa() const { return alpha - 0.5 * nu; }
};

struct ObserverState {
  Vector z;
};

/// Observer for a constant, full-column-rank g2:
/// L_d = alpha (g2' g2)^{-1} g2' and p(x) = L_d x, so L_d g2 = alpha I.
ObserverConfig constant_gain_observer(const Matrix& g2, double alpha, double nu, double omega);

/// z(0) = -p(x0), so the initial estimate is zero.
ObserverState zero_estimate_state(const ObserverConfig& cfg, const Vector& x0);

Vector estimate(const ObserverConfig& cfg, const ObserverState& st, const Vector& x);

Vector z_derivative(const ObserverConfig& cfg, const ObserverState& st,
                    const ControlAffineSystem& sys, const Vector& x, const Vector& u);

/// E(t): bound on |e_d(t)| given |e_d(0)| = e0_norm.
double error_envelope(const ObserverConfig& cfg, double e0_norm, double t);

/// omega / sqrt(2 kappa nu), the limit of error_envelope as t -> inf.
double ultimate_bound(const ObserverConfig& cfg);

struct GainReport {
  bool pass = false;
  // min over samples of (v' L_d g2 v - alpha) for unit v; >= -tol passes.
  double worst_gain_margin = 0.0;
  // min over samples of v' L_d g2 v for unit v (the realized decay rate).
  double min_decay = 0.0;
  // worst relative mismatch between finite-difference dp/dx and L_d.
  double worst_jacobian_error = 0.0;
  int samples = 0;
};

struct GainCheckOptions {
  int vectors_per_state = 8;
  double gain_tol = 1e-9;
  double jacobian_tol = 1e-4;
  double fd_step = 1e-5;
  std::uint64_t seed = 1;
};

GainReport validate_gain(const ObserverConfig& cfg, const ControlAffineSystem& sys,
                         const std::vector<Vector>& sample_states,
                         const GainCheckOptions& opts = {});

}  // namespace dobcbf

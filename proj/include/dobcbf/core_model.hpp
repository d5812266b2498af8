#pragma once

#include <functional>
#include <span>
#include <vector>

#include "dobcbf/linalg.hpp"

namespace dobcbf {

/// Plant x' = f(x) + g1(x) u + g2(x) d with n states, m inputs and p
/// disturbance channels. Callbacks must be pure; their output shapes are
/// checked on every call through the accessors below.
struct ControlAffineSystem {
  int n = 0;
  int m = 0;
  int p = 0;
  std::function<Vector(const Vector&)> f;
  std::function<Matrix(const Vector&)> g1;
  std::function<Matrix(const Vector&)> g2;

  Vector drift(const Vector& x) const;
  Matrix input_matrix(const Vector& x) const;
  Matrix disturbance_matrix(const Vector& x) const;

  Vector rhs(const Vector& x, const Vector& u, const Vector& d) const;
};

/// A barrier h with the Lie-derivative callbacks needed by the filters.
///
/// For relative degree 1 only `h` and `grad_h` are used. For r >= 2,
/// `lie_f[k-1]` evaluates L_f^k h (k = 1..r), and `lie_g1_fr` / `lie_g2_fr`
/// evaluate L_{g1} L_f^{r-1} h (row of length m) and L_{g2} L_f^{r-1} h (row
/// of length p). `poles` holds lambda_1..lambda_r, all positive.
struct BarrierSpec {
  std::function<double(const Vector&)> h;
  std::function<RowVector(const Vector&)> grad_h;
  int relative_degree = 1;
  std::vector<std::function<double(const Vector&)>> lie_f;
  std::function<RowVector(const Vector&)> lie_g1_fr;
  std::function<RowVector(const Vector&)> lie_g2_fr;
  std::vector<double> poles;

  // Throws ConfigurationError or ParameterError for an unusable barrier.
  void validate() const;

  // L_f^k h for k = 0..r (k = 0 is h itself).
  double lie_f_power(const Vector& x, int k) const;
};

/// Coefficients a_1..a_r of lambda^r + a_1 lambda^{r-1} + ... + a_r.
struct PolynomialCoeffs {
  std::vector<double> a;

  int degree() const { return static_cast<int>(a.size()); }
  double evaluate(double lambda) const;
};

struct LieDerivatives {
  double lf = 0.0;
  RowVector lg1;
  RowVector lg2;
};

LieDerivatives lie_derivatives_rel1(const ControlAffineSystem& sys, const BarrierSpec& bar,
                                    const Vector& x);

/// Expands (lambda + lambda_1)...(lambda + lambda_r).
PolynomialCoeffs coeffs_from_poles(std::span<const double> poles);

/// s_0 = h, s_k = (d/dt + lambda_k) s_{k-1}, k = 0..r-1, evaluated through the
/// drift Lie derivatives (inputs do not enter below order r).
std::vector<double> s_sequence(const ControlAffineSystem& sys, const BarrierSpec& bar,
                               const Vector& x);

/// [L_f^{r-1} h, ..., L_f h, h]; requires r >= 2.
Vector eta(const ControlAffineSystem& sys, const BarrierSpec& bar, const Vector& x);

/// Worst per-coordinate relative error between grad_h and a central
/// difference of h. Diagnostic only.
double check_gradient(const BarrierSpec& bar, const Vector& x, double step = 1e-5);

}  // namespace dobcbf

#pragma once

#include <span>

#include "dobcbf/core_model.hpp"
#include "dobcbf/report.hpp"

namespace dobcbf {

enum class OmegaMode {
  kFull,     // constraint carries the omega^2 / (2 nu beta) term
  kNoOmega,  // term withheld; violation_floor() quantifies the cost
};

/// Tuning of the disturbance-observer CBF constraint. `alpha` is the
/// observer decay rate, `omega` the bound on |d'| that enters the
/// constraint. For r >= 2 the poles come from the BarrierSpec.
struct FilterParams {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;
  double nu = 1.0;
  double omega = 0.0;
  OmegaMode mode = OmegaMode::kFull;

  // alpha threshold: (gamma + nu)/2 for r = 1, (lambda_r + nu)/2 for r >= 2.
  double alpha_threshold(const BarrierSpec& bar) const;
  // omega^2 / (2 nu beta), or 0 in kNoOmega mode.
  double omega_term() const;
};

/// Row coefficients of the affine constraint psi0 + psi1 u >= 0.
struct ConstraintCoeffs {
  double psi0 = 0.0;
  RowVector psi1;
};

ConstraintCoeffs psi_rel1(const ControlAffineSystem& sys, const BarrierSpec& bar,
                          const FilterParams& fp, const Vector& x, const Vector& d_hat);

ConstraintCoeffs psi_relr(const ControlAffineSystem& sys, const BarrierSpec& bar,
                          const FilterParams& fp, const Vector& x, const Vector& d_hat);

/// beta h - |e_d|^2 / 2 (r = 1) or beta s_{r-1} - |e_d|^2 / 2 (r >= 2).
struct AugmentedBarrier {
  double value = 0.0;
};

AugmentedBarrier augmented_barrier(const ControlAffineSystem& sys, const BarrierSpec& bar,
                                   const FilterParams& fp, const Vector& x, const Vector& e_d);

/// Strict-inequality checks on (alpha, beta) plus s_k(x0) > 0 for r >= 2.
/// `s0` holds s_0..s_{r-1} at the initial state (just h(x0) for r = 1).
Report validate_params(const BarrierSpec& bar, const FilterParams& fp,
                       std::span<const double> s0, double e0_norm);

/// Worst case over |d| <= d_max: psi0 = L_f h - |L_{g2} h| d_max + gamma h.
ConstraintCoeffs robust_psi_rel1(const ControlAffineSystem& sys, const BarrierSpec& bar,
                                 double gamma, double d_max, const Vector& x);

/// -omega^2 / (2 nu gamma beta) (1 - exp(-gamma t)); only meaningful in kNoOmega mode.
double violation_floor(const FilterParams& fp, double t);

}  // namespace dobcbf

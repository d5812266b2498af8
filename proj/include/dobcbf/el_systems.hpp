#pragma once

#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "dobcbf/core_model.hpp"
#include "dobcbf/observer.hpp"
#include "dobcbf/report.hpp"
#include "dobcbf/safety_filter.hpp"

namespace dobcbf {

/// Euler-Lagrange plant  M(q) q'' + C(q, q') q' + G(q) = tau + tau_d.
struct ELSystem {
  int dof = 0;
  std::function<Matrix(const Vector&)> mass;
  std::function<Matrix(const Vector&, const Vector&)> coriolis;
  std::function<Vector(const Vector&)> gravity;

  Matrix M(const Vector& q) const;
  Matrix C(const Vector& q, const Vector& qd) const;
  Vector G(const Vector& q) const;
};

/// Planar two-link arm with uniform rods (mass m1, m2, common length l).
struct TwoLinkArm {
  double m1 = 1.0;
  double m2 = 1.0;
  double l = 1.0;
  double g_accel = 9.81;

  ELSystem system() const;
};

/// Position-only barrier h_q(q) with gradient J_q(q).
struct ELBarrier {
  std::function<double(const Vector&)> h;
  std::function<RowVector(const Vector&)> grad;
};

/// Disk barrier r^2 - |q|^2.
ELBarrier disk_barrier(double radius);

struct ELFilterParams {
  double alpha1 = 1.0;  // observer gain
  double mu1 = 1.0;     // lower eigenvalue bound of M^{-1}
  double beta = 1.0;
  double gamma = 1.0;
  double nu = 1.0;
  double omega = 0.0;   // bound entering the constraint
  double eps_singular = 1e-4;
  OmegaMode mode = OmegaMode::kFull;

  // Effective observer decay rate alpha1 * mu1.
  double alpha() const { return alpha1 * mu1; }
};

/// q'' = M^{-1} (tau + tau_d - C q' - G).
Vector el_accel(const ELSystem& sys, const Vector& q, const Vector& qd, const Vector& tau,
                const Vector& tau_d);

Vector el_dob_estimate(const ELFilterParams& fp, const Vector& z, const Vector& qd);

/// z' = -alpha1 M^{-1} (z + alpha1 q' - C q' - G + tau).
Vector el_dob_rhs(const ELSystem& sys, const ELFilterParams& fp, const Vector& z,
                  const Vector& q, const Vector& qd, const Vector& tau);

/// (min, max) eigenvalue of M^{-1}(q) over the grid. Throws ModelError when
/// M is not symmetric positive definite somewhere.
std::pair<double, double> mu_bounds(const ELSystem& sys, const std::vector<Vector>& q_grid);

/// Configurations (0, q2) for q2 evenly spaced on [-pi, pi], endpoints included.
std::vector<Vector> planar_q2_grid(int count);

ConstraintCoeffs el_psi(const ELSystem& sys, const ELBarrier& bar, const ELFilterParams& fp,
                        const Vector& q, const Vector& qd, const Vector& tau_hat);

/// Worst-case baseline for the energy-shaped barrier beta h_q - q'M q'/2:
/// psi0 = beta q' J + q' G - |q'| d_max + gamma (beta h_q - q'M q'/2), psi1 = -q'.
ConstraintCoeffs el_robust_psi(const ELSystem& sys, const ELBarrier& bar, double beta,
                               double gamma, double d_max, const Vector& q, const Vector& qd);

/// N constraints sharing psi1 collapse to one with the smallest psi0.
ConstraintCoeffs multi_constraint_reduce(std::span<const double> psi0s, const RowVector& psi1);

struct PdGains {
  Vector kp;
  Vector kd;
};

/// Kp (q_ref - q) + Kd (qd_ref - qd), plus G(q) when `gravity` is given.
Vector pd_nominal(const PdGains& gains, const Vector& q, const Vector& qd, const Vector& q_ref,
                  const Vector& qd_ref, const std::optional<Vector>& gravity = std::nullopt);

struct GuardDecision {
  bool bypass = false;            // skip the QP and apply the nominal torque
  bool infeasible_event = false;  // bypassed while psi0 < 0
};

GuardDecision singularity_guard(const ELFilterParams& fp, const Vector& qd, double psi0);

/// beta h_q - q'M q'/2 - |tau_tilde|^2/2.
double el_augmented_barrier(const ELSystem& sys, const ELBarrier& bar, double beta,
                            const Vector& q, const Vector& qd, const Vector& tau_tilde);

/// State x = (q, q'); u = tau; d = tau_d.
ControlAffineSystem el_as_control_affine(const ELSystem& sys);

/// The EL observer written in the generic form: p(x) = alpha1 q', L_d = [0, alpha1 I].
/// `alpha` of the returned config is alpha1 * mu1.
ObserverConfig el_observer_config(const ELSystem& sys, const ELFilterParams& fp, double omega_bound);

/// v'(M' - 2C)v with M' = dM/dq q' by central differences.
double skew_residual(const ELSystem& sys, const Vector& q, const Vector& qd, const Vector& v,
                     double step = 1e-6);

struct ModelCheckOptions {
  int samples = 200;
  double q_box = 3.14159265358979;
  double qd_box = 10.0;
  double skew_tol = 1e-6;
  std::uint64_t seed = 1;
};

/// Sampled SPD, symmetry, eigenvalue-bound and skew-symmetry checks.
Report validate_el_model(const ELSystem& sys, double mu1, double mu2,
                         const ModelCheckOptions& opts = {});

}  // namespace dobcbf

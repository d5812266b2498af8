#include "dobcbf/el_systems.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace dobcbf {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

Vector solve_mass(const ELSystem& sys, const Vector& q, const Vector& rhs) {
  const Matrix m = sys.M(q);
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) {
    std::ostringstream os;
    os << "inertia matrix is not positive definite at q = [" << q.transpose() << "]";
    throw NumericalError(os.str());
  }
  return llt.solve(rhs);
}

}  // namespace

Matrix ELSystem::M(const Vector& q) const {
  require_dim(q, dof, "q");
  Matrix out = mass(q);
  require_shape(out, dof, dof, "M(q)");
  return out;
}

Matrix ELSystem::C(const Vector& q, const Vector& qd) const {
  require_dim(q, dof, "q");
  require_dim(qd, dof, "qd");
  Matrix out = coriolis(q, qd);
  require_shape(out, dof, dof, "C(q, qd)");
  return out;
}

Vector ELSystem::G(const Vector& q) const {
  require_dim(q, dof, "q");
  Vector out = gravity(q);
  require_dim(out, dof, "G(q)");
  return out;
}

ELSystem TwoLinkArm::system() const {
  const TwoLinkArm arm = *this;
  ELSystem sys;
  sys.dof = 2;
  sys.mass = [arm](const Vector& q) {
    const double l2 = arm.l * arm.l;
    const double c2 = std::cos(q[1]);
    Matrix m(2, 2);
    m(0, 0) = arm.m1 * l2 / 3.0 + 4.0 * arm.m2 * l2 / 3.0 + arm.m2 * l2 * c2;
    m(0, 1) = arm.m2 * l2 / 3.0 + arm.m2 * l2 / 2.0 * c2;
    m(1, 0) = m(0, 1);
    m(1, 1) = arm.m2 * l2 / 3.0;
    return m;
  };
  sys.coriolis = [arm](const Vector& q, const Vector& qd) {
    const double k = arm.m2 * arm.l * arm.l / 2.0 * std::sin(q[1]);
    Matrix c(2, 2);
    c(0, 0) = -k * qd[1];
    c(0, 1) = -k * (qd[0] + qd[1]);
    c(1, 0) = k * qd[0];
    c(1, 1) = 0.0;
    return c;
  };
  sys.gravity = [arm](const Vector& q) {
    const double c1 = std::cos(q[0]);
    const double c12 = std::cos(q[0] + q[1]);
    Vector g(2);
    g[0] = arm.m1 * arm.g_accel * arm.l / 2.0 * c1 + arm.m2 * arm.g_accel * arm.l / 2.0 * c12 +
           arm.m2 * arm.g_accel * arm.l * c1;
    g[1] = arm.m2 * arm.g_accel * arm.l / 2.0 * c12;
    return g;
  };
  return sys;
}

ELBarrier disk_barrier(double radius) {
  const double r2 = radius * radius;
  return ELBarrier{[r2](const Vector& q) { return r2 - q.squaredNorm(); },
                   [](const Vector& q) { return RowVector(-2.0 * q.transpose()); }};
}

Vector el_accel(const ELSystem& sys, const Vector& q, const Vector& qd, const Vector& tau,
                const Vector& tau_d) {
  require_dim(tau, sys.dof, "tau");
  require_dim(tau_d, sys.dof, "tau_d");
  return solve_mass(sys, q, tau + tau_d - sys.C(q, qd) * qd - sys.G(q));
}

Vector el_dob_estimate(const ELFilterParams& fp, const Vector& z, const Vector& qd) {
  require_dim(z, qd.size(), "z");
  return z + fp.alpha1 * qd;
}

Vector el_dob_rhs(const ELSystem& sys, const ELFilterParams& fp, const Vector& z,
                  const Vector& q, const Vector& qd, const Vector& tau) {
  require_dim(z, sys.dof, "z");
  require_dim(tau, sys.dof, "tau");
  const Vector bracket = z + fp.alpha1 * qd - sys.C(q, qd) * qd - sys.G(q) + tau;
  return -fp.alpha1 * solve_mass(sys, q, bracket);
}

std::pair<double, double> mu_bounds(const ELSystem& sys, const std::vector<Vector>& q_grid) {
  if (q_grid.empty()) throw ParameterError("mu_bounds needs a nonempty grid");
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (const Vector& q : q_grid) {
    const Matrix m = sys.M(q);
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff())) {
      throw ModelError("inertia matrix is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
    const double lmin = eig.eigenvalues().minCoeff();
    const double lmax = eig.eigenvalues().maxCoeff();
    if (!(lmin > 0.0)) {
      std::ostringstream os;
      os << "inertia matrix is not positive definite at q = [" << q.transpose() << "]";
      throw ModelError(os.str());
    }
    // Eigenvalues of M^{-1} are reciprocals.
    lo = std::min(lo, 1.0 / lmax);
    hi = std::max(hi, 1.0 / lmin);
  }
  return {lo, hi};
}

std::vector<Vector> planar_q2_grid(int count) {
  if (count < 2) throw ParameterError("grid needs at least two points");
  std::vector<Vector> grid;
  grid.reserve(count);
  const double pi = std::numbers::pi;
  for (int i = 0; i < count; ++i) {
    Vector q(2);
    q << 0.0, -pi + 2.0 * pi * i / (count - 1);
    grid.push_back(q);
  }
  return grid;
}

ConstraintCoeffs el_psi(const ELSystem& sys, const ELBarrier& bar, const ELFilterParams& fp,
                        const Vector& q, const Vector& qd, const Vector& tau_hat) {
  require_dim(tau_hat, sys.dof, "tau_hat");
  const double alpha = fp.alpha();
  const double den = 4.0 * alpha - 2.0 * fp.gamma - 2.0 * fp.nu;
  if (!(den > 0.0)) {
    throw ParameterError("EL filter needs 4 alpha - 2 gamma - 2 nu > 0 with alpha = alpha1 mu1 = " +
                         fmt(alpha));
  }
  if (!(fp.nu > 0.0) || !(fp.beta > 0.0)) throw ParameterError("EL filter needs beta, nu > 0");
  const RowVector grad = bar.grad(q);
  require_dim(grad, sys.dof, "J_q");
  const double omega_term =
      fp.mode == OmegaMode::kFull ? fp.omega * fp.omega / (2.0 * fp.nu) : 0.0;
  const double kinetic = 0.5 * qd.dot(sys.M(q) * qd);

  ConstraintCoeffs out;
  out.psi0 = fp.beta * grad.dot(qd) - qd.dot(tau_hat - sys.G(q)) - omega_term -
             qd.squaredNorm() / den + fp.gamma * (fp.beta * bar.h(q) - kinetic);
  out.psi1 = -qd.transpose();
  return out;
}

ConstraintCoeffs el_robust_psi(const ELSystem& sys, const ELBarrier& bar, double beta,
                               double gamma, double d_max, const Vector& q, const Vector& qd) {
  if (d_max < 0.0) throw ParameterError("robust bound d_max must be >= 0");
  const RowVector grad = bar.grad(q);
  require_dim(grad, sys.dof, "J_q");
  const double kinetic = 0.5 * qd.dot(sys.M(q) * qd);
  ConstraintCoeffs out;
  out.psi0 = beta * grad.dot(qd) + qd.dot(sys.G(q)) - qd.norm() * d_max +
             gamma * (beta * bar.h(q) - kinetic);
  out.psi1 = -qd.transpose();
  return out;
}

ConstraintCoeffs multi_constraint_reduce(std::span<const double> psi0s, const RowVector& psi1) {
  if (psi0s.empty()) throw ParameterError("multi_constraint_reduce needs at least one constraint");
  return ConstraintCoeffs{*std::min_element(psi0s.begin(), psi0s.end()), psi1};
}

Vector pd_nominal(const PdGains& gains, const Vector& q, const Vector& qd, const Vector& q_ref,
                  const Vector& qd_ref, const std::optional<Vector>& gravity) {
  const auto n = q.size();
  require_dim(qd, n, "qd");
  require_dim(q_ref, n, "q_ref");
  require_dim(qd_ref, n, "qd_ref");
  require_dim(gains.kp, n, "Kp");
  require_dim(gains.kd, n, "Kd");
  Vector tau = gains.kp.cwiseProduct(q_ref - q) + gains.kd.cwiseProduct(qd_ref - qd);
  if (gravity) {
    require_dim(*gravity, n, "G(q)");
    tau += *gravity;
  }
  return tau;
}

GuardDecision singularity_guard(const ELFilterParams& fp, const Vector& qd, double psi0) {
  GuardDecision d;
  if (qd.norm() < fp.eps_singular) {
    d.bypass = true;
    d.infeasible_event = psi0 < 0.0;
  }
  return d;
}

double el_augmented_barrier(const ELSystem& sys, const ELBarrier& bar, double beta,
                            const Vector& q, const Vector& qd, const Vector& tau_tilde) {
  return beta * bar.h(q) - 0.5 * qd.dot(sys.M(q) * qd) - 0.5 * tau_tilde.squaredNorm();
}

ControlAffineSystem el_as_control_affine(const ELSystem& sys) {
  const int n = sys.dof;
  ControlAffineSystem out;
  out.n = 2 * n;
  out.m = n;
  out.p = n;
  out.f = [sys, n](const Vector& x) {
    const Vector q = x.head(n);
    const Vector qd = x.tail(n);
    Vector dx(2 * n);
    dx.head(n) = qd;
    dx.tail(n) = solve_mass(sys, q, -sys.C(q, qd) * qd - sys.G(q));
    return dx;
  };
  auto inv_mass_block = [sys, n](const Vector& x) {
    const Vector q = x.head(n);
    Matrix g = Matrix::Zero(2 * n, n);
    const Matrix m = sys.M(q);
    g.bottomRows(n) = m.llt().solve(Matrix::Identity(n, n));
    return g;
  };
  out.g1 = inv_mass_block;
  out.g2 = inv_mass_block;
  return out;
}

ObserverConfig el_observer_config(const ELSystem& sys, const ELFilterParams& fp,
                                  double omega_bound) {
  const int n = sys.dof;
  const double a1 = fp.alpha1;
  ObserverConfig cfg;
  cfg.gain = [n, a1](const Vector&) {
    Matrix l = Matrix::Zero(n, 2 * n);
    l.rightCols(n) = a1 * Matrix::Identity(n, n);
    return l;
  };
  cfg.p_fn = [n, a1](const Vector& x) { return Vector(a1 * x.tail(n)); };
  cfg.alpha = fp.alpha();
  cfg.nu = fp.nu;
  cfg.omega = omega_bound;
  return cfg;
}

double skew_residual(const ELSystem& sys, const Vector& q, const Vector& qd, const Vector& v,
                     double step) {
  const Matrix mdot = (sys.M(q + step * qd) - sys.M(q - step * qd)) / (2.0 * step);
  return v.dot((mdot - 2.0 * sys.C(q, qd)) * v);
}

Report validate_el_model(const ELSystem& sys, double mu1, double mu2,
                         const ModelCheckOptions& opts) {
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> uq(-opts.q_box, opts.q_box);
  std::uniform_real_distribution<double> uqd(-opts.qd_box, opts.qd_box);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n = sys.dof;

  double worst_sym = 0.0;
  double worst_eig_margin = std::numeric_limits<double>::infinity();
  double worst_skew = 0.0;  // max of residual / (|v|^2 (1 + |qd|))
  for (int s = 0; s < opts.samples; ++s) {
    Vector q(n), qd(n), v(n);
    for (int i = 0; i < n; ++i) {
      q[i] = uq(rng);
      qd[i] = uqd(rng);
      v[i] = normal(rng);
    }
    const Matrix m = sys.M(q);
    worst_sym = std::max(worst_sym, (m - m.transpose()).cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
    const Vector inv_eigs = eig.eigenvalues().cwiseInverse();
    const double margin =
        std::min(inv_eigs.minCoeff() - mu1, mu2 - inv_eigs.maxCoeff()) /
        std::max(1.0, mu2);
    worst_eig_margin = std::min(worst_eig_margin, margin);
    const double res = std::abs(skew_residual(sys, q, qd, v, 1e-5));
    worst_skew = std::max(worst_skew, res / (v.squaredNorm() * (1.0 + qd.norm())));
  }

  Report rep;
  rep.add({"mass_symmetric", worst_sym <= 1e-12, -worst_sym,
           "max |M - M'| = " + fmt(worst_sym)});
  rep.add({"mass_inverse_bounds", worst_eig_margin >= -1e-9, worst_eig_margin,
           "mu1 I <= M^{-1} <= mu2 I at sampled q (mu1=" + fmt(mu1) + ", mu2=" + fmt(mu2) + ")"});
  rep.add({"skew_symmetry", worst_skew <= opts.skew_tol, opts.skew_tol - worst_skew,
           "max |v'(Mdot - 2C)v| / (|v|^2 (1 + |qd|)) = " + fmt(worst_skew)});
  return rep;
}

}  // namespace dobcbf

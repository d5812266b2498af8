#include "dobcbf/safety_filter.hpp"

#include <cmath>
#include <sstream>

namespace dobcbf {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

// 4 alpha - 2 rate - 2 nu, rate = gamma (r = 1) or lambda_r (r >= 2).
double young_denominator(const FilterParams& fp, double rate) {
  const double den = 4.0 * fp.alpha - 2.0 * rate - 2.0 * fp.nu;
  if (!(den > 0.0)) {
    throw ParameterError("filter needs 4 alpha - 2 rate - 2 nu > 0, got " + fmt(den));
  }
  if (!(fp.beta > 0.0)) throw ParameterError("filter needs beta > 0");
  if (!(fp.nu > 0.0)) throw ParameterError("filter needs nu > 0");
  if (fp.omega < 0.0) throw ParameterError("filter needs omega >= 0");
  return den;
}

}  // namespace

double FilterParams::alpha_threshold(const BarrierSpec& bar) const {
  const double rate = bar.relative_degree == 1 ? gamma : bar.poles.back();
  return 0.5 * (rate + nu);
}

double FilterParams::omega_term() const {
  if (mode == OmegaMode::kNoOmega) return 0.0;
  return omega * omega / (2.0 * nu * beta);
}

ConstraintCoeffs psi_rel1(const ControlAffineSystem& sys, const BarrierSpec& bar,
                          const FilterParams& fp, const Vector& x, const Vector& d_hat) {
  require_dim(d_hat, sys.p, "d_hat");
  if (!(fp.gamma > 0.0)) throw ParameterError("filter needs gamma > 0");
  const double den = young_denominator(fp, fp.gamma);
  const LieDerivatives lie = lie_derivatives_rel1(sys, bar, x);
  ConstraintCoeffs out;
  out.psi0 = lie.lf + lie.lg2.dot(d_hat) - fp.omega_term() -
             fp.beta * lie.lg2.squaredNorm() / den + fp.gamma * bar.h(x);
  out.psi1 = lie.lg1;
  return out;
}

ConstraintCoeffs psi_relr(const ControlAffineSystem& sys, const BarrierSpec& bar,
                          const FilterParams& fp, const Vector& x, const Vector& d_hat) {
  bar.validate();
  const int r = bar.relative_degree;
  if (r < 2) throw ConfigurationError("psi_relr needs relative degree >= 2");
  require_dim(d_hat, sys.p, "d_hat");
  require_dim(x, sys.n, "state");
  const double den = young_denominator(fp, bar.poles.back());

  const PolynomialCoeffs a = coeffs_from_poles(bar.poles);
  const Vector eta_x = eta(sys, bar, x);
  const RowVector lg1 = bar.lie_g1_fr(x);
  const RowVector lg2 = bar.lie_g2_fr(x);
  require_dim(lg1, sys.m, "L_{g1} L_f^{r-1} h");
  require_dim(lg2, sys.p, "L_{g2} L_f^{r-1} h");

  double a_eta = 0.0;
  for (int k = 0; k < r; ++k) a_eta += a.a[k] * eta_x[k];

  ConstraintCoeffs out;
  out.psi0 = bar.lie_f_power(x, r) + lg2.dot(d_hat) - fp.omega_term() -
             fp.beta * lg2.squaredNorm() / den + a_eta;
  out.psi1 = lg1;
  return out;
}

AugmentedBarrier augmented_barrier(const ControlAffineSystem& sys, const BarrierSpec& bar,
                                   const FilterParams& fp, const Vector& x, const Vector& e_d) {
  const double base =
      bar.relative_degree == 1 ? bar.h(x) : s_sequence(sys, bar, x).back();
  return AugmentedBarrier{fp.beta * base - 0.5 * e_d.squaredNorm()};
}

Report validate_params(const BarrierSpec& bar, const FilterParams& fp,
                       std::span<const double> s0, double e0_norm) {
  Report rep;
  const int r = bar.relative_degree;
  const double thr = fp.alpha_threshold(bar);
  rep.add({"alpha_bound", fp.alpha > thr, fp.alpha - thr,
           "alpha=" + fmt(fp.alpha) + " must exceed " + fmt(thr)});

  if (static_cast<int>(s0.size()) != r) {
    throw DimensionError("validate_params needs s_0..s_{r-1} at the initial state");
  }
  if (r >= 2) {
    for (int k = 0; k < r; ++k) {
      rep.add({"s" + std::to_string(k) + "_positive", s0[k] > 0.0, s0[k],
               "s_" + std::to_string(k) + "(x0)=" + fmt(s0[k])});
    }
  }
  const double base = s0[r - 1];
  if (base > 0.0) {
    const double need = e0_norm * e0_norm / (2.0 * base);
    rep.add({"beta_bound", fp.beta > need, fp.beta - need,
             "beta=" + fmt(fp.beta) + " must exceed " + fmt(need)});
  } else {
    rep.add({"beta_bound", false, base, "initial barrier value must be positive"});
  }
  return rep;
}

ConstraintCoeffs robust_psi_rel1(const ControlAffineSystem& sys, const BarrierSpec& bar,
                                 double gamma, double d_max, const Vector& x) {
  if (d_max < 0.0) throw ParameterError("robust bound d_max must be >= 0");
  const LieDerivatives lie = lie_derivatives_rel1(sys, bar, x);
  ConstraintCoeffs out;
  out.psi0 = lie.lf - lie.lg2.norm() * d_max + gamma * bar.h(x);
  out.psi1 = lie.lg1;
  return out;
}

double violation_floor(const FilterParams& fp, double t) {
  if (fp.mode != OmegaMode::kNoOmega) {
    throw NotApplicableError("violation_floor applies only when the omega term is withheld");
  }
  if (!(fp.gamma > 0.0 && fp.nu > 0.0 && fp.beta > 0.0)) {
    throw ParameterError("violation_floor needs gamma, nu, beta > 0");
  }
  const double limit = fp.omega * fp.omega / (2.0 * fp.nu * fp.gamma * fp.beta);
  return -limit * (1.0 - std::exp(-fp.gamma * t));
}

}  // namespace dobcbf

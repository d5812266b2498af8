#include "dobcbf/observer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace dobcbf {

namespace {

void require_positive_kappa(const ObserverConfig& cfg) {
  if (!(cfg.kappa() > 0.0)) {
    throw ParameterError("observer needs kappa = alpha - nu/2 > 0 (alpha=" +
                         std::to_string(cfg.alpha) + ", nu=" + std::to_string(cfg.nu) + ")");
  }
  if (!(cfg.nu > 0.0)) throw ParameterError("observer needs nu > 0");
  if (cfg.omega < 0.0) throw ParameterError("observer needs omega >= 0");
}

Vector eval_p(const ObserverConfig& cfg, const ControlAffineSystem& sys, const Vector& x) {
  Vector p = cfg.p_fn(x);
  require_dim(p, sys.p, "p(x)");
  return p;
}

}  // namespace

ObserverConfig constant_gain_observer(const Matrix& g2, double alpha, double nu, double omega) {
  if (g2.cols() == 0 || g2.rows() < g2.cols()) {
    throw DimensionError("constant_gain_observer needs a tall g2");
  }
  const Eigen::ColPivHouseholderQR<Matrix> qr(g2);
  if (qr.rank() < g2.cols()) throw ParameterError("g2 must have full column rank");
  const Matrix gtg = g2.transpose() * g2;
  const Matrix l = alpha * gtg.ldlt().solve(g2.transpose());
  ObserverConfig cfg;
  cfg.gain = [l](const Vector&) { return l; };
  cfg.p_fn = [l](const Vector& x) { return Vector(l * x); };
  cfg.alpha = alpha;
  cfg.nu = nu;
  cfg.omega = omega;
  return cfg;
}

ObserverState zero_estimate_state(const ObserverConfig& cfg, const Vector& x0) {
  return ObserverState{-cfg.p_fn(x0)};
}

Vector estimate(const ObserverConfig& cfg, const ObserverState& st, const Vector& x) {
  const Vector p = cfg.p_fn(x);
  require_dim(p, st.z.size(), "p(x)");
  return st.z + p;
}

Vector z_derivative(const ObserverConfig& cfg, const ObserverState& st,
                    const ControlAffineSystem& sys, const Vector& x, const Vector& u) {
  require_dim(st.z, sys.p, "observer z");
  require_dim(u, sys.m, "control");
  const Matrix gain = cfg.gain(x);
  require_shape(gain, sys.p, sys.n, "L_d(x)");
  const Matrix g2 = sys.disturbance_matrix(x);
  const Vector bracket =
      sys.drift(x) + sys.input_matrix(x) * u + g2 * st.z + g2 * eval_p(cfg, sys, x);
  return -gain * bracket;
}

double error_envelope(const ObserverConfig& cfg, double e0_norm, double t) {
  require_positive_kappa(cfg);
  if (e0_norm < 0.0 || t < 0.0) throw ParameterError("error_envelope needs e0 >= 0 and t >= 0");
  const double k = cfg.kappa();
  const double w2 = cfg.omega * cfg.omega;
  const double decay = std::exp(-2.0 * k * t);
  const double num = 2.0 * k * cfg.nu * e0_norm * e0_norm * decay - w2 * decay + w2;
  return std::sqrt(std::max(0.0, num / (2.0 * k * cfg.nu)));
}

double ultimate_bound(const ObserverConfig& cfg) {
  require_positive_kappa(cfg);
  return cfg.omega / std::sqrt(2.0 * cfg.kappa() * cfg.nu);
}

GainReport validate_gain(const ObserverConfig& cfg, const ControlAffineSystem& sys,
                         const std::vector<Vector>& sample_states, const GainCheckOptions& opts) {
  if (sample_states.empty()) throw ParameterError("validate_gain needs at least one sample state");
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  GainReport rep;
  rep.worst_gain_margin = std::numeric_limits<double>::infinity();
  rep.min_decay = std::numeric_limits<double>::infinity();
  for (const Vector& x : sample_states) {
    const Matrix gain = cfg.gain(x);
    require_shape(gain, sys.p, sys.n, "L_d(x)");
    const Matrix lg2 = gain * sys.disturbance_matrix(x);
    for (int k = 0; k < opts.vectors_per_state; ++k) {
      Vector v(sys.p);
      for (int i = 0; i < sys.p; ++i) v[i] = normal(rng);
      const double norm = v.norm();
      if (norm == 0.0) continue;
      v /= norm;
      const double decay = v.dot(lg2 * v);
      rep.min_decay = std::min(rep.min_decay, decay);
      rep.worst_gain_margin = std::min(rep.worst_gain_margin, decay - cfg.alpha);
    }

    // Central-difference Jacobian of p against L_d.
    Matrix jac(sys.p, sys.n);
    Vector probe = x;
    for (int j = 0; j < sys.n; ++j) {
      probe[j] = x[j] + opts.fd_step;
      const Vector up = eval_p(cfg, sys, probe);
      probe[j] = x[j] - opts.fd_step;
      const Vector down = eval_p(cfg, sys, probe);
      probe[j] = x[j];
      jac.col(j) = (up - down) / (2.0 * opts.fd_step);
    }
    const double scale = std::max(1.0, gain.cwiseAbs().maxCoeff());
    rep.worst_jacobian_error =
        std::max(rep.worst_jacobian_error, (jac - gain).cwiseAbs().maxCoeff() / scale);
    ++rep.samples;
  }
  rep.pass = rep.worst_gain_margin >= -opts.gain_tol &&
             rep.worst_jacobian_error <= opts.jacobian_tol;
  return rep;
}

}  // namespace dobcbf

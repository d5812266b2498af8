#include "dobcbf/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dobcbf {

Vector ControlAffineSystem::drift(const Vector& x) const {
  require_dim(x, n, "state");
  Vector out = f(x);
  require_dim(out, n, "f(x)");
  return out;
}

Matrix ControlAffineSystem::input_matrix(const Vector& x) const {
  require_dim(x, n, "state");
  Matrix out = g1(x);
  require_shape(out, n, m, "g1(x)");
  return out;
}

Matrix ControlAffineSystem::disturbance_matrix(const Vector& x) const {
  require_dim(x, n, "state");
  Matrix out = g2(x);
  require_shape(out, n, p, "g2(x)");
  return out;
}

Vector ControlAffineSystem::rhs(const Vector& x, const Vector& u, const Vector& d) const {
  require_dim(u, m, "control");
  require_dim(d, p, "disturbance");
  return drift(x) + input_matrix(x) * u + disturbance_matrix(x) * d;
}

void BarrierSpec::validate() const {
  if (relative_degree < 1) {
    throw ConfigurationError("barrier relative degree must be >= 1");
  }
  if (!h) throw ConfigurationError("barrier is missing h");
  if (relative_degree == 1) {
    if (!grad_h) throw ConfigurationError("relative-degree-1 barrier is missing grad_h");
    return;
  }
  if (static_cast<int>(lie_f.size()) < relative_degree) {
    throw ConfigurationError("barrier of relative degree " + std::to_string(relative_degree) +
                             " needs L_f^k h callbacks for k = 1.." +
                             std::to_string(relative_degree));
  }
  for (const auto& cb : lie_f) {
    if (!cb) throw ConfigurationError("barrier has an empty L_f^k h callback");
  }
  if (!lie_g1_fr || !lie_g2_fr) {
    throw ConfigurationError("barrier is missing L_g L_f^{r-1} h callbacks");
  }
  if (static_cast<int>(poles.size()) != relative_degree) {
    throw ConfigurationError("barrier needs exactly r poles");
  }
  for (double l : poles) {
    if (!(l > 0.0)) throw ParameterError("barrier poles must be positive");
  }
}

double BarrierSpec::lie_f_power(const Vector& x, int k) const {
  if (k == 0) return h(x);
  if (k < 0 || k > static_cast<int>(lie_f.size()) || !lie_f[k - 1]) {
    throw ConfigurationError("missing L_f^" + std::to_string(k) + " h callback");
  }
  return lie_f[k - 1](x);
}

double PolynomialCoeffs::evaluate(double lambda) const {
  double acc = 1.0;
  for (double ak : a) acc = acc * lambda + ak;
  return acc;
}

LieDerivatives lie_derivatives_rel1(const ControlAffineSystem& sys, const BarrierSpec& bar,
                                    const Vector& x) {
  if (bar.relative_degree != 1) {
    throw ConfigurationError("lie_derivatives_rel1 needs a relative-degree-1 barrier");
  }
  if (!bar.grad_h) throw ConfigurationError("barrier is missing grad_h");
  const RowVector grad = bar.grad_h(x);
  require_dim(grad, sys.n, "grad_h(x)");
  LieDerivatives out;
  out.lf = grad.dot(sys.drift(x));
  out.lg1 = grad * sys.input_matrix(x);
  out.lg2 = grad * sys.disturbance_matrix(x);
  return out;
}

namespace {

// Coefficients of prod_k (lambda + poles[k]) highest power first, leading 1
// included: c[0] = 1, c[j] = e_j(poles).
std::vector<double> expand(std::span<const double> poles) {
  std::vector<double> c{1.0};
  for (double root : poles) {
    std::vector<double> next(c.size() + 1, 0.0);
    for (std::size_t j = 0; j < c.size(); ++j) {
      next[j] += c[j];
      next[j + 1] += root * c[j];
    }
    c = std::move(next);
  }
  return c;
}

}  // namespace

PolynomialCoeffs coeffs_from_poles(std::span<const double> poles) {
  if (poles.empty()) throw ParameterError("coeffs_from_poles needs at least one pole");
  for (double l : poles) {
    if (!(l > 0.0)) throw ParameterError("poles must be positive, got " + std::to_string(l));
  }
  const auto c = expand(poles);
  return PolynomialCoeffs{std::vector<double>(c.begin() + 1, c.end())};
}

std::vector<double> s_sequence(const ControlAffineSystem& sys, const BarrierSpec& bar,
                               const Vector& x) {
  require_dim(x, sys.n, "state");
  const int r = bar.relative_degree;
  if (r < 1) throw ConfigurationError("barrier relative degree must be >= 1");
  std::vector<double> lie(r);
  for (int k = 0; k < r; ++k) lie[k] = bar.lie_f_power(x, k);

  std::vector<double> s(r);
  for (int k = 0; k < r; ++k) {
    // (D + lambda_1)...(D + lambda_k) h = sum_j c[k-j] L_f^j h.
    const auto c = expand(std::span<const double>(bar.poles.data(), k));
    double acc = 0.0;
    for (int j = 0; j <= k; ++j) acc += c[k - j] * lie[j];
    s[k] = acc;
  }
  return s;
}

Vector eta(const ControlAffineSystem& sys, const BarrierSpec& bar, const Vector& x) {
  const int r = bar.relative_degree;
  if (r < 2) throw ConfigurationError("eta is defined for relative degree >= 2");
  require_dim(x, sys.n, "state");
  Vector out(r);
  for (int k = 0; k < r; ++k) out[k] = bar.lie_f_power(x, r - 1 - k);
  return out;
}

double check_gradient(const BarrierSpec& bar, const Vector& x, double step) {
  if (!(step > 0.0)) throw ParameterError("finite-difference step must be positive");
  const RowVector grad = bar.grad_h(x);
  require_dim(grad, x.size(), "grad_h(x)");
  double worst = 0.0;
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + step;
    const double up = bar.h(probe);
    probe[i] = x[i] - step;
    const double down = bar.h(probe);
    probe[i] = x[i];
    const double fd = (up - down) / (2.0 * step);
    const double err = std::abs(fd - grad[i]) / std::max(1.0, std::abs(grad[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace dobcbf

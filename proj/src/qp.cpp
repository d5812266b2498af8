#include "dobcbf/qp.hpp"

#include <cmath>
#include <limits>

namespace dobcbf {

std::string_view to_string(QpStatus s) {
  switch (s) {
    case QpStatus::kInactive:
      return "inactive";
    case QpStatus::kActive:
      return "active";
    case QpStatus::kInfeasible:
      return "infeasible";
  }
  return "unknown";
}

QpResult solve(const QpInstance& inst) {
  require_dim(inst.psi1, inst.u_nom.size(), "psi1");
  if (!std::isfinite(inst.psi0) || !inst.u_nom.allFinite() || !inst.psi1.allFinite()) {
    throw InputError("QP data must be finite");
  }
  QpResult out;
  const double slack = inst.psi0 + inst.psi1.dot(inst.u_nom);
  if (slack >= 0.0) {
    out.u = inst.u_nom;
    out.status = QpStatus::kInactive;
    out.constraint_value = slack;
    return out;
  }
  const double n2 = inst.psi1.squaredNorm();
  if (n2 == 0.0) {
    out.u = inst.u_nom;
    out.status = QpStatus::kInfeasible;
    out.constraint_value = slack;
    return out;
  }
  out.u = inst.u_nom - (slack / n2) * inst.psi1.transpose();
  out.status = QpStatus::kActive;
  out.constraint_value = inst.psi0 + inst.psi1.dot(out.u);
  return out;
}

std::optional<Vector> brute_force(const QpInstance& inst, double box_halfwidth, int grid_points) {
  const auto m = inst.u_nom.size();
  require_dim(inst.psi1, m, "psi1");
  if (m < 1 || m > 2) throw ParameterError("brute_force supports m in {1, 2}");
  if (grid_points < 101) throw ParameterError("brute_force needs >= 101 grid points per axis");
  if (!(box_halfwidth > 0.0)) throw ParameterError("brute_force needs a positive box");

  const double spacing = 2.0 * box_halfwidth / (grid_points - 1);
  auto coord = [&](int i) { return -box_halfwidth + spacing * i; };

  std::optional<Vector> best;
  double best_cost = std::numeric_limits<double>::infinity();
  Vector u(m);
  const int outer = m == 2 ? grid_points : 1;
  for (int i = 0; i < grid_points; ++i) {
    for (int j = 0; j < outer; ++j) {
      u[0] = coord(i);
      if (m == 2) u[1] = coord(j);
      if (inst.psi0 + inst.psi1.dot(u) < 0.0) continue;
      const double cost = (u - inst.u_nom).squaredNorm();
      if (cost < best_cost) {
        best_cost = cost;
        best = u;
      }
    }
  }
  // In the plane, also try where the boundary crosses the grid lines of the
  // dominant axis; a uniform grid alone resolves the tangential direction
  // only to about sqrt(distance * spacing).
  if (m == 2 && inst.psi1.squaredNorm() > 0.0) {
    const int a = std::abs(inst.psi1[0]) >= std::abs(inst.psi1[1]) ? 0 : 1;
    const int b = 1 - a;
    const double tol =
        1e-12 * (std::abs(inst.psi0) + inst.psi1.lpNorm<1>() * box_halfwidth);
    for (int i = 0; i < grid_points; ++i) {
      u[b] = coord(i);
      u[a] = -(inst.psi0 + inst.psi1[b] * u[b]) / inst.psi1[a];
      if (std::abs(u[a]) > box_halfwidth) continue;
      if (inst.psi0 + inst.psi1.dot(u) < -tol) continue;
      const double cost = (u - inst.u_nom).squaredNorm();
      if (cost < best_cost) {
        best_cost = cost;
        best = u;
      }
    }
  }
  return best;
}

}  // namespace dobcbf

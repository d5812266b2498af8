#pragma once

#include <optional>
#include <string_view>

#include "dobcbf/linalg.hpp"

namespace dobcbf {

/// min |u - u_nom|^2  s.t.  psi0 + psi1 u >= 0.
struct QpInstance {
  Vector u_nom;
  double psi0 = 0.0;
  RowVector psi1;
};

enum class QpStatus { kInactive, kActive, kInfeasible };

std::string_view to_string(QpStatus s);

struct QpResult {
  Vector u;
  QpStatus status = QpStatus::kInactive;
  double constraint_value = 0.0;  // psi0 + psi1 u at the returned u
};

/// Closed-form Euclidean projection onto the half-space. An empty feasible
/// set (psi1 = 0, psi0 < 0) is reported as kInfeasible with u = u_nom.
QpResult solve(const QpInstance& inst);

/// Exhaustive minimizer over [-box_halfwidth, box_halfwidth]^m (m <= 2): the
/// grid nodes plus, for m = 2, the points where the constraint boundary
/// crosses the grid lines. Test oracle; nullopt when no candidate is feasible.
std::optional<Vector> brute_force(const QpInstance& inst, double box_halfwidth, int grid_points);

}  // namespace dobcbf

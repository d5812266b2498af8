#pragma once

#include <Eigen/Dense>
#include <string>

#include "dobcbf/error.hpp"

namespace dobcbf {

using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Matrix = Eigen::MatrixXd;

// Dimension-carrying aliases. The checks live at the API edges (require_dim)
// rather than in the type so Eigen expressions stay cheap to compose.
using StateVector = Vector;
using ControlVector = Vector;
using DisturbanceVector = Vector;

inline void require_dim(const Vector& v, Eigen::Index n, const char* what) {
  if (v.size() != n) {
    throw DimensionError(std::string(what) + ": expected dimension " + std::to_string(n) +
                         ", got " + std::to_string(v.size()));
  }
}

inline void require_dim(const RowVector& v, Eigen::Index n, const char* what) {
  if (v.size() != n) {
    throw DimensionError(std::string(what) + ": expected row of length " + std::to_string(n) +
                         ", got " + std::to_string(v.size()));
  }
}

inline void require_shape(const Matrix& a, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (a.rows() != rows || a.cols() != cols) {
    throw DimensionError(std::string(what) + ": expected " + std::to_string(rows) + "x" +
                         std::to_string(cols) + ", got " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()));
  }
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& a) {
  return a.allFinite();
}

}  // namespace dobcbf

#pragma once

#include <Eigen/Core>
#include <cmath>
#include <span>

#include "ttp/errors.hpp"

namespace ttp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
// Feature matrices are row-major so a single example is a contiguous row.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Pairwise (tree) summation; order-stable regardless of traversal origin.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

inline double logsumexp(const Vector& z) {
  const double m = z.maxCoeff();
  return m + std::log((z.array() - m).exp().sum());
}

// Checks p >= 0 and sum(p) == 1 within tol; throws DomainError otherwise.
inline void require_simplex(const Vector& p, double tol = 1e-9) {
  if (p.size() == 0) throw DomainError("probability vector is empty");
  if ((p.array() < -tol).any()) throw DomainError("probability vector has a negative entry");
  if (std::abs(p.sum() - 1.0) > tol) throw DomainError("probability vector does not sum to 1");
}

inline void require_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) throw NumericError(std::string(what) + " contains non-finite values");
}

}  // namespace ttp

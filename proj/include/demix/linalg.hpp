#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "demix/errors.hpp"
#include "demix/rng.hpp"

namespace demix {

namespace detail {
// Deterministic dense start vector for power iterations.
inline Eigen::VectorXcd power_start(Eigen::Index n) {
  Rng rng(0x9d2c5680u);
  Eigen::VectorXcd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.unit_circle();
  v /= v.norm();
  return v;
}
}  // namespace detail

// Largest singular value via power iteration on A*A.
inline double operator_norm(const Eigen::MatrixXcd& A, int max_iters = 200,
                            double tol = 1e-10) {
  if (A.size() == 0) return 0.0;
  Eigen::VectorXcd v = detail::power_start(A.cols());
  double sigma = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    Eigen::VectorXcd w = A * v;
    const double s = w.norm();
    if (s == 0.0) return 0.0;
    v = A.adjoint() * w;
    const double nv = v.norm();
    if (nv == 0.0) return s;
    v /= nv;
    if (std::abs(s - sigma) <= tol * std::max(1.0, s)) return s;
    sigma = s;
  }
  return sigma;
}

// Largest singular value of W^{-1}, i.e. 1/sigma_min(W), from an existing LU
// factorization. Power iteration applying W^{-1} and W^{-*} through solves.
inline double inverse_operator_norm(const Eigen::PartialPivLU<Eigen::MatrixXcd>& lu,
                                    Eigen::Index n, int max_iters = 200,
                                    double tol = 1e-10) {
  Eigen::VectorXcd v = detail::power_start(n);
  double sigma = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    Eigen::VectorXcd w = lu.solve(v);
    const double s = w.norm();
    if (!std::isfinite(s)) return std::numeric_limits<double>::infinity();
    v = lu.adjoint().solve(w);
    const double nv = v.norm();
    if (nv == 0.0) return s;
    v /= nv;
    if (std::abs(s - sigma) <= tol * std::max(1.0, s)) return s;
    sigma = s;
  }
  return sigma;
}

}  // namespace demix

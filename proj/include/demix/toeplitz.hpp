#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "demix/errors.hpp"
#include "demix/signal_model.hpp"

namespace demix {

// Hermitian Toeplitz matrix with u as its first column. Requires a real
// leading entry, since that entry sits on the diagonal.
inline Eigen::MatrixXcd toeplitz_from_generator(const Eigen::VectorXcd& u) {
  const Eigen::Index n = u.size();
  if (n == 0) throw parameter_error("toeplitz_from_generator: empty generator");
  if (std::abs(u[0].imag()) > 1e-12)
    throw parameter_error("toeplitz_from_generator: first entry must be real");
  Eigen::MatrixXcd T(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    T(a, a) = cxd(u[0].real(), 0.0);
    for (Eigen::Index b = 0; b < a; ++b) {
      T(a, b) = u[a - b];
      T(b, a) = std::conj(u[a - b]);
    }
  }
  return T;
}

// Adjoint of toeplitz_from_generator under the real inner products
// <A,B>_R = Re tr(B^* A) and <u,v>_R = Re(v^* u):
//   <Toep(u), H>_R = <u, toeplitz_diag_sum(H)>_R   for Hermitian H.
// Entry d is the subdiagonal-d sum, doubled for d >= 1 because u_d shows up
// on both sides of the diagonal.
inline Eigen::VectorXcd toeplitz_diag_sum(const Eigen::MatrixXcd& H) {
  const Eigen::Index n = H.rows();
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(n);
  double d0 = 0.0;
  for (Eigen::Index a = 0; a < n; ++a) d0 += H(a, a).real();
  out[0] = cxd(d0, 0.0);
  for (Eigen::Index d = 1; d < n; ++d) {
    cxd acc(0.0, 0.0);
    for (Eigen::Index a = d; a < n; ++a) acc += H(a, a - d);
    out[d] = 2.0 * acc;
  }
  return out;
}

// Per-diagonal means of a Hermitian block: the generator of the closest (in
// Frobenius norm) Hermitian Toeplitz matrix. Entry 0 is forced real.
inline Eigen::VectorXcd subdiagonal_means(const Eigen::MatrixXcd& H) {
  const Eigen::Index n = H.rows();
  Eigen::VectorXcd u(n);
  double d0 = 0.0;
  for (Eigen::Index a = 0; a < n; ++a) d0 += H(a, a).real();
  u[0] = cxd(d0 / static_cast<double>(n), 0.0);
  for (Eigen::Index d = 1; d < n; ++d) {
    cxd acc(0.0, 0.0);
    for (Eigen::Index a = d; a < n; ++a) acc += H(a, a - d);
    u[d] = acc / static_cast<double>(n - d);
  }
  return u;
}

}  // namespace demix

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <iostream>
#include <limits>

#include "demix/errors.hpp"
#include "demix/signal_model.hpp"
#include "demix/toeplitz.hpp"
#include "demix/trigpoly.hpp"

namespace demix {

struct SolverOptions {
  double eps_abs = 1e-7;
  double eps_rel = 1e-7;
  int max_iters = 50000;
  double rho0 = 1.0;        // initial penalty
  double over_relax = 1.6;  // 1.0 disables over-relaxation
  double rho_min = 1e-3;
  double rho_max = 1e3;
  int rho_adapt_every = 20;      // residual-balancing cadence
  double dual_feas_slack = 1e-3; // tolerance for the dual-norm feasibility check
  int dual_check_grid = 4096;
  int trace_every = 0;  // > 0: print residuals to stderr every k iterations
};

struct DemixProblem {
  Eigen::VectorXcd y;
  Eigen::VectorXcd g;
  int M = 0;
};

struct DemixSolution {
  Eigen::VectorXcd x1, x2;
  Eigen::VectorXcd u1, u2;  // Toeplitz generators, first entry real
  double t1 = 0.0, t2 = 0.0;
  Eigen::VectorXcd p;  // dual vector (multiplier of the measurement equality)
  double objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double measurement_residual = 0.0;  // |y - x1 - g.*x2|
  double duality_gap = 0.0;           // objective - <p,y>_R
  double dual_norm_P = 0.0;           // grid sup of |sum p_n e^{j2pi n tau}|
  double dual_norm_Q = 0.0;           // same for conj(g).*p
  double psd_min_eig_1 = 0.0;         // of the returned blocks, after lifting
  double psd_min_eig_2 = 0.0;
  double rho_final = 0.0;
  int iterations = 0;
  bool converged = false;
  bool dual_reliable = false;
};

// Real inner product <p, y>_R = Re(y^* p).
inline double real_inner(const Eigen::VectorXcd& p, const Eigen::VectorXcd& y) {
  return y.dot(p).real();
}

// Supremum of |sum_n p_n e^{j 2 pi n tau}| over tau, the dual atomic norm.
// Grid maximum refined by golden-section ascent near the best grid points;
// a certified lower bound that is grid-tight at these sizes.
inline double dual_norm(const Eigen::VectorXcd& p, int grid_size) {
  return sup_modulus(p, grid_size);
}

namespace detail {

// Hermitian block [[Toep(u), x], [x^*, t]].
inline void assemble_block(Eigen::MatrixXcd& B, const Eigen::VectorXcd& u,
                           const Eigen::VectorXcd& x, double t) {
  const Eigen::Index N = u.size();
  B.resize(N + 1, N + 1);
  for (Eigen::Index a = 0; a < N; ++a) {
    B(a, a) = cxd(u[0].real(), 0.0);
    for (Eigen::Index b = 0; b < a; ++b) {
      B(a, b) = u[a - b];
      B(b, a) = std::conj(u[a - b]);
    }
  }
  B.col(N).head(N) = x;
  B.row(N).head(N) = x.adjoint();
  B(N, N) = cxd(t, 0.0);
}

// Projection onto the Hermitian PSD cone by eigenvalue clipping. Returns the
// smallest eigenvalue of the input for diagnostics.
inline double psd_project(const Eigen::MatrixXcd& H, Eigen::MatrixXcd& out,
                          Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>& es) {
  es.compute(H);
  const auto& ev = es.eigenvalues();
  const double min_eig = ev[0];
  if (min_eig >= 0.0) {
    out = H;
    return min_eig;
  }
  if (ev[ev.size() - 1] <= 0.0) {
    out.setZero(H.rows(), H.cols());
    return min_eig;
  }
  Eigen::VectorXd clipped = ev.cwiseMax(0.0);
  out.noalias() = es.eigenvectors() * clipped.asDiagonal() *
                  es.eigenvectors().adjoint();
  return min_eig;
}

// Norm of the S-space image of a Hermitian matrix under the adjoint of the
// block map (u <- diagonal sums, x <- 2 * last column, t <- corner).
inline double adjoint_image_sqnorm(const Eigen::MatrixXcd& H) {
  const Eigen::Index N = H.rows() - 1;
  double acc = 0.0;
  const Eigen::VectorXcd du = toeplitz_diag_sum(H.topLeftCorner(N, N));
  acc += du.squaredNorm();
  acc += 4.0 * H.col(N).head(N).squaredNorm();
  acc += H(N, N).real() * H(N, N).real();
  return acc;
}

inline double min_eigenvalue(const Eigen::MatrixXcd& H) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H, Eigen::EigenvaluesOnly);
  return es.eigenvalues()[0];
}

}  // namespace detail

// ADMM on the semidefinite form of the demixing program
//
//   min  (tr Toep(u1) + tr Toep(u2)) / (2(4M+1)) + (t1 + t2)/2
//   s.t. Z_i = [[Toep(u_i), x_i], [x_i^*, t_i]] >= 0,  y = x1 + g .* x2,
//
// whose optimal value equals |x1|_A + |x2|_A (the 1/2 weights follow the
// standard semidefinite characterization of the atomic norm). Splitting:
// the structured variables (x, u, t) are one block -- their update is a
// closed-form least-squares step via per-diagonal Toeplitz averaging and a
// per-frequency 2x2 solve coupling x1 and x2 through the measurement; the
// cone variables Z_i are the other block, updated by Hermitian
// eigendecomposition with negative-eigenvalue clipping. The multiplier of
// the measurement equality converges to the dual maximizer, which is how
// the dual vector p is extracted.
inline DemixSolution solve_demix(const DemixProblem& prob,
                                 const SolverOptions& opts = {}) {
  const int M = prob.M;
  const Eigen::Index N = spectrum_length(M);
  if (M < 1 || prob.y.size() != N || prob.g.size() != N)
    throw parameter_error("solve_demix: inconsistent problem dimensions");
  for (Eigen::Index i = 0; i < N; ++i)
    if (prob.g[i] == cxd(0.0, 0.0))
      throw parameter_error("solve_demix: psf ratio entries must be nonzero");
  if (opts.max_iters < 1)
    throw parameter_error("solve_demix: max_iters must be >= 1");

  const Eigen::VectorXcd& y = prob.y;
  const Eigen::VectorXcd& g = prob.g;
  const double y_norm = y.norm();
  const double alpha = opts.over_relax;

  // Per-frequency 2x2 inverse for the coupled x-update; independent of rho.
  Eigen::VectorXcd inv00(N), inv01(N), inv10(N), inv11(N);
  for (Eigen::Index i = 0; i < N; ++i) {
    const double g2 = std::norm(g[i]);
    const double det = 1.5 + 0.5 * g2;
    inv00[i] = cxd((1.0 + 0.5 * g2) / det, 0.0);
    inv01[i] = -0.5 * g[i] / det;
    inv10[i] = -0.5 * std::conj(g[i]) / det;
    inv11[i] = cxd(1.5 / det, 0.0);
  }

  Eigen::VectorXcd x1 = Eigen::VectorXcd::Zero(N), x2 = x1, u1 = x1, u2 = x1;
  double t1 = 0.0, t2 = 0.0;
  Eigen::MatrixXcd Z1 = Eigen::MatrixXcd::Zero(N + 1, N + 1), Z2 = Z1;
  Eigen::MatrixXcd L1 = Z1, L2 = Z1;
  Eigen::VectorXcd q = Eigen::VectorXcd::Zero(N);
  double rho = opts.rho0;

  Eigen::MatrixXcd B1, B2, H1, H2, Z1_prev, Z2_prev, V;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es;

  DemixSolution sol;
  double r_meas = 0.0, r_block = 0.0, s_dual = 0.0;
  int next_adapt = opts.rho_adapt_every;
  int adapt_cooldown = opts.rho_adapt_every;

  int it = 0;
  for (; it < opts.max_iters; ++it) {
    // ---- structured-variable update -------------------------------------
    // V_i = Z_i - L_i / rho is the target the structured block tracks.
    auto update_structured = [&](const Eigen::MatrixXcd& Z,
                                 const Eigen::MatrixXcd& L, Eigen::VectorXcd& u,
                                 double& t) {
      V.noalias() = Z - L / rho;
      u = subdiagonal_means(V.topLeftCorner(N, N));
      u[0] -= 1.0 / (2.0 * rho * static_cast<double>(N));
      t = V(N, N).real() - 1.0 / (2.0 * rho);
      return Eigen::VectorXcd(V.col(N).head(N));
    };
    const Eigen::VectorXcd v1 = update_structured(Z1, L1, u1, t1);
    const Eigen::VectorXcd v2 = update_structured(Z2, L2, u2, t2);

    for (Eigen::Index i = 0; i < N; ++i) {
      const cxd w = y[i] - q[i] / rho;
      const cxd r1 = v1[i] + 0.5 * w;
      const cxd r2 = v2[i] + 0.5 * std::conj(g[i]) * w;
      x1[i] = inv00[i] * r1 + inv01[i] * r2;
      x2[i] = inv10[i] * r1 + inv11[i] * r2;
    }

    detail::assemble_block(B1, u1, x1, t1);
    detail::assemble_block(B2, u2, x2, t2);
    const Eigen::VectorXcd meas = x1 + g.cwiseProduct(x2);

    // ---- cone update (over-relaxed) --------------------------------------
    H1.noalias() = alpha * B1 + (1.0 - alpha) * Z1;
    H2.noalias() = alpha * B2 + (1.0 - alpha) * Z2;
    Z1_prev = Z1;
    Z2_prev = Z2;
    detail::psd_project(H1 + L1 / rho, Z1, es);
    detail::psd_project(H2 + L2 / rho, Z2, es);

    // ---- multiplier update ------------------------------------------------
    L1.noalias() += rho * (H1 - Z1);
    L2.noalias() += rho * (H2 - Z2);
    q.noalias() += rho * alpha * (meas - y);

    // ---- residuals and stopping -------------------------------------------
    r_meas = (meas - y).norm();
    const double r1n = (B1 - Z1).norm();
    const double r2n = (B2 - Z2).norm();
    r_block = std::sqrt(r1n * r1n + r2n * r2n);
    s_dual = rho * std::sqrt(detail::adjoint_image_sqnorm(Z1 - Z1_prev) +
                             detail::adjoint_image_sqnorm(Z2 - Z2_prev));

    if (!std::isfinite(r_meas) || !std::isfinite(r_block) || !std::isfinite(s_dual))
      throw numerical_error("solve_demix: NaN/Inf in ADMM iterates");

    const double eps_meas =
        opts.eps_abs * std::sqrt(2.0 * N) + opts.eps_rel * std::max(meas.norm(), y_norm);
    const double eps_b1 = opts.eps_abs * std::numbers::sqrt2 * (N + 1) +
                          opts.eps_rel * std::max(B1.norm(), Z1.norm());
    const double eps_b2 = opts.eps_abs * std::numbers::sqrt2 * (N + 1) +
                          opts.eps_rel * std::max(B2.norm(), Z2.norm());
    double lambda_scale = 0.0;
    {
      double acc = detail::adjoint_image_sqnorm(L1) + detail::adjoint_image_sqnorm(L2);
      acc += 2.0 * q.squaredNorm();  // q enters the x1 and x2 components
      lambda_scale = std::sqrt(acc);
    }
    const double eps_dual =
        opts.eps_abs * std::sqrt(8.0 * N + 2.0) + opts.eps_rel * lambda_scale;

    if (opts.trace_every > 0 && it % opts.trace_every == 0)
      std::cerr << "it " << it << " rho " << rho << " r_meas " << r_meas << "/"
                << eps_meas << " r_blk " << r1n << "," << r2n << "/" << eps_b1
                << " s " << s_dual << "/" << eps_dual << "\n";

    if (r_meas <= eps_meas && r1n <= eps_b1 && r2n <= eps_b2 && s_dual <= eps_dual) {
      sol.converged = true;
      ++it;
      break;
    }

    // ---- penalty adaptation ------------------------------------------------
    // residual balancing on tolerance-normalized residuals: whichever side is
    // further from its own stopping threshold gets the penalty moved its way.
    // The cooldown doubles after every change so the adaptation settles
    // instead of entering a limit cycle.
    if (it + 1 >= next_adapt) {
      const double pri_ratio =
          std::max({r_meas / eps_meas, r1n / eps_b1, r2n / eps_b2});
      const double dua_ratio = s_dual / eps_dual;
      bool changed = false;
      if (pri_ratio > 10.0 * dua_ratio) {
        rho = std::min(rho * 2.0, opts.rho_max);
        changed = true;
      } else if (dua_ratio > 10.0 * pri_ratio) {
        rho = std::max(rho * 0.5, opts.rho_min);
        changed = true;
      }
      if (changed) adapt_cooldown *= 2;
      next_adapt = it + 1 + (changed ? adapt_cooldown : opts.rho_adapt_every);
    }
  }

  // Lift the returned blocks into the cone: a small multiple of the identity
  // (u0 += c, t += c) raises the minimum eigenvalue without touching x or the
  // measurement constraint, at an objective cost of the same order as the
  // ADMM residual.
  detail::assemble_block(B1, u1, x1, t1);
  detail::assemble_block(B2, u2, x2, t2);
  double e1 = detail::min_eigenvalue(B1);
  double e2 = detail::min_eigenvalue(B2);
  if (e1 < 0.0) {
    const double c = -e1 * (1.0 + 1e-3);
    u1[0] += c;
    t1 += c;
    e1 += c;
  }
  if (e2 < 0.0) {
    const double c = -e2 * (1.0 + 1e-3);
    u2[0] += c;
    t2 += c;
    e2 += c;
  }

  sol.x1 = x1;
  sol.x2 = x2;
  sol.u1 = u1;
  sol.u2 = u2;
  sol.t1 = t1;
  sol.t2 = t2;
  sol.psd_min_eig_1 = e1;
  sol.psd_min_eig_2 = e2;
  sol.iterations = it;
  sol.rho_final = rho;
  sol.objective = 0.5 * (u1[0].real() + t1 + u2[0].real() + t2);
  sol.measurement_residual = (y - x1 - g.cwiseProduct(x2)).norm();
  sol.primal_residual = std::max(sol.measurement_residual, r_block);
  sol.dual_residual = s_dual;

  sol.p = -q;
  sol.duality_gap = sol.objective - real_inner(sol.p, y);
  const int grid = std::max(opts.dual_check_grid, 16 * M);
  sol.dual_norm_P = dual_norm(sol.p, grid);
  sol.dual_norm_Q = dual_norm(g.conjugate().cwiseProduct(sol.p), grid);
  sol.dual_reliable = sol.converged &&
                      sol.dual_norm_P <= 1.0 + opts.dual_feas_slack &&
                      sol.dual_norm_Q <= 1.0 + opts.dual_feas_slack;
  return sol;
}

}  // namespace demix

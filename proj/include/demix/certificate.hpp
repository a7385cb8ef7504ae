#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "demix/errors.hpp"
#include "demix/fejer_kernel.hpp"
#include "demix/linalg.hpp"
#include "demix/signal_model.hpp"
#include "demix/trigpoly.hpp"

namespace demix {

// Interpolation system for the pair of dual certificate polynomials
//   P(tau) = sum_k alpha1_k K(tau - tau1_k) + beta1_k K'(tau - tau1_k)
//          + sum_k alpha2_k Kg(tau - tau2_k) + beta2_k Kg'(tau - tau2_k)
//   Q(tau) = same with K_gbar on channel 1 and K on channel 2,
// pinned to P(tau1_k) = sign(a1_k), P'(tau1_k) = 0, Q(tau2_k) = sign(a2_k),
// Q'(tau2_k) = 0. The system matrix W is assembled in the normalized form
// where derivative rows/columns carry 1/sqrt(|K''(0)|) so that the diagonal
// blocks are near-identity under the within-channel separation condition.
struct CertificateSystem {
  FejerKernel kern;
  PsfRatio psf;
  PointSourceModel sources1, sources2;
  Eigen::MatrixXcd W;  // 2(K1+K2) x 2(K1+K2)
  Eigen::VectorXcd alpha1, beta1, alpha2, beta2;
  bool solved = false;
  bool used_min_norm = false;
  double solve_residual = 0.0;

  int K1() const { return sources1.size(); }
  int K2() const { return sources2.size(); }

  Eigen::MatrixXcd block_w1() const { return W.topLeftCorner(2 * K1(), 2 * K1()); }
  Eigen::MatrixXcd block_w2() const {
    return W.bottomRightCorner(2 * K2(), 2 * K2());
  }
  Eigen::MatrixXcd block_wg() const {
    return W.block(0, 2 * K1(), 2 * K1(), 2 * K2());
  }
  Eigen::MatrixXcd block_wgbar() const {
    return W.block(2 * K1(), 0, 2 * K2(), 2 * K1());
  }

  // Kernel-sum evaluation of the certificates (and derivatives l = 0..2).
  // An independent route from the coefficient form produced by
  // certificate_polynomials; both must agree and tests pin that down.
  cxd eval_P(double tau, int l = 0) const {
    require_solved();
    cxd acc(0.0, 0.0);
    for (int k = 0; k < K1(); ++k) {
      const double d = tau - sources1.sources[k].tau;
      acc += alpha1[k] * kernel_eval(kern, d, l);
      acc += beta1[k] * kernel_eval(kern, d, l + 1);
    }
    for (int k = 0; k < K2(); ++k) {
      const double d = tau - sources2.sources[k].tau;
      acc += alpha2[k] * modulated_kernel_eval(kern, psf, false, d, l);
      acc += beta2[k] * modulated_kernel_eval(kern, psf, false, d, l + 1);
    }
    return acc;
  }

  cxd eval_Q(double tau, int l = 0) const {
    require_solved();
    cxd acc(0.0, 0.0);
    for (int k = 0; k < K1(); ++k) {
      const double d = tau - sources1.sources[k].tau;
      acc += alpha1[k] * modulated_kernel_eval(kern, psf, true, d, l);
      acc += beta1[k] * modulated_kernel_eval(kern, psf, true, d, l + 1);
    }
    for (int k = 0; k < K2(); ++k) {
      const double d = tau - sources2.sources[k].tau;
      acc += alpha2[k] * kernel_eval(kern, d, l);
      acc += beta2[k] * kernel_eval(kern, d, l + 1);
    }
    return acc;
  }

 private:
  void require_solved() const {
    if (!solved)
      throw parameter_error("certificate system: coefficients not solved yet");
  }
};

namespace detail {

// One structured 2Kr x 2Kc block: [[B0, c1*B1], [-c1*B1, -c2*B2]] where
// Bi(l,k) holds the i-th kernel derivative at the (l,k) lag.
template <class EvalFn>
inline void fill_block(Eigen::MatrixXcd& W, int row0, int col0,
                       const std::vector<double>& row_taus,
                       const std::vector<double>& col_taus, double c1, double c2,
                       EvalFn&& eval) {
  const int R = static_cast<int>(row_taus.size());
  const int C = static_cast<int>(col_taus.size());
  for (int l = 0; l < R; ++l) {
    for (int k = 0; k < C; ++k) {
      const double lag = row_taus[l] - col_taus[k];
      const cxd k0 = eval(lag, 0);
      const cxd k1 = eval(lag, 1);
      const cxd k2 = eval(lag, 2);
      W(row0 + l, col0 + k) = k0;
      W(row0 + l, col0 + C + k) = c1 * k1;
      W(row0 + R + l, col0 + k) = -c1 * k1;
      W(row0 + R + l, col0 + C + k) = -c2 * k2;
    }
  }
}

}  // namespace detail

// Assemble the block interpolation matrix. Degenerate single-channel systems
// (K1 = 0 or K2 = 0) are allowed here to support single-channel sanity
// experiments; the corresponding blocks are simply absent.
inline CertificateSystem build_system(const FejerKernel& kern, const PsfRatio& psf,
                                      const PointSourceModel& sources1,
                                      const PointSourceModel& sources2) {
  psf.validate();
  sources1.validate();
  sources2.validate();
  if (psf.M != kern.M)
    throw parameter_error("build_system: psf/kernel bandwidth mismatch");
  const int K1 = sources1.size();
  const int K2 = sources2.size();
  if (K1 + K2 < 1) throw parameter_error("build_system: no sources");

  CertificateSystem sys;
  sys.kern = kern;
  sys.psf = psf;
  sys.sources1 = sources1;
  sys.sources2 = sources2;

  const double c1 = kern.deriv_scale();
  const double c2 = c1 * c1;
  const auto t1 = sources1.taus();
  const auto t2 = sources2.taus();
  const int n = 2 * (K1 + K2);
  sys.W.resize(n, n);

  auto plain = [&kern](double lag, int l) { return kernel_eval(kern, lag, l); };
  auto mod_g = [&kern, &psf](double lag, int l) {
    return modulated_kernel_eval(kern, psf, false, lag, l);
  };
  auto mod_gbar = [&kern, &psf](double lag, int l) {
    return modulated_kernel_eval(kern, psf, true, lag, l);
  };

  if (K1 > 0) detail::fill_block(sys.W, 0, 0, t1, t1, c1, c2, plain);
  if (K1 > 0 && K2 > 0) {
    detail::fill_block(sys.W, 0, 2 * K1, t1, t2, c1, c2, mod_g);
    detail::fill_block(sys.W, 2 * K1, 0, t2, t1, c1, c2, mod_gbar);
  }
  if (K2 > 0) detail::fill_block(sys.W, 2 * K1, 2 * K1, t2, t2, c1, c2, plain);
  return sys;
}

// Solve for the certificate coefficients given the complex signs on each
// support. LU with partial pivoting, one step of iterative refinement when
// the condition estimate is poor; an exactly rank-deficient but consistent
// system (it happens for fully symmetric degenerate inputs) falls back to
// the minimum-norm solution. Inconsistent or numerically unusable systems
// raise numerical_error carrying the cross-block norm diagnostic.
inline void solve_coefficients(CertificateSystem& sys,
                               const Eigen::VectorXcd& signs1,
                               const Eigen::VectorXcd& signs2) {
  const int K1 = sys.K1();
  const int K2 = sys.K2();
  if (signs1.size() != K1 || signs2.size() != K2)
    throw parameter_error("solve_coefficients: sign vector size mismatch");
  for (Eigen::Index k = 0; k < signs1.size(); ++k)
    if (std::abs(std::abs(signs1[k]) - 1.0) > 1e-8)
      throw parameter_error("solve_coefficients: signs must have unit modulus");
  for (Eigen::Index k = 0; k < signs2.size(); ++k)
    if (std::abs(std::abs(signs2[k]) - 1.0) > 1e-8)
      throw parameter_error("solve_coefficients: signs must have unit modulus");

  const int n = 2 * (K1 + K2);
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(n);
  rhs.segment(0, K1) = signs1;
  rhs.segment(2 * K1, K2) = signs2;

  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(sys.W);
  const double rcond = lu.rcond();
  Eigen::VectorXcd z;
  bool min_norm = false;
  if (std::isfinite(rcond) && rcond > 1e-12) {
    z = lu.solve(rhs);
    if (rcond < 1e-8) {
      // one refinement step
      Eigen::VectorXcd r = rhs - sys.W * z;
      z += lu.solve(r);
    }
  } else {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXcd> cod(sys.W);
    z = cod.solve(rhs);
    min_norm = true;
  }

  const double rel_res = (sys.W * z - rhs).norm() / rhs.norm();
  if (!std::isfinite(rel_res) || (min_norm && rel_res > 1e-8)) {
    const double wg = operator_norm(sys.block_wg());
    std::ostringstream msg;
    msg << "solve_coefficients: interpolation system numerically singular"
        << " (rcond=" << rcond << ", |Wg|=" << wg
        << ", invertible regime needs |Wg| < 0.6376)";
    throw numerical_error(msg.str());
  }

  const double root_kpp = std::sqrt(-sys.kern.kpp0);
  sys.alpha1 = z.segment(0, K1);
  sys.beta1 = z.segment(K1, K1) / root_kpp;
  sys.alpha2 = z.segment(2 * K1, K2);
  sys.beta2 = z.segment(2 * K1 + K2, K2) / root_kpp;
  sys.solved = true;
  sys.used_min_norm = min_norm;
  sys.solve_residual = rel_res;
}

// Dual certificate pair in coefficient form: P(tau) = sum_n p_n e^{j2pi n tau}
// and Q(tau) = sum_n p_n conj(g_n) e^{j2pi n tau}.
struct DualPolynomial {
  Eigen::VectorXcd p;
  PsfRatio psf;
  Eigen::VectorXcd q;  // p .* conj(g), cached

  int M() const { return psf.M; }
  cxd P(double tau, int l = 0) const { return trig_eval(p, tau, l); }
  cxd Q(double tau, int l = 0) const { return trig_eval(q, tau, l); }
};

inline DualPolynomial make_dual_polynomial(const Eigen::VectorXcd& p,
                                           const PsfRatio& psf) {
  if (p.size() != psf.g.size())
    throw parameter_error("dual polynomial: coefficient/psf length mismatch");
  DualPolynomial d;
  d.p = p;
  d.psf = psf;
  d.q = p.cwiseProduct(psf.g.conjugate());
  return d;
}

// Collapse the kernel-sum certificates into coefficient form:
//   p_n = (s_n / M) [ sum_k (alpha1_k + beta1_k j2pi n) e^{-j2pi n tau1_k}
//                   + g_n sum_k (alpha2_k + beta2_k j2pi n) e^{-j2pi n tau2_k} ].
// The identity Q(tau) = sum_n p_n conj(g_n) e^{j2pi n tau} relies on
// |g_n| = 1, which holds for every internally generated ratio.
inline DualPolynomial certificate_polynomials(const CertificateSystem& sys) {
  if (!sys.solved)
    throw parameter_error("certificate_polynomials: coefficients not solved");
  const int M = sys.kern.M;
  Eigen::VectorXcd p(spectrum_length(M));
  for (int n = -2 * M; n <= 2 * M; ++n) {
    const cxd jw = jw_pow(two_pi * n, 1);
    cxd a1(0.0, 0.0);
    for (int k = 0; k < sys.K1(); ++k)
      a1 += (sys.alpha1[k] + sys.beta1[k] * jw) *
            std::polar(1.0, -two_pi * n * sys.sources1.sources[k].tau);
    cxd a2(0.0, 0.0);
    for (int k = 0; k < sys.K2(); ++k)
      a2 += (sys.alpha2[k] + sys.beta2[k] * jw) *
            std::polar(1.0, -two_pi * n * sys.sources2.sources[k].tau);
    p[n + 2 * M] =
        sys.kern.sn(n) / static_cast<double>(M) * (a1 + sys.psf.g[n + 2 * M] * a2);
  }
  return make_dual_polynomial(p, sys.psf);
}

struct CertificateReport {
  double interp_err_P = 0.0;   // max_k |P(tau1_k) - sign1_k|
  double interp_err_Q = 0.0;   // max_k |Q(tau2_k) - sign2_k|
  double offgrid_max_P = 0.0;  // max |P| beyond the exclusion radius of Y1
  double offgrid_max_Q = 0.0;
  double exclusion_radius = 0.0;
  double margin = 0.0;
  bool annulus_checked = false;
  double annulus_violation = 0.0;  // worst |P|- or |Q|-excess over the profile
  bool valid = false;
};

struct VerifyOptions {
  double interp_tol = 1e-6;
  // exclusion radius around each in-channel source; <= 0 means 0.5/M
  double exclusion_radius = -1.0;
  // optional quadratic dip requirement |P| <= 1 - margin*(dist*M)^2 on the
  // annulus [0.1/M, 0.5/M]; off by default
  bool quadratic_profile = false;
};

namespace detail {

inline std::vector<double> verify_grid(int grid_size, const std::vector<double>& taus) {
  std::vector<double> pts;
  pts.reserve(grid_size + taus.size());
  for (int i = 0; i < grid_size; ++i)
    pts.push_back(static_cast<double>(i) / grid_size);
  // midpoints of circularly adjacent sources
  if (taus.size() >= 2) {
    std::vector<double> sorted = taus;
    std::sort(sorted.begin(), sorted.end());
    for (size_t k = 0; k < sorted.size(); ++k) {
      const double a = sorted[k];
      const double b = k + 1 < sorted.size() ? sorted[k + 1] : sorted[0] + 1.0;
      double mid = 0.5 * (a + b);
      pts.push_back(mid - std::floor(mid));
    }
  }
  return pts;
}

struct OffSupportScan {
  double off_max = 0.0;
  double annulus_violation = 0.0;
};

template <class EvalFn>
inline OffSupportScan scan_off_support(EvalFn&& eval, const std::vector<double>& grid,
                                       const std::vector<double>& taus, int M,
                                       double radius, double margin,
                                       bool quadratic) {
  OffSupportScan out;
  for (double tau : grid) {
    double dist = 1.0;
    for (double t : taus) dist = std::min(dist, wrap_distance(tau, t));
    const double v = std::abs(eval(tau));
    if (dist > radius) out.off_max = std::max(out.off_max, v);
    if (quadratic && dist >= 0.1 / M && dist <= 0.5 / M) {
      const double bound = 1.0 - margin * (dist * M) * (dist * M);
      out.annulus_violation = std::max(out.annulus_violation, v - bound);
    }
  }
  return out;
}

}  // namespace detail

// Check the certificate conditions on a finite grid: exact sign interpolation
// on the supports and strict sub-unit modulus away from them (flat margin by
// default). Report-only; never throws on a failed certificate.
inline CertificateReport verify_certificate(
    const DualPolynomial& dual, const PointSourceModel& sources1,
    const PointSourceModel& sources2, const Eigen::VectorXcd& signs1,
    const Eigen::VectorXcd& signs2, int grid_size, double margin,
    const VerifyOptions& opts = {}) {
  const int M = dual.M();
  if (grid_size < 64 * M)
    throw parameter_error("verify_certificate: grid_size must be >= 64*M");
  if (signs1.size() != sources1.size() || signs2.size() != sources2.size())
    throw parameter_error("verify_certificate: sign vector size mismatch");

  CertificateReport rep;
  rep.margin = margin;
  rep.exclusion_radius =
      opts.exclusion_radius > 0.0 ? opts.exclusion_radius : 0.5 / M;

  for (int k = 0; k < sources1.size(); ++k)
    rep.interp_err_P = std::max(
        rep.interp_err_P, std::abs(dual.P(sources1.sources[k].tau) - signs1[k]));
  for (int k = 0; k < sources2.size(); ++k)
    rep.interp_err_Q = std::max(
        rep.interp_err_Q, std::abs(dual.Q(sources2.sources[k].tau) - signs2[k]));

  const auto taus1 = sources1.taus();
  const auto taus2 = sources2.taus();
  const auto grid1 = detail::verify_grid(grid_size, taus1);
  const auto grid2 = detail::verify_grid(grid_size, taus2);
  const auto scan_p = detail::scan_off_support(
      [&dual](double tau) { return dual.P(tau); }, grid1, taus1, M,
      rep.exclusion_radius, margin, opts.quadratic_profile);
  const auto scan_q = detail::scan_off_support(
      [&dual](double tau) { return dual.Q(tau); }, grid2, taus2, M,
      rep.exclusion_radius, margin, opts.quadratic_profile);
  rep.offgrid_max_P = scan_p.off_max;
  rep.offgrid_max_Q = scan_q.off_max;
  rep.annulus_checked = opts.quadratic_profile;
  rep.annulus_violation = std::max(scan_p.annulus_violation, scan_q.annulus_violation);

  rep.valid = rep.interp_err_P <= opts.interp_tol &&
              rep.interp_err_Q <= opts.interp_tol &&
              rep.offgrid_max_P <= 1.0 - margin &&
              rep.offgrid_max_Q <= 1.0 - margin &&
              (!opts.quadratic_profile || rep.annulus_violation <= 0.0);
  return rep;
}

struct DiagnosticsRecord {
  double i_minus_w1 = 0.0;  // operator norms
  double i_minus_w2 = 0.0;
  double w1_norm = 0.0;
  double w2_norm = 0.0;
  double w1_inv_norm = 0.0;
  double w2_inv_norm = 0.0;
  double wg_norm = 0.0;
  double w_inv_norm = 0.0;  // full system
  bool near_identity_1 = false;  // |I - W1| <= 0.3623
  bool near_identity_2 = false;
  bool block_norm_ok_1 = false;  // |W1| <= 1.3623
  bool block_norm_ok_2 = false;
  bool block_inv_ok_1 = false;  // |W1^-1| <= 1.568
  bool block_inv_ok_2 = false;
  bool cross_block_small = false;  // |Wg| <= 0.25
  bool theory_regime = false;      // M >= 4; smaller M is allowed but flagged
};

inline DiagnosticsRecord invertibility_diagnostics(const CertificateSystem& sys) {
  DiagnosticsRecord d;
  d.theory_regime = sys.kern.M >= 4;

  auto diag_block = [](const Eigen::MatrixXcd& B, double& i_minus, double& norm,
                       double& inv_norm) {
    if (B.rows() == 0) {
      i_minus = 0.0;
      norm = 0.0;
      inv_norm = 0.0;
      return;
    }
    const Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(B.rows(), B.cols());
    i_minus = operator_norm(I - B);
    norm = operator_norm(B);
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(B);
    inv_norm = inverse_operator_norm(lu, B.rows());
  };
  diag_block(sys.block_w1(), d.i_minus_w1, d.w1_norm, d.w1_inv_norm);
  diag_block(sys.block_w2(), d.i_minus_w2, d.w2_norm, d.w2_inv_norm);
  d.wg_norm = operator_norm(sys.block_wg());
  {
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(sys.W);
    d.w_inv_norm = inverse_operator_norm(lu, sys.W.rows());
  }

  d.near_identity_1 = d.i_minus_w1 <= 0.3623;
  d.near_identity_2 = d.i_minus_w2 <= 0.3623;
  d.block_norm_ok_1 = d.w1_norm <= 1.3623;
  d.block_norm_ok_2 = d.w2_norm <= 1.3623;
  d.block_inv_ok_1 = d.w1_inv_norm <= 1.568;
  d.block_inv_ok_2 = d.w2_inv_norm <= 1.568;
  d.cross_block_small = d.wg_norm <= 0.25;
  return d;
}

}  // namespace demix

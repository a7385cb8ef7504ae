#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numbers>

#include "demix/errors.hpp"
#include "demix/signal_model.hpp"

namespace demix {

// (j w)^l for l = 0..3 without going through std::pow.
inline cxd jw_pow(double w, int l) {
  const double a = std::pow(w, l);
  switch (l & 3) {
    case 0: return {a, 0.0};
    case 1: return {0.0, a};
    case 2: return {-a, 0.0};
    default: return {0.0, -a};
  }
}

// Squared Fejér kernel on the window n = -2M..2M: K(tau) =
// (1/M) sum_n s_n e^{j 2 pi n tau}, with s_n the discrete autocorrelation of
// the triangle weights. K(0) = 1, K >= 0, and K''(0) = -4 pi^2 (M^2 - 1) / 3.
struct FejerKernel {
  int M = 0;
  Eigen::VectorXd s;  // s_n at index n + 2M
  double kpp0 = 0.0;  // K''(0)

  double sn(int n) const { return s[n + 2 * M]; }

  // 1/sqrt(|K''(0)|), the derivative normalizer used by the certificate
  // interpolation system.
  double deriv_scale() const { return 1.0 / std::sqrt(-kpp0); }
};

inline FejerKernel build_kernel(int M) {
  if (M < 2) throw parameter_error("build_kernel: M must be >= 2");
  FejerKernel k;
  k.M = M;
  k.s.resize(spectrum_length(M));
  const double Md = static_cast<double>(M);
  for (int n = -2 * M; n <= 2 * M; ++n) {
    const int lo = std::max(n - M, -M);
    const int hi = std::min(n + M, M);
    double acc = 0.0;
    for (int i = lo; i <= hi; ++i)
      acc += (1.0 - std::abs(i) / Md) * (1.0 - std::abs(n - i) / Md);
    k.s[n + 2 * M] = acc / Md;
  }
  k.kpp0 = -4.0 * std::numbers::pi * std::numbers::pi * (Md * Md - 1.0) / 3.0;
  return k;
}

// l-th derivative of K at tau, by term-wise differentiation:
// (1/M) sum_n s_n (j 2 pi n)^l e^{j 2 pi n tau}.
inline cxd kernel_eval(const FejerKernel& k, double tau, int l = 0) {
  if (l < 0 || l > 3) throw parameter_error("kernel_eval: l must be in 0..3");
  cxd acc(0.0, 0.0);
  for (int n = -2 * k.M; n <= 2 * k.M; ++n)
    acc += k.sn(n) * jw_pow(two_pi * n, l) * std::polar(1.0, two_pi * n * tau);
  return acc / static_cast<double>(k.M);
}

// Same sum with coefficients modulated by g_n (conjugate=false) or by
// conj(g_n) (conjugate=true).
inline cxd modulated_kernel_eval(const FejerKernel& k, const PsfRatio& psf,
                                 bool conjugate, double tau, int l = 0) {
  if (l < 0 || l > 3) throw parameter_error("modulated_kernel_eval: l must be in 0..3");
  if (psf.M != k.M || psf.g.size() != k.s.size())
    throw parameter_error("modulated_kernel_eval: psf/kernel bandwidth mismatch");
  cxd acc(0.0, 0.0);
  for (int n = -2 * k.M; n <= 2 * k.M; ++n) {
    const cxd h = conjugate ? std::conj(psf.g[n + 2 * k.M]) : psf.g[n + 2 * k.M];
    acc += k.sn(n) * h * jw_pow(two_pi * n, l) * std::polar(1.0, two_pi * n * tau);
  }
  return acc / static_cast<double>(k.M);
}

}  // namespace demix

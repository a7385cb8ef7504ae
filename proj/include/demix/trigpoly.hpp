#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "demix/fejer_kernel.hpp"
#include "demix/signal_model.hpp"

namespace demix {

// l-th derivative of the trigonometric polynomial sum_n p_n e^{j 2 pi n tau}
// with coefficients indexed n = -2M..2M.
inline cxd trig_eval(const Eigen::VectorXcd& p, double tau, int l = 0) {
  const int M = m_from_length(p.size());
  cxd acc(0.0, 0.0);
  for (int n = -2 * M; n <= 2 * M; ++n)
    acc += p[n + 2 * M] * jw_pow(two_pi * n, l) * std::polar(1.0, two_pi * n * tau);
  return acc;
}

// Golden-section ascent of a unimodal f on [a, b]; returns (argmax, max).
inline std::pair<double, double> golden_section_max(
    const std::function<double(double)>& f, double a, double b, int iters = 30) {
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iters; ++i) {
    if (fc > fd) {
      b = d; d = c; fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c; c = d; fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
  const double x = 0.5 * (a + b);
  return {x, f(x)};
}

// |poly| sampled on the uniform grid tau_i = i / grid_size.
inline std::vector<double> grid_modulus(const Eigen::VectorXcd& p, int grid_size) {
  std::vector<double> vals(grid_size);
  for (int i = 0; i < grid_size; ++i)
    vals[i] = std::abs(trig_eval(p, static_cast<double>(i) / grid_size));
  return vals;
}

struct Peak {
  double tau = 0.0;
  double value = 0.0;
};

// Circular local maxima of |poly| on the grid, each refined by golden-section
// ascent of |poly|^2 over its bracketing interval. `min_value` prunes grid
// candidates before refinement (pass -inf to keep everything).
inline std::vector<Peak> refined_peaks(const Eigen::VectorXcd& p, int grid_size,
                                       double min_value, int refine_iters = 30) {
  const auto vals = grid_modulus(p, grid_size);
  auto mod = [&p](double tau) {
    const cxd v = trig_eval(p, tau);
    return std::norm(v);
  };
  std::vector<Peak> peaks;
  for (int i = 0; i < grid_size; ++i) {
    const double prev = vals[(i + grid_size - 1) % grid_size];
    const double next = vals[(i + 1) % grid_size];
    if (vals[i] < prev || vals[i] < next) continue;
    if (vals[i] < min_value) continue;
    const double h = 1.0 / grid_size;
    auto [tau, sq] = golden_section_max(mod, i * h - h, i * h + h, refine_iters);
    Peak pk;
    pk.tau = tau - std::floor(tau);  // back into [0,1)
    pk.value = std::sqrt(sq);
    peaks.push_back(pk);
  }
  return peaks;
}

// Supremum of |poly| over [0,1): grid scan refined around the top grid
// points. A lower bound on the true sup that is tight for the grid sizes
// used here (>= 16M points for a degree-2M polynomial).
inline double sup_modulus(const Eigen::VectorXcd& p, int grid_size,
                          int refine_iters = 40) {
  const int M = m_from_length(p.size());
  if (grid_size < 16 * M)
    throw parameter_error("sup_modulus: grid_size must be >= 16*M");
  const auto vals = grid_modulus(p, grid_size);
  // indices of the three largest grid values
  std::vector<int> idx(grid_size);
  for (int i = 0; i < grid_size; ++i) idx[i] = i;
  std::partial_sort(idx.begin(), idx.begin() + std::min(3, grid_size), idx.end(),
                    [&vals](int a, int b) { return vals[a] > vals[b]; });
  auto mod = [&p](double tau) { return std::norm(trig_eval(p, tau)); };
  double best = 0.0;
  const double h = 1.0 / grid_size;
  for (int j = 0; j < std::min(3, grid_size); ++j) {
    const int i = idx[j];
    auto [tau, sq] = golden_section_max(mod, i * h - h, i * h + h, refine_iters);
    (void)tau;
    best = std::max(best, std::sqrt(sq));
  }
  return best;
}

}  // namespace demix

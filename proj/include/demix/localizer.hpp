#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <tuple>
#include <vector>

#include "demix/errors.hpp"
#include "demix/signal_model.hpp"
#include "demix/trigpoly.hpp"

namespace demix {

struct LocalizationResult {
  std::vector<double> taus1, taus2;
  std::vector<cxd> amps1, amps2;
  std::vector<double> peaks1, peaks2;  // |P| resp. |Q| at the detected taus
  double residual = 0.0;               // |y - reconstruction| / |y|
  bool rank_deficient = false;
};

struct LocateOptions {
  double threshold = 1e-4;  // accept peaks with modulus >= 1 - threshold
  int grid_size = 0;        // 0 -> 64*M
  int refine_iters = 30;
  double merge_radius_factor = 0.1;  // merge radius = factor / M
};

namespace detail {

// Peaks of |poly| at modulus 1 - threshold, with golden-section refinement
// and cluster merging. The grid pre-filter is slacked by the worst-case dip
// of a degree-2M polynomial between grid points so that refinement, not grid
// resolution, decides against the threshold.
inline std::pair<std::vector<double>, std::vector<double>> unit_modulus_peaks(
    const Eigen::VectorXcd& coef, int M, const LocateOptions& opts) {
  const int grid = opts.grid_size > 0 ? opts.grid_size : 64 * M;
  if (grid < 64 * M)
    throw parameter_error("locate: grid_size must be >= 64*M");
  // |poly''| <= (4 pi M)^2 sup|poly|; between-grid dip <= |poly''| h^2 / 8
  const double h = 1.0 / grid;
  const double sup_bound = 2.0;  // duals here satisfy sup|P| ~ 1
  const double dip = std::pow(2.0 * two_pi * M, 2) * sup_bound * h * h / 8.0;
  const double prefilter = 1.0 - opts.threshold - dip;

  auto cands = refined_peaks(coef, grid, prefilter, opts.refine_iters);
  std::sort(cands.begin(), cands.end(),
            [](const Peak& a, const Peak& b) { return a.value > b.value; });
  const double merge_radius = opts.merge_radius_factor / M;
  std::vector<double> taus, peaks;
  for (const auto& c : cands) {
    if (c.value < 1.0 - opts.threshold) continue;
    bool merged = false;
    for (double t : taus)
      if (wrap_distance(c.tau, t) < merge_radius) { merged = true; break; }
    if (!merged) {
      taus.push_back(c.tau);
      peaks.push_back(c.value);
    }
  }
  // ascending by location
  std::vector<int> order(taus.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(),
            [&taus](int a, int b) { return taus[a] < taus[b]; });
  std::vector<double> taus_s, peaks_s;
  for (int i : order) {
    taus_s.push_back(taus[i]);
    peaks_s.push_back(peaks[i]);
  }
  return {taus_s, peaks_s};
}

}  // namespace detail

// Channel supports from the dual vector: locations where |P| reaches 1 for
// channel 1 and |Q| reaches 1 for channel 2, with the peak moduli. No model
// order is taken -- the output length is data-driven.
inline LocalizationResult locate_full(const Eigen::VectorXcd& p,
                                      const Eigen::VectorXcd& g, int M,
                                      const LocateOptions& opts = {}) {
  LocalizationResult res;
  if (p.size() != spectrum_length(M) || g.size() != p.size())
    throw parameter_error("locate: inconsistent dimensions");
  if (!(opts.threshold > 0.0 && opts.threshold < 1.0))
    throw parameter_error("locate: threshold must lie in (0,1)");
  std::tie(res.taus1, res.peaks1) = detail::unit_modulus_peaks(p, M, opts);
  const Eigen::VectorXcd q = p.cwiseProduct(g.conjugate());
  std::tie(res.taus2, res.peaks2) = detail::unit_modulus_peaks(q, M, opts);
  return res;
}

// Locations only.
inline std::pair<std::vector<double>, std::vector<double>> locate(
    const Eigen::VectorXcd& p, const Eigen::VectorXcd& g, int M,
    const LocateOptions& opts = {}) {
  auto res = locate_full(p, g, M, opts);
  return {std::move(res.taus1), std::move(res.taus2)};
}

// Least-squares amplitude read-out at fixed locations: y is regressed on the
// atoms of channel 1 and the g-modulated atoms of channel 2. Rank-deficient
// designs (collinear atoms) yield the minimum-norm solution with a flag.
inline void estimate_amplitudes(const Eigen::VectorXcd& y,
                                const Eigen::VectorXcd& g,
                                LocalizationResult& res) {
  const int M = m_from_length(y.size());
  if (g.size() != y.size())
    throw parameter_error("estimate_amplitudes: length mismatch");
  const int k1 = static_cast<int>(res.taus1.size());
  const int k2 = static_cast<int>(res.taus2.size());
  const int cols = k1 + k2;
  if (cols > spectrum_length(M))
    throw parameter_error("estimate_amplitudes: more sources than measurements");
  res.amps1.assign(k1, cxd(0.0, 0.0));
  res.amps2.assign(k2, cxd(0.0, 0.0));
  if (cols == 0) {
    res.residual = y.norm() > 0.0 ? 1.0 : 0.0;
    res.rank_deficient = false;
    return;
  }
  Eigen::MatrixXcd A(y.size(), cols);
  for (int k = 0; k < k1; ++k) A.col(k) = atom(res.taus1[k], M);
  for (int k = 0; k < k2; ++k)
    A.col(k1 + k) = g.cwiseProduct(atom(res.taus2[k], M));
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXcd> cod(A);
  const Eigen::VectorXcd a = cod.solve(y);
  res.rank_deficient = cod.rank() < cols;
  for (int k = 0; k < k1; ++k) res.amps1[k] = a[k];
  for (int k = 0; k < k2; ++k) res.amps2[k] = a[k1 + k];
  const double yn = y.norm();
  const double rn = (y - A * a).norm();
  res.residual = yn > 0.0 ? rn / yn : rn;
}

struct ChannelScore {
  int detected = 0;
  int matched = 0;
  int missed = 0;
  int spurious = 0;
};

struct ScoreRecord {
  ChannelScore ch1, ch2;
  double max_loc_err = 0.0;      // over matched pairs, both channels
  double max_amp_rel_err = 0.0;  // |a_hat - a| / |a| over matched pairs
};

namespace detail {

inline void match_channel(const std::vector<double>& est_taus,
                          const std::vector<cxd>& est_amps,
                          const PointSourceModel& truth, double tol,
                          ChannelScore& cs, double& max_loc, double& max_amp) {
  const int ne = static_cast<int>(est_taus.size());
  const int nt = truth.size();
  cs.detected = ne;
  struct Pair {
    double d;
    int e, t;
  };
  std::vector<Pair> pairs;
  pairs.reserve(static_cast<size_t>(ne) * nt);
  for (int e = 0; e < ne; ++e)
    for (int t = 0; t < nt; ++t)
      pairs.push_back({wrap_distance(est_taus[e], truth.sources[t].tau), e, t});
  std::sort(pairs.begin(), pairs.end(),
            [](const Pair& a, const Pair& b) { return a.d < b.d; });
  std::vector<bool> eu(ne, false), tu(nt, false);
  for (const auto& pr : pairs) {
    if (pr.d > tol) break;
    if (eu[pr.e] || tu[pr.t]) continue;
    eu[pr.e] = true;
    tu[pr.t] = true;
    ++cs.matched;
    max_loc = std::max(max_loc, pr.d);
    const cxd a = truth.sources[pr.t].amp;
    if (std::abs(a) > 0.0 && pr.e < static_cast<int>(est_amps.size()))
      max_amp = std::max(max_amp, std::abs(est_amps[pr.e] - a) / std::abs(a));
  }
  cs.missed = nt - cs.matched;
  cs.spurious = ne - cs.matched;
}

}  // namespace detail

// Greedy minimal-distance matching of estimates against ground truth, per
// channel. Pairs farther than tol never match.
inline ScoreRecord match_and_score(const LocalizationResult& est,
                                   const PointSourceModel& truth1,
                                   const PointSourceModel& truth2, double tol) {
  ScoreRecord rec;
  detail::match_channel(est.taus1, est.amps1, truth1, tol, rec.ch1,
                        rec.max_loc_err, rec.max_amp_rel_err);
  detail::match_channel(est.taus2, est.amps2, truth2, tol, rec.ch2,
                        rec.max_loc_err, rec.max_amp_rel_err);
  return rec;
}

}  // namespace demix

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "demix/errors.hpp"
#include "demix/localizer.hpp"
#include "demix/parallel.hpp"
#include "demix/rng.hpp"
#include "demix/sdp_demixer.hpp"
#include "demix/signal_model.hpp"

namespace demix {

struct TrialConfig {
  int M = 8;
  int K1 = 1;
  int K2 = 1;
  double delta_min = 0.0;  // within-channel separation enforced when sampling
  int trials = 20;
  std::uint64_t base_seed = 0;
  SolverOptions solver;
  double success_nmse = 1e-4;  // success: nmse1 + nmse2 <= this
  AmpLaw amp_law = AmpLaw::complex_gaussian;

  void validate() const {
    if (M < 1) throw parameter_error("trial config: M must be >= 1");
    if (K1 < 1 || K2 < 1) throw parameter_error("trial config: K must be >= 1");
    if (trials < 1) throw parameter_error("trial config: trials must be >= 1");
    if (!(success_nmse > 0.0))
      throw parameter_error("trial config: success_nmse must be > 0");
    if (delta_min * std::max(K1, K2) >= 1.0)
      throw parameter_error("trial config: infeasible separation (K*delta >= 1)");
    if (K1 + K2 > spectrum_length(M))
      throw parameter_error("trial config: more sources than measurements");
  }
};

struct TrialResult {
  int M = 0, K1 = 0, K2 = 0, trial_index = 0;
  std::uint64_t seed = 0;
  bool success = false;
  double nmse1 = 0.0, nmse2 = 0.0, nmse_sum = 0.0;
  bool converged = false;
  int iterations = 0;
  double objective = 0.0;
  double amp_l1 = 0.0;  // sum of |a| over both channels
  double duality_gap = 0.0;
  double measurement_residual_rel = 0.0;
  double dual_norm_P = 0.0, dual_norm_Q = 0.0;
  double psd_min_eig = 0.0;  // min over the two returned blocks
  double t1 = 0.0, t2 = 0.0;
  PointSourceModel truth1, truth2;
  LocalizationResult loc;
  ScoreRecord score;
};

// One seeded end-to-end trial: sample a two-channel instance, mix it through
// a fresh unit-modulus PSF ratio, solve, score against the ground truth, and
// localize from the dual vector.
inline TrialResult run_trial(const TrialConfig& cfg, int trial_index) {
  cfg.validate();
  if (trial_index < 0) throw parameter_error("run_trial: trial_index must be >= 0");

  TrialResult res;
  res.M = cfg.M;
  res.K1 = cfg.K1;
  res.K2 = cfg.K2;
  res.trial_index = trial_index;
  res.seed = mix_seed(cfg.base_seed, static_cast<std::uint64_t>(cfg.K1),
                      static_cast<std::uint64_t>(cfg.K2),
                      static_cast<std::uint64_t>(trial_index));

  std::uint64_t s = res.seed;
  const std::uint64_t seed_src1 = splitmix64(s);
  const std::uint64_t seed_src2 = splitmix64(s);
  const std::uint64_t seed_psf = splitmix64(s);

  res.truth1 = sample_sources(cfg.K1, cfg.delta_min, cfg.amp_law, seed_src1, 1);
  res.truth2 = sample_sources(cfg.K2, cfg.delta_min, cfg.amp_law, seed_src2, 2);
  const PsfRatio psf = sample_psf_ratio(cfg.M, seed_psf);

  const Eigen::VectorXcd x1 = synthesize_signal(res.truth1, cfg.M);
  const Eigen::VectorXcd x2 = synthesize_signal(res.truth2, cfg.M);
  const MixedMeasurement mm = measure(x1, x2, psf);

  DemixSolution sol;
  try {
    sol = solve_demix({mm.y, psf.g, cfg.M}, cfg.solver);
  } catch (const numerical_error&) {
    // recorded as a failed trial, not an exception out of the harness
    res.success = false;
    res.converged = false;
    res.nmse1 = res.nmse2 = res.nmse_sum = std::numeric_limits<double>::infinity();
    return res;
  }

  res.nmse1 = (sol.x1 - x1).norm() / x1.norm();
  res.nmse2 = (sol.x2 - x2).norm() / x2.norm();
  res.nmse_sum = res.nmse1 + res.nmse2;
  res.success = res.nmse_sum <= cfg.success_nmse;
  res.converged = sol.converged;
  res.iterations = sol.iterations;
  res.objective = sol.objective;
  res.amp_l1 = res.truth1.amps().lpNorm<1>() + res.truth2.amps().lpNorm<1>();
  res.duality_gap = sol.duality_gap;
  const double yn = mm.y.norm();
  res.measurement_residual_rel =
      yn > 0.0 ? sol.measurement_residual / yn : sol.measurement_residual;
  res.dual_norm_P = sol.dual_norm_P;
  res.dual_norm_Q = sol.dual_norm_Q;
  res.psd_min_eig = std::min(sol.psd_min_eig_1, sol.psd_min_eig_2);
  res.t1 = sol.t1;
  res.t2 = sol.t2;

  try {
    res.loc = locate_full(sol.p, psf.g, cfg.M);
    estimate_amplitudes(mm.y, psf.g, res.loc);
  } catch (const std::exception&) {
    // an unrecovered instance can put unit-modulus peaks almost everywhere;
    // record whatever was detected and let the score show the miss
    res.loc.amps1.clear();
    res.loc.amps2.clear();
    res.loc.residual = 1.0;
  }
  res.score = match_and_score(res.loc, res.truth1, res.truth2, 0.1 / cfg.M);
  return res;
}

struct PhaseTransitionGrid {
  int M = 0;
  std::vector<int> k_range;  // K values along each axis, 1..k_max
  int trials_per_cell = 0;
  std::uint64_t base_seed = 0;
  double delta_min = 0.0;
  // success_rate(i,j) for K1 = k_range[i], K2 = k_range[j]; NaN = infeasible
  Eigen::MatrixXd success_rate;
};

// Success-rate grid over (K1, K2) at separation 1/(2M), the experimental
// protocol. Cells whose placement is infeasible are marked NaN and never
// attempted. Trials across all cells run in parallel; per-trial seeds are
// keyed on (base_seed, K1, K2, trial), so the result is identical at any
// thread count.
inline PhaseTransitionGrid run_phase_transition(int M, int k_max, int trials,
                                                std::uint64_t base_seed,
                                                const SolverOptions& solver = {},
                                                int threads = 0) {
  if (k_max < 1) throw parameter_error("run_phase_transition: k_max must be >= 1");
  if (trials < 1) throw parameter_error("run_phase_transition: trials must be >= 1");
  PhaseTransitionGrid grid;
  grid.M = M;
  grid.trials_per_cell = trials;
  grid.base_seed = base_seed;
  grid.delta_min = 1.0 / (2.0 * M);
  for (int k = 1; k <= k_max; ++k) grid.k_range.push_back(k);
  grid.success_rate.setConstant(k_max, k_max,
                                std::numeric_limits<double>::quiet_NaN());

  struct Job {
    int i, j, trial;
  };
  std::vector<Job> jobs;
  for (int i = 0; i < k_max; ++i)
    for (int j = 0; j < k_max; ++j) {
      const int K1 = grid.k_range[i];
      const int K2 = grid.k_range[j];
      if (grid.delta_min * std::max(K1, K2) >= 1.0) continue;  // infeasible
      if (K1 + K2 > spectrum_length(M)) continue;
      for (int t = 0; t < trials; ++t) jobs.push_back({i, j, t});
    }

  std::vector<char> ok(jobs.size(), 0);
  parallel_for(
      static_cast<int>(jobs.size()),
      [&](int idx) {
        const Job& jb = jobs[idx];
        TrialConfig cfg;
        cfg.M = M;
        cfg.K1 = grid.k_range[jb.i];
        cfg.K2 = grid.k_range[jb.j];
        cfg.delta_min = grid.delta_min;
        cfg.trials = trials;
        cfg.base_seed = base_seed;
        cfg.solver = solver;
        ok[idx] = run_trial(cfg, jb.trial).success ? 1 : 0;
      },
      threads);

  Eigen::MatrixXi wins = Eigen::MatrixXi::Zero(k_max, k_max);
  Eigen::MatrixXi counts = Eigen::MatrixXi::Zero(k_max, k_max);
  for (size_t idx = 0; idx < jobs.size(); ++idx) {
    wins(jobs[idx].i, jobs[idx].j) += ok[idx];
    counts(jobs[idx].i, jobs[idx].j) += 1;
  }
  for (int i = 0; i < k_max; ++i)
    for (int j = 0; j < k_max; ++j)
      if (counts(i, j) > 0)
        grid.success_rate(i, j) =
            static_cast<double>(wins(i, j)) / counts(i, j);
  return grid;
}

}  // namespace demix

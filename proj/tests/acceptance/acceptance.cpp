// Acceptance suite: one pass/fail line per criterion, exit code = number of
// failed criteria. Run `acceptance all` or `acceptance <n>`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "demix/certificate.hpp"
#include "demix/fejer_kernel.hpp"
#include "demix/harness.hpp"
#include "demix/instance_io.hpp"
#include "demix/localizer.hpp"
#include "demix/parallel.hpp"
#include "demix/sdp_demixer.hpp"

using namespace demix;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      pass = false;
      detail << " [violated: " << what << "]";
    }
  }
};

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

// ---------------------------------------------------------------------- c1
Outcome criterion1() {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  double worst_k0 = 0.0, worst_kp0 = 0.0, worst_kpp0 = 0.0, worst_fd = 0.0;
  for (int M : {4, 8, 16, 32}) {
    const auto k = build_kernel(M);
    worst_k0 = std::max(worst_k0, std::abs(kernel_eval(k, 0.0, 0) - cxd(1, 0)));
    worst_kp0 = std::max(worst_kp0, std::abs(kernel_eval(k, 0.0, 1)));
    const double direct = kernel_eval(k, 0.0, 2).real();
    worst_kpp0 =
        std::max(worst_kpp0, std::abs(direct - k.kpp0) / std::abs(k.kpp0));
    Rng rng(1729 + M);
    const double h = 1e-5;
    for (int l = 0; l <= 2; ++l) {
      double scale = 0.0;
      for (int n = -2 * M; n <= 2 * M; ++n)
        scale += k.sn(n) * std::pow(std::abs(two_pi * n), l + 1);
      scale /= M;
      for (int i = 0; i < 100; ++i) {
        const double tau = rng.uniform();
        const cxd fd =
            (kernel_eval(k, tau + h, l) - kernel_eval(k, tau - h, l)) / (2.0 * h);
        const cxd ex = kernel_eval(k, tau, l + 1);
        worst_fd =
            std::max(worst_fd, std::abs(fd - ex) / std::max(std::abs(ex), scale));
      }
    }
  }
  const double elapsed = seconds_since(t0);
  out.require(worst_k0 <= 1e-12, "K(0) = 1 to 1e-12");
  out.require(worst_kp0 <= 1e-12, "K'(0) = 0 to 1e-12");
  out.require(worst_kpp0 <= 1e-10, "K''(0) matches closed form to 1e-10");
  out.require(worst_fd <= 1e-4, "finite-difference checks to 1e-4");
  out.require(elapsed < 1.0, "runtime < 1 s");
  out.detail << "max |K(0)-1|=" << worst_k0 << ", |K'(0)|=" << worst_kp0
             << ", K''(0) rel err=" << worst_kpp0 << ", fd rel err=" << worst_fd
             << ", " << elapsed << " s";
  return out;
}

// shared certificate instances for c2/c3
struct CertInstance {
  PointSourceModel s1, s2;
  PsfRatio psf;
};

CertInstance cert_instance(int M, int K, std::uint64_t seed) {
  std::uint64_t s = seed;
  const auto sa = splitmix64(s), sb = splitmix64(s), sg = splitmix64(s);
  CertInstance ci;
  ci.s1 = sample_sources(K, 1.0 / M, AmpLaw::unit_circle, sa, 1);
  ci.s2 = sample_sources(K, 1.0 / M, AmpLaw::unit_circle, sb, 2);
  ci.psf = sample_psf_ratio(M, sg);
  return ci;
}

constexpr std::uint64_t kCertSeed = 0x5eedcafe;

// ---------------------------------------------------------------------- c2
Outcome criterion2() {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  const int M = 16;
  const auto kern = build_kernel(M);
  int valid = 0, solved = 0;
  double worst_interp = 0.0;
  for (int i = 0; i < 50; ++i) {
    const auto ci = cert_instance(M, 2, mix_seed(kCertSeed, 2, 2, i));
    auto sys = build_system(kern, ci.psf, ci.s1, ci.s2);
    solve_coefficients(sys, ci.s1.signs(), ci.s2.signs());
    ++solved;
    const auto dual = certificate_polynomials(sys);
    const auto rep = verify_certificate(dual, ci.s1, ci.s2, ci.s1.signs(),
                                        ci.s2.signs(), 64 * M, 1e-3);
    worst_interp = std::max({worst_interp, rep.interp_err_P, rep.interp_err_Q});
    if (rep.valid) ++valid;
  }
  const double elapsed = seconds_since(t0);
  out.require(solved == 50, "solve_coefficients succeeds on all 50");
  out.require(worst_interp <= 1e-8, "interpolation error <= 1e-8");
  out.require(valid >= 45, "VALID verdict in >= 45 of 50");
  out.require(elapsed < 10.0, "runtime < 10 s");
  out.detail << "solved " << solved << "/50, max interp err=" << worst_interp
             << ", valid " << valid << "/50, " << elapsed << " s";
  return out;
}

// ---------------------------------------------------------------------- c3
Outcome criterion3() {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  double worst_contract = 0.0;
  const auto kern16 = build_kernel(16);
  for (int i = 0; i < 50; ++i) {
    const auto ci = cert_instance(16, 2, mix_seed(kCertSeed, 2, 2, i));
    const auto sys = build_system(kern16, ci.psf, ci.s1, ci.s2);
    const auto diag = invertibility_diagnostics(sys);
    worst_contract = std::max({worst_contract, diag.i_minus_w1, diag.i_minus_w2});
  }

  auto wg_median = [](int M) {
    const auto kern = build_kernel(M);
    std::vector<double> w;
    for (int i = 0; i < 50; ++i) {
      const auto ci = cert_instance(M, 2, mix_seed(kCertSeed ^ 0xbeef, M, 2, i));
      w.push_back(
          invertibility_diagnostics(build_system(kern, ci.psf, ci.s1, ci.s2))
              .wg_norm);
    }
    std::sort(w.begin(), w.end());
    return w[w.size() / 2];
  };
  const double med8 = wg_median(8);
  const double med32 = wg_median(32);
  const double elapsed = seconds_since(t0);
  out.require(worst_contract <= 0.3623, "|I - Wi| <= 0.3623 on all instances");
  out.require(med32 < med8, "median |Wg| at M=32 below median at M=8");
  out.require(elapsed < 20.0, "runtime < 20 s");
  out.detail << "max |I-Wi|=" << worst_contract << ", median |Wg| M=8: " << med8
             << ", M=32: " << med32 << ", " << elapsed << " s";
  return out;
}

// shared solver suites for c4..c7
constexpr std::uint64_t kTrialSeed = 0xdeb1e5;

struct SolveSuites {
  std::vector<TrialResult> two_source;     // M=16, K1=K2=2, delta=1/32
  std::vector<TrialResult> single_source;  // M=8, K1=K2=1, delta=1/16
  double max_solve_seconds = 0.0;
  double total_seconds = 0.0;
};

const SolveSuites& solve_suites() {
  static const SolveSuites suites = [] {
    SolveSuites s;
    const auto t0 = std::chrono::steady_clock::now();
    TrialConfig a;
    a.M = 16;
    a.K1 = a.K2 = 2;
    a.delta_min = 1.0 / 32.0;
    a.base_seed = kTrialSeed;
    TrialConfig b;
    b.M = 8;
    b.K1 = b.K2 = 1;
    b.delta_min = 1.0 / 16.0;
    b.base_seed = kTrialSeed;
    s.two_source.resize(20);
    s.single_source.resize(20);
    std::vector<double> times(40, 0.0);
    parallel_for(40, [&](int i) {
      const auto start = std::chrono::steady_clock::now();
      if (i < 20)
        s.two_source[i] = run_trial(a, i);
      else
        s.single_source[i - 20] = run_trial(b, i - 20);
      times[i] = seconds_since(start);
    });
    s.max_solve_seconds = *std::max_element(times.begin(), times.end());
    s.total_seconds = seconds_since(t0);
    return s;
  }();
  return suites;
}

// ---------------------------------------------------------------------- c4
Outcome criterion4() {
  Outcome out;
  const auto& s = solve_suites();
  int ok2 = 0, ok1 = 0;
  for (const auto& t : s.two_source) ok2 += t.success ? 1 : 0;
  for (const auto& t : s.single_source) ok1 += t.success ? 1 : 0;
  out.require(ok2 >= 18, "two-source M=16 suite >= 18/20 at NMSE 1e-4");
  out.require(ok1 >= 19, "single-source M=8 suite >= 19/20 at NMSE 1e-4");
  out.require(s.max_solve_seconds < 30.0, "per-solve runtime < 30 s");
  out.require(s.total_seconds < 900.0, "suite runtime < 15 min");
  out.detail << "successes M=16: " << ok2 << "/20, M=8: " << ok1
             << "/20, slowest solve " << s.max_solve_seconds << " s, suite "
             << s.total_seconds << " s";
  return out;
}

// ---------------------------------------------------------------------- c5
Outcome criterion5() {
  Outcome out;
  const auto& s = solve_suites();
  double worst_meas = 0.0, worst_eig = 0.0, worst_gap = 0.0, worst_dual = 0.0;
  int converged = 0;
  auto scan = [&](const std::vector<TrialResult>& trials) {
    for (const auto& t : trials) {
      if (!t.converged) continue;
      ++converged;
      worst_meas = std::max(worst_meas, t.measurement_residual_rel);
      const double tmax = std::max(t.t1, t.t2);
      worst_eig = std::max(worst_eig, -t.psd_min_eig / (1.0 + tmax));
      worst_gap = std::max(worst_gap,
                           std::abs(t.duality_gap) / (1.0 + std::abs(t.objective)));
      worst_dual = std::max({worst_dual, t.dual_norm_P, t.dual_norm_Q});
    }
  };
  scan(s.two_source);
  scan(s.single_source);
  out.require(converged > 0, "at least one converged solve");
  out.require(worst_meas <= 1e-6, "measurement residual <= 1e-6 relative");
  out.require(worst_eig <= 1e-8, "PSD min eigenvalue >= -1e-8 (1+t)");
  out.require(worst_gap <= 1e-3, "duality gap <= 1e-3 (1+|objective|)");
  out.require(worst_dual <= 1.0 + 1e-3, "dual-norm sup <= 1 + 1e-3");
  out.detail << converged << " converged solves; worst meas rel=" << worst_meas
             << ", psd eig slack=" << worst_eig << ", gap=" << worst_gap
             << ", dual sup=" << worst_dual;
  return out;
}

// ---------------------------------------------------------------------- c6
Outcome criterion6() {
  Outcome out;
  const auto& s = solve_suites();
  double worst = 0.0;
  int counted = 0;
  auto scan = [&](const std::vector<TrialResult>& trials) {
    for (const auto& t : trials) {
      if (!t.success) continue;
      ++counted;
      worst = std::max(worst, std::abs(t.objective - t.amp_l1) / t.amp_l1);
    }
  };
  scan(s.two_source);
  scan(s.single_source);
  out.require(counted > 0, "at least one recovered instance");
  out.require(worst <= 1e-3, "|objective - sum|a|| <= 1e-3 sum|a|");
  out.detail << counted << " recovered instances, worst objective/atomic-norm "
             << "mismatch=" << worst;
  return out;
}

// ---------------------------------------------------------------------- c7
Outcome criterion7() {
  Outcome out;
  const auto& s = solve_suites();
  int counted = 0;
  double worst_loc = 0.0, worst_amp = 0.0;
  bool counts_ok = true;
  auto scan = [&](const std::vector<TrialResult>& trials, int K1, int K2) {
    for (const auto& t : trials) {
      if (!t.success) continue;
      ++counted;
      counts_ok = counts_ok &&
                  static_cast<int>(t.loc.taus1.size()) == K1 &&
                  static_cast<int>(t.loc.taus2.size()) == K2 &&
                  t.score.ch1.missed == 0 && t.score.ch2.missed == 0;
      worst_loc = std::max(worst_loc, t.score.max_loc_err);
      worst_amp = std::max(worst_amp, t.score.max_amp_rel_err);
    }
  };
  scan(s.two_source, 2, 2);
  scan(s.single_source, 1, 1);
  out.require(counted > 0, "at least one recovered instance");
  out.require(counts_ok, "detected counts equal (K1, K2) with no model order input");
  out.require(worst_loc <= 1e-3, "max wrap-location error <= 1e-3");
  out.require(worst_amp <= 1e-2, "amplitude relative error <= 1e-2");
  out.detail << counted << " recovered instances, worst loc err=" << worst_loc
             << ", worst amp rel err=" << worst_amp;
  return out;
}

// ---------------------------------------------------------------------- c8
constexpr std::uint64_t kPhaseSeed = 0x9a5e;

Outcome criterion8() {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  const auto g8 = run_phase_transition(8, 6, 20, kPhaseSeed);
  const auto g16 = run_phase_transition(16, 6, 20, kPhaseSeed);
  emit_results(g8, "acceptance_grid_m8.csv", EmitFormat::csv);
  emit_results(g16, "acceptance_grid_m16.csv", EmitFormat::csv);
  const double elapsed = seconds_since(t0);

  const double corner = g8.success_rate(0, 0);
  double lo_sum = 0.0, hi_sum = 0.0;
  int lo_n = 0, hi_n = 0;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      const double r = g8.success_rate(i, j);
      if (std::isnan(r)) continue;
      const int ksum = g8.k_range[i] + g8.k_range[j];
      if (ksum <= 4) {
        lo_sum += r;
        ++lo_n;
      }
      if (ksum >= 10) {
        hi_sum += r;
        ++hi_n;
      }
    }
  const double lo_mean = lo_sum / lo_n;
  const double hi_mean = hi_sum / hi_n;

  bool dominance = true;
  double worst_gap = 0.0;
  const double slack = 1.0 / 20.0;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      const double r8 = g8.success_rate(i, j);
      const double r16 = g16.success_rate(i, j);
      if (std::isnan(r8) || std::isnan(r16)) continue;
      if (r16 < r8 - slack) {
        dominance = false;
        worst_gap = std::max(worst_gap, r8 - r16);
      }
    }

  out.require(corner >= 0.95, "cell (1,1) rate >= 0.95");
  out.require(lo_mean - hi_mean >= 0.3,
              "mean rate K1+K2<=4 exceeds mean K1+K2>=10 by >= 0.3");
  out.require(dominance, "M=16 grid >= M=8 grid minus one-trial slack cellwise");
  out.require(elapsed < 4.0 * 3600.0, "runtime < 4 h");
  out.detail << "corner=" << corner << ", easy mean=" << lo_mean
             << ", hard mean=" << hi_mean << ", dominance "
             << (dominance ? "holds" : "fails");
  if (!dominance) out.detail << " (worst gap " << worst_gap << ")";
  out.detail << ", " << elapsed << " s, grids written to acceptance_grid_m8.csv"
             << " / acceptance_grid_m16.csv";
  return out;
}

// ---------------------------------------------------------------------- c9
Outcome criterion9() {
  Outcome out;

  // seeded trial record, twice
  TrialConfig cfg;
  cfg.M = 8;
  cfg.K1 = cfg.K2 = 1;
  cfg.delta_min = 1.0 / 16.0;
  cfg.base_seed = kTrialSeed;
  const std::string t1 = trial_to_json(run_trial(cfg, 0)).dump();
  const std::string t2 = trial_to_json(run_trial(cfg, 0)).dump();
  out.require(t1 == t2, "trial JSON bit-identical across reruns");

  // phase grid artifacts, twice (exercises the parallel path as well)
  const auto ga = run_phase_transition(8, 2, 2, kPhaseSeed);
  const auto gb = run_phase_transition(8, 2, 2, kPhaseSeed);
  out.require(grid_to_csv(ga) == grid_to_csv(gb),
              "grid CSV bit-identical across reruns");
  out.require(grid_to_json(ga).dump() == grid_to_json(gb).dump(),
              "grid JSON bit-identical across reruns");

  // certificate report, twice
  const auto kern = build_kernel(16);
  auto report_once = [&kern]() {
    const auto ci = cert_instance(16, 2, mix_seed(kCertSeed, 2, 2, 0));
    auto sys = build_system(kern, ci.psf, ci.s1, ci.s2);
    solve_coefficients(sys, ci.s1.signs(), ci.s2.signs());
    const auto dual = certificate_polynomials(sys);
    const auto rep = verify_certificate(dual, ci.s1, ci.s2, ci.s1.signs(),
                                        ci.s2.signs(), 64 * 16, 1e-3);
    return report_to_json(rep, invertibility_diagnostics(sys)).dump();
  };
  out.require(report_once() == report_once(),
              "certificate report bit-identical across reruns");
  out.detail << "trial/grid/report artifacts reproduce byte-for-byte";
  return out;
}

struct Criterion {
  int number;
  const char* name;
  std::function<Outcome()> fn;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> cs = {
      {1, "kernel identities", criterion1},
      {2, "certificate interpolation", criterion2},
      {3, "invertibility diagnostics", criterion3},
      {4, "solver exactness", criterion4},
      {5, "duality and feasibility", criterion5},
      {6, "objective equals atomic norm on recovery", criterion6},
      {7, "localization without model order", criterion7},
      {8, "phase-transition reproduction", criterion8},
      {9, "determinism", criterion9},
  };
  return cs;
}

}  // namespace

int main(int argc, char** argv) {
  std::string which = argc > 1 ? argv[1] : "all";
  int failures = 0;
  int ran = 0;
  for (const auto& c : criteria()) {
    if (which != "all" && which != std::to_string(c.number)) continue;
    ++ran;
    Outcome out;
    try {
      out = c.fn();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail << "exception: " << e.what();
    }
    std::cout << (out.pass ? "[PASS]" : "[FAIL]") << " criterion " << c.number
              << ": " << c.name << " (" << out.detail.str() << ")\n";
    if (!out.pass) ++failures;
  }
  if (ran == 0) {
    std::cerr << "usage: acceptance [all|1..9]\n";
    return 1;
  }
  return failures;
}

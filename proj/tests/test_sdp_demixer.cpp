#include <catch2/catch_amalgamated.hpp>

#include <limits>

#include "demix/sdp_demixer.hpp"
#include "demix/signal_model.hpp"

using namespace demix;

TEST_CASE("zero measurement solves to zero") {
  const int M = 4;
  const auto psf = sample_psf_ratio(M, 1);
  DemixProblem prob{Eigen::VectorXcd::Zero(spectrum_length(M)), psf.g, M};
  const auto sol = solve_demix(prob);
  CHECK(sol.converged);
  CHECK(sol.x1.norm() < 1e-6);
  CHECK(sol.x2.norm() < 1e-6);
  // objective settles to zero at the solver's absolute-tolerance scale
  CHECK(std::abs(sol.objective) < 1e-5);
  CHECK(sol.p.norm() < 1e-9);  // zero dual is admissible
}

TEST_CASE("single atom is recovered exactly") {
  const int M = 8;
  const auto psf = sample_psf_ratio(M, 2024);
  const auto c = atom(0.3, M);
  DemixProblem prob{c, psf.g, M};
  const auto sol = solve_demix(prob);
  REQUIRE(sol.converged);
  CHECK((sol.x1 - c).norm() / c.norm() <= 1e-4);
  CHECK(sol.x2.norm() <= 1e-4 * c.norm());
  CHECK(sol.objective == Catch::Approx(1.0).margin(1e-3));
  // strong duality
  CHECK(real_inner(sol.p, prob.y) == Catch::Approx(sol.objective).margin(1e-3));
  // dual feasibility on a grid
  CHECK(sol.dual_norm_P <= 1.0 + 1e-3);
  CHECK(sol.dual_norm_Q <= 1.0 + 1e-3);
  // feasibility and conic membership of the returned blocks
  CHECK(sol.measurement_residual <= 1e-6 * prob.y.norm());
  CHECK(sol.psd_min_eig_1 >= -1e-8 * (1.0 + sol.t1));
  CHECK(sol.psd_min_eig_2 >= -1e-8 * (1.0 + sol.t2));
}

TEST_CASE("two well-separated sources per channel are recovered at M=16") {
  const int M = 16;
  std::uint64_t s = 2025;
  const auto s1 = sample_sources(2, 1.0 / M, AmpLaw::complex_gaussian, splitmix64(s), 1);
  const auto s2 = sample_sources(2, 1.0 / M, AmpLaw::complex_gaussian, splitmix64(s), 2);
  const auto psf = sample_psf_ratio(M, splitmix64(s));
  const auto x1 = synthesize_signal(s1, M);
  const auto x2 = synthesize_signal(s2, M);
  const auto mm = measure(x1, x2, psf);
  const auto sol = solve_demix({mm.y, psf.g, M});
  REQUIRE(sol.converged);
  const double nmse = (sol.x1 - x1).norm() / x1.norm() +
                      (sol.x2 - x2).norm() / x2.norm();
  CHECK(nmse <= 1e-4);
  // objective equals the atomic norm of the truth on exact recovery
  const double amp_l1 = s1.amps().lpNorm<1>() + s2.amps().lpNorm<1>();
  CHECK(std::abs(sol.objective - amp_l1) <= 1e-3 * amp_l1);
  CHECK(std::abs(sol.duality_gap) <= 1e-3 * (1.0 + std::abs(sol.objective)));
}

TEST_CASE("solutions scale with the measurement") {
  const int M = 8;
  const auto psf = sample_psf_ratio(M, 31);
  std::uint64_t s = 11;
  const auto s1 = sample_sources(2, 1.0 / M, AmpLaw::complex_gaussian, splitmix64(s), 1);
  const auto s2 = sample_sources(1, 1.0 / M, AmpLaw::complex_gaussian, splitmix64(s), 2);
  const auto mm = measure(synthesize_signal(s1, M), synthesize_signal(s2, M), psf);
  const auto a = solve_demix({mm.y, psf.g, M});
  const auto b = solve_demix({2.0 * mm.y, psf.g, M});
  REQUIRE(a.converged);
  REQUIRE(b.converged);
  CHECK((b.x1 - 2.0 * a.x1).norm() <= 1e-6 * (2.0 * a.x1).norm());
  CHECK((b.x2 - 2.0 * a.x2).norm() <= 1e-6 * (2.0 * a.x2).norm());
  CHECK(b.objective == Catch::Approx(2.0 * a.objective).epsilon(1e-5));
}

TEST_CASE("iteration cap returns the best iterate, flagged") {
  const int M = 4;
  const auto psf = sample_psf_ratio(M, 3);
  SolverOptions opts;
  opts.max_iters = 5;
  const auto sol = solve_demix({atom(0.2, M), psf.g, M}, opts);
  CHECK_FALSE(sol.converged);
  CHECK_FALSE(sol.dual_reliable);
  CHECK(sol.iterations == 5);
  CHECK(sol.x1.allFinite());
}

TEST_CASE("non-finite input raises a numerical error") {
  const int M = 4;
  const auto psf = sample_psf_ratio(M, 3);
  Eigen::VectorXcd y = atom(0.2, M);
  y[0] = cxd(std::numeric_limits<double>::quiet_NaN(), 0.0);
  CHECK_THROWS_AS(solve_demix({y, psf.g, M}), numerical_error);
}

TEST_CASE("problem validation") {
  const int M = 4;
  const auto psf = sample_psf_ratio(M, 3);
  Eigen::VectorXcd y = atom(0.2, M);
  CHECK_THROWS_AS(solve_demix({y.head(5), psf.g, M}), parameter_error);
  Eigen::VectorXcd g0 = psf.g;
  g0[1] = cxd(0.0, 0.0);
  CHECK_THROWS_AS(solve_demix({y, g0, M}), parameter_error);
  SolverOptions bad;
  bad.max_iters = 0;
  CHECK_THROWS_AS(solve_demix({y, psf.g, M}, bad), parameter_error);
}

TEST_CASE("dual norm basics") {
  const int M = 4;
  Eigen::VectorXcd e0 = Eigen::VectorXcd::Zero(spectrum_length(M));
  e0[2 * M] = cxd(1.0, 0.0);  // constant polynomial
  CHECK(dual_norm(e0, 16 * M) == Catch::Approx(1.0).margin(1e-12));

  // conjugated atom, scaled: peak 1 at tau = 0.5
  Eigen::VectorXcd pk = atom(0.5, M).conjugate() / double(spectrum_length(M));
  CHECK(dual_norm(pk, 64 * M) == Catch::Approx(1.0).margin(1e-9));

  CHECK(dual_norm(2.0 * pk, 64 * M) ==
        Catch::Approx(2.0 * dual_norm(pk, 64 * M)).epsilon(1e-12));
}

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <utility>
#include <vector>

#include "demix/errors.hpp"
#include "demix/rng.hpp"

namespace demix {

using cxd = std::complex<double>;

// All spectra live on the symmetric frequency window n = -2M..2M, stored in
// ascending n with offset index i = n + 2M.
inline int spectrum_length(int M) { return 4 * M + 1; }

inline int m_from_length(Eigen::Index len) {
  if (len < 5 || (len - 1) % 4 != 0)
    throw parameter_error("vector length must be 4M+1 for some M >= 1");
  return static_cast<int>((len - 1) / 4);
}

// Wrap-around distance on the unit circle [0,1).
inline double wrap_distance(double a, double b) {
  double d = std::fmod(std::abs(a - b), 1.0);
  return std::min(d, 1.0 - d);
}

struct Source {
  double tau = 0.0;
  cxd amp{0.0, 0.0};
};

struct PointSourceModel {
  std::vector<Source> sources;
  int channel_id = 1;

  int size() const { return static_cast<int>(sources.size()); }

  std::vector<double> taus() const {
    std::vector<double> t;
    t.reserve(sources.size());
    for (const auto& s : sources) t.push_back(s.tau);
    return t;
  }

  Eigen::VectorXcd amps() const {
    Eigen::VectorXcd a(sources.size());
    for (int k = 0; k < size(); ++k) a[k] = sources[k].amp;
    return a;
  }

  // complex signs a/|a|
  Eigen::VectorXcd signs() const {
    Eigen::VectorXcd s(sources.size());
    for (int k = 0; k < size(); ++k) {
      const double m = std::abs(sources[k].amp);
      if (m == 0.0)
        throw parameter_error("zero amplitude has no complex sign");
      s[k] = sources[k].amp / m;
    }
    return s;
  }

  void validate() const {
    for (const auto& s : sources)
      if (!(s.tau >= 0.0 && s.tau < 1.0))
        throw parameter_error("source location must lie in [0,1)");
    for (size_t i = 0; i < sources.size(); ++i)
      for (size_t j = i + 1; j < sources.size(); ++j)
        if (sources[i].tau == sources[j].tau)
          throw parameter_error("source locations must be distinct");
  }
};

struct PsfRatio {
  Eigen::VectorXcd g;
  int M = 0;

  void validate() const {
    if (M < 1 || g.size() != spectrum_length(M))
      throw parameter_error("psf ratio length must be 4M+1");
    for (Eigen::Index i = 0; i < g.size(); ++i)
      if (g[i] == cxd(0.0, 0.0))
        throw parameter_error("psf ratio entries must be nonzero");
  }
};

struct MixedMeasurement {
  Eigen::VectorXcd y;
  PsfRatio psf;
  int M = 0;
};

// Point-source atom: entry at frequency n equals e^{-j 2 pi n tau}.
inline Eigen::VectorXcd atom(double tau, int M) {
  if (!(tau >= 0.0 && tau < 1.0))
    throw parameter_error("atom: tau must lie in [0,1)");
  if (M < 1) throw parameter_error("atom: M must be >= 1");
  Eigen::VectorXcd c(spectrum_length(M));
  for (int n = -2 * M; n <= 2 * M; ++n)
    c[n + 2 * M] = std::polar(1.0, -two_pi * n * tau);
  return c;
}

inline Eigen::VectorXcd synthesize_signal(const PointSourceModel& model, int M) {
  if (model.size() < 1)
    throw parameter_error("synthesize_signal: model must have K >= 1 sources");
  model.validate();
  Eigen::VectorXcd x = Eigen::VectorXcd::Zero(spectrum_length(M));
  for (const auto& s : model.sources) x += s.amp * atom(s.tau, M);
  return x;
}

// Minimum pairwise wrap distance. Returns 1.0 for K <= 1 (any separation
// threshold is then vacuously satisfied).
inline double min_separation(const PointSourceModel& model) {
  const int K = model.size();
  if (K <= 1) return 1.0;
  double best = 1.0;
  for (int i = 0; i < K; ++i)
    for (int j = i + 1; j < K; ++j)
      best = std::min(best, wrap_distance(model.sources[i].tau, model.sources[j].tau));
  return best;
}

enum class AmpLaw { complex_gaussian, unit_circle };

// Sequential placement with rejection: each new location is redrawn until it
// clears delta_min against everything accepted so far; one global retry
// budget covers the whole draw.
inline PointSourceModel sample_sources(int K, double delta_min, AmpLaw law,
                                       std::uint64_t seed, int channel_id = 1) {
  if (K < 1) throw parameter_error("sample_sources: K must be >= 1");
  if (delta_min < 0.0) throw parameter_error("sample_sources: delta_min must be >= 0");
  if (K * delta_min >= 1.0)
    throw parameter_error("sample_sources: infeasible (K * delta_min >= 1)");

  constexpr int kRetryBudget = 100000;
  Rng rng(seed);
  PointSourceModel model;
  model.channel_id = channel_id;
  std::vector<double> taus;
  taus.reserve(K);
  int attempts = 0;
  while (static_cast<int>(taus.size()) < K) {
    if (++attempts > kRetryBudget)
      throw numerical_error("sample_sources: rejection budget exhausted");
    const double tau = rng.uniform();
    bool ok = true;
    for (double t : taus)
      if (wrap_distance(tau, t) < delta_min) { ok = false; break; }
    if (ok) taus.push_back(tau);
  }
  model.sources.resize(K);
  for (int k = 0; k < K; ++k) {
    model.sources[k].tau = taus[k];
    model.sources[k].amp =
        law == AmpLaw::complex_gaussian ? rng.complex_gaussian() : rng.unit_circle();
  }
  return model;
}

// Unit-modulus ratio g_n = e^{j 2 pi phi_n}, phi_n i.i.d. uniform on [0,1).
inline PsfRatio sample_psf_ratio(int M, std::uint64_t seed) {
  if (M < 1) throw parameter_error("sample_psf_ratio: M must be >= 1");
  Rng rng(seed);
  PsfRatio psf;
  psf.M = M;
  psf.g.resize(spectrum_length(M));
  for (Eigen::Index i = 0; i < psf.g.size(); ++i) psf.g[i] = rng.unit_circle();
  return psf;
}

inline MixedMeasurement measure(const Eigen::VectorXcd& x1,
                                const Eigen::VectorXcd& x2, const PsfRatio& psf) {
  psf.validate();
  if (x1.size() != psf.g.size() || x2.size() != psf.g.size())
    throw parameter_error("measure: channel/psf length mismatch");
  MixedMeasurement m;
  m.M = psf.M;
  m.psf = psf;
  m.y = x1 + psf.g.cwiseProduct(x2);
  return m;
}

// Divide a raw two-PSF observation through by the first channel's spectrum,
// returning the normalized measurement and the ratio g = g2/g1. The division
// is refused when any |g1_n| falls under `floor`.
inline std::pair<Eigen::VectorXcd, PsfRatio> normalize_raw_channels(
    const Eigen::VectorXcd& y_raw, const Eigen::VectorXcd& g1,
    const Eigen::VectorXcd& g2, double floor = 1e-8) {
  if (floor <= 0.0) throw parameter_error("normalize_raw_channels: floor must be > 0");
  if (y_raw.size() != g1.size() || y_raw.size() != g2.size())
    throw parameter_error("normalize_raw_channels: length mismatch");
  const int M = m_from_length(y_raw.size());
  for (Eigen::Index i = 0; i < g1.size(); ++i)
    if (std::abs(g1[i]) < floor)
      throw numerical_error("normalize_raw_channels: ill-conditioned PSF (|g1_n| below floor)");
  PsfRatio psf;
  psf.M = M;
  psf.g = g2.cwiseQuotient(g1);
  return {y_raw.cwiseQuotient(g1), std::move(psf)};
}

}  // namespace demix

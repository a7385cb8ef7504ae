#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "demix/certificate.hpp"
#include "demix/errors.hpp"
#include "demix/harness.hpp"
#include "demix/localizer.hpp"
#include "demix/sdp_demixer.hpp"
#include "demix/signal_model.hpp"

namespace demix {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// instance files
// ---------------------------------------------------------------------------

// A problem instance as stored on disk: ground-truth channels plus either a
// PSF seed or the explicit ratio vector.
struct Instance {
  int M = 0;
  PointSourceModel channel1, channel2;
  std::optional<std::uint64_t> psf_seed;
  std::optional<Eigen::VectorXcd> g;
};

inline json complex_vector_to_json(const Eigen::VectorXcd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i)
    arr.push_back({v[i].real(), v[i].imag()});
  return arr;
}

inline Eigen::VectorXcd complex_vector_from_json(const json& arr) {
  if (!arr.is_array()) throw parameter_error("expected [[re, im], ...] array");
  Eigen::VectorXcd v(arr.size());
  for (size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_array() || arr[i].size() != 2)
      throw parameter_error("expected [re, im] pair");
    v[i] = cxd(arr[i][0].get<double>(), arr[i][1].get<double>());
  }
  return v;
}

inline json channel_to_json(const PointSourceModel& m) {
  json arr = json::array();
  for (const auto& s : m.sources)
    arr.push_back({{"tau", s.tau}, {"re", s.amp.real()}, {"im", s.amp.imag()}});
  return arr;
}

inline PointSourceModel channel_from_json(const json& arr, int channel_id) {
  PointSourceModel m;
  m.channel_id = channel_id;
  if (!arr.is_array()) throw parameter_error("channel must be an array");
  for (const auto& e : arr) {
    Source s;
    s.tau = e.at("tau").get<double>();
    s.amp = cxd(e.at("re").get<double>(), e.at("im").get<double>());
    m.sources.push_back(s);
  }
  m.validate();
  return m;
}

inline json instance_to_json(const Instance& inst) {
  json j;
  j["M"] = inst.M;
  j["channel1"] = channel_to_json(inst.channel1);
  j["channel2"] = channel_to_json(inst.channel2);
  if (inst.psf_seed)
    j["psf_seed"] = *inst.psf_seed;
  else if (inst.g)
    j["g"] = complex_vector_to_json(*inst.g);
  else
    throw parameter_error("instance needs psf_seed or g");
  return j;
}

inline Instance instance_from_json(const json& j) {
  Instance inst;
  inst.M = j.at("M").get<int>();
  if (inst.M < 1) throw parameter_error("instance: M must be >= 1");
  inst.channel1 = channel_from_json(j.at("channel1"), 1);
  inst.channel2 = channel_from_json(j.at("channel2"), 2);
  if (j.contains("g")) {
    Eigen::VectorXcd g = complex_vector_from_json(j["g"]);
    if (g.size() != spectrum_length(inst.M))
      throw parameter_error("instance: g must have length 4M+1");
    inst.g = g;
  } else if (j.contains("psf_seed")) {
    inst.psf_seed = j["psf_seed"].get<std::uint64_t>();
  } else {
    throw parameter_error("instance: needs psf_seed or g");
  }
  return inst;
}

inline PsfRatio instance_psf(const Instance& inst) {
  if (inst.g) {
    PsfRatio psf;
    psf.M = inst.M;
    psf.g = *inst.g;
    psf.validate();
    return psf;
  }
  return sample_psf_ratio(inst.M, *inst.psf_seed);
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw parameter_error("cannot open file for reading: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw parameter_error("malformed JSON in " + path + ": " + e.what());
  }
  return j;
}

inline void save_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw parameter_error("cannot open file for writing: " + path);
  out << text;
  if (!out) throw parameter_error("write failed: " + path);
}

// ---------------------------------------------------------------------------
// solution / report records
// ---------------------------------------------------------------------------

inline json localization_to_json(const LocalizationResult& loc) {
  json j;
  j["taus1"] = loc.taus1;
  j["taus2"] = loc.taus2;
  json a1 = json::array(), a2 = json::array();
  for (const auto& a : loc.amps1) a1.push_back({a.real(), a.imag()});
  for (const auto& a : loc.amps2) a2.push_back({a.real(), a.imag()});
  j["amps1"] = a1;
  j["amps2"] = a2;
  j["residual"] = loc.residual;
  j["rank_deficient"] = loc.rank_deficient;
  return j;
}

inline json solution_to_json(const DemixSolution& sol,
                             const LocalizationResult* loc = nullptr) {
  json j;
  j["x1"] = complex_vector_to_json(sol.x1);
  j["x2"] = complex_vector_to_json(sol.x2);
  j["u1"] = complex_vector_to_json(sol.u1);
  j["u2"] = complex_vector_to_json(sol.u2);
  j["t1"] = sol.t1;
  j["t2"] = sol.t2;
  j["p"] = complex_vector_to_json(sol.p);
  j["objective"] = sol.objective;
  j["residuals"] = {{"primal", sol.primal_residual},
                    {"dual", sol.dual_residual},
                    {"measurement", sol.measurement_residual}};
  j["duality_gap"] = sol.duality_gap;
  j["dual_norm_P"] = sol.dual_norm_P;
  j["dual_norm_Q"] = sol.dual_norm_Q;
  j["iterations"] = sol.iterations;
  j["converged"] = sol.converged;
  j["dual_reliable"] = sol.dual_reliable;
  if (loc) j["localization"] = localization_to_json(*loc);
  return j;
}

inline json report_to_json(const CertificateReport& rep,
                           const DiagnosticsRecord& diag) {
  json j;
  j["interp_err_P"] = rep.interp_err_P;
  j["interp_err_Q"] = rep.interp_err_Q;
  j["offgrid_max_P"] = rep.offgrid_max_P;
  j["offgrid_max_Q"] = rep.offgrid_max_Q;
  j["exclusion_radius"] = rep.exclusion_radius;
  j["margin"] = rep.margin;
  j["valid"] = rep.valid;
  j["norms"] = {{"i_minus_w1", diag.i_minus_w1},
                {"i_minus_w2", diag.i_minus_w2},
                {"w1", diag.w1_norm},
                {"w2", diag.w2_norm},
                {"w1_inv", diag.w1_inv_norm},
                {"w2_inv", diag.w2_inv_norm},
                {"wg", diag.wg_norm},
                {"w_inv", diag.w_inv_norm}};
  j["flags"] = {{"near_identity_1", diag.near_identity_1},
                {"near_identity_2", diag.near_identity_2},
                {"block_norm_ok_1", diag.block_norm_ok_1},
                {"block_norm_ok_2", diag.block_norm_ok_2},
                {"block_inv_ok_1", diag.block_inv_ok_1},
                {"block_inv_ok_2", diag.block_inv_ok_2},
                {"cross_block_small", diag.cross_block_small},
                {"theory_regime", diag.theory_regime}};
  return j;
}

// ---------------------------------------------------------------------------
// trial and grid emission
// ---------------------------------------------------------------------------

inline json trial_to_json(const TrialResult& r) {
  json j;
  j["M"] = r.M;
  j["K1"] = r.K1;
  j["K2"] = r.K2;
  j["trial_index"] = r.trial_index;
  j["seed"] = r.seed;
  j["success"] = r.success;
  j["nmse1"] = r.nmse1;
  j["nmse2"] = r.nmse2;
  j["nmse_sum"] = r.nmse_sum;
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["objective"] = r.objective;
  j["amp_l1"] = r.amp_l1;
  j["duality_gap"] = r.duality_gap;
  j["measurement_residual_rel"] = r.measurement_residual_rel;
  j["dual_norm_P"] = r.dual_norm_P;
  j["dual_norm_Q"] = r.dual_norm_Q;
  j["psd_min_eig"] = r.psd_min_eig;
  j["truth1"] = channel_to_json(r.truth1);
  j["truth2"] = channel_to_json(r.truth2);
  j["localization"] = localization_to_json(r.loc);
  j["score"] = {{"detected1", r.score.ch1.detected},
                {"detected2", r.score.ch2.detected},
                {"missed1", r.score.ch1.missed},
                {"missed2", r.score.ch2.missed},
                {"spurious1", r.score.ch1.spurious},
                {"spurious2", r.score.ch2.spurious},
                {"max_loc_err", r.score.max_loc_err},
                {"max_amp_rel_err", r.score.max_amp_rel_err}};
  return j;
}

inline json trials_to_json(const std::vector<TrialResult>& trials) {
  json arr = json::array();
  for (const auto& t : trials) arr.push_back(trial_to_json(t));
  return arr;
}

inline std::string trials_to_csv(const std::vector<TrialResult>& trials) {
  std::ostringstream out;
  out << "M,K1,K2,trial,seed,success,nmse_sum,converged,iterations\n";
  out.precision(17);
  for (const auto& t : trials)
    out << t.M << ',' << t.K1 << ',' << t.K2 << ',' << t.trial_index << ','
        << t.seed << ',' << (t.success ? 1 : 0) << ',' << t.nmse_sum << ','
        << (t.converged ? 1 : 0) << ',' << t.iterations << '\n';
  return out.str();
}

inline std::string grid_to_csv(const PhaseTransitionGrid& grid) {
  std::ostringstream out;
  out << "K1,K2,success_rate,trials\n";
  out.precision(17);
  const int n = static_cast<int>(grid.k_range.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      out << grid.k_range[i] << ',' << grid.k_range[j] << ',';
      const double r = grid.success_rate(i, j);
      if (std::isnan(r))
        out << "infeasible";
      else
        out << r;
      out << ',' << grid.trials_per_cell << '\n';
    }
  return out.str();
}

inline json grid_to_json(const PhaseTransitionGrid& grid) {
  json j;
  j["M"] = grid.M;
  j["k_range"] = grid.k_range;
  j["trials_per_cell"] = grid.trials_per_cell;
  j["base_seed"] = grid.base_seed;
  j["delta_min"] = grid.delta_min;
  json rows = json::array();
  const int n = static_cast<int>(grid.k_range.size());
  for (int i = 0; i < n; ++i) {
    json row = json::array();
    for (int jj = 0; jj < n; ++jj) {
      const double r = grid.success_rate(i, jj);
      if (std::isnan(r))
        row.push_back(nullptr);  // infeasible
      else
        row.push_back(r);
    }
    rows.push_back(row);
  }
  j["success_rate"] = rows;
  return j;
}

inline PhaseTransitionGrid grid_from_json(const json& j) {
  PhaseTransitionGrid grid;
  grid.M = j.at("M").get<int>();
  grid.k_range = j.at("k_range").get<std::vector<int>>();
  grid.trials_per_cell = j.at("trials_per_cell").get<int>();
  grid.base_seed = j.at("base_seed").get<std::uint64_t>();
  grid.delta_min = j.at("delta_min").get<double>();
  const int n = static_cast<int>(grid.k_range.size());
  grid.success_rate.setConstant(n, n, std::numeric_limits<double>::quiet_NaN());
  const auto& rows = j.at("success_rate");
  for (int i = 0; i < n; ++i)
    for (int jj = 0; jj < n; ++jj)
      if (!rows[i][jj].is_null())
        grid.success_rate(i, jj) = rows[i][jj].get<double>();
  return grid;
}

inline PhaseTransitionGrid grid_from_csv(std::istream& in, int M = 0,
                                         std::uint64_t base_seed = 0) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("K1,K2,success_rate,trials", 0) != 0)
    throw parameter_error("grid csv: bad header");
  struct Row {
    int k1, k2, trials;
    double rate;
  };
  std::vector<Row> rows;
  int k_max = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string f0, f1, f2, f3;
    std::getline(ls, f0, ',');
    std::getline(ls, f1, ',');
    std::getline(ls, f2, ',');
    std::getline(ls, f3, ',');
    Row r;
    r.k1 = std::stoi(f0);
    r.k2 = std::stoi(f1);
    r.rate = f2 == "infeasible" ? std::numeric_limits<double>::quiet_NaN()
                                : std::stod(f2);
    r.trials = std::stoi(f3);
    rows.push_back(r);
    k_max = std::max({k_max, r.k1, r.k2});
  }
  PhaseTransitionGrid grid;
  grid.M = M;
  grid.base_seed = base_seed;
  for (int k = 1; k <= k_max; ++k) grid.k_range.push_back(k);
  grid.success_rate.setConstant(k_max, k_max,
                                std::numeric_limits<double>::quiet_NaN());
  for (const auto& r : rows) {
    grid.success_rate(r.k1 - 1, r.k2 - 1) = r.rate;
    grid.trials_per_cell = r.trials;
  }
  return grid;
}

enum class EmitFormat { csv, json_fmt };

inline void emit_results(const PhaseTransitionGrid& grid, const std::string& path,
                         EmitFormat format) {
  if (format == EmitFormat::csv)
    save_text_file(path, grid_to_csv(grid));
  else
    save_text_file(path, grid_to_json(grid).dump(2) + "\n");
}

inline void emit_results(const std::vector<TrialResult>& trials,
                         const std::string& path, EmitFormat format) {
  if (format == EmitFormat::csv)
    save_text_file(path, trials_to_csv(trials));
  else
    save_text_file(path, trials_to_json(trials).dump(2) + "\n");
}

}  // namespace demix

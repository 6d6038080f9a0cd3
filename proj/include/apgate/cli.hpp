// Copyright 2026 The apgate Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef APGATE_CLI_HPP
#define APGATE_CLI_HPP

// Subcommand orchestration behind the apgate tool. Each subcommand turns a
// RunConfig into a result document plus CSV tables; write_artifacts puts
// them on disk. Kept in the library so tests can drive it without a process.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "apgate/config.hpp"
#include "apgate/protocols.hpp"
#include "apgate/qlin_json.hpp"
#include "apgate/tomography.hpp"
#include "json.hpp"

namespace apgate::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

inline constexpr const char* kOutputDirEnv = "APGATE_OUTPUT_DIR";

using Json = nlohmann::ordered_json;

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"truth-table",     "bell",           "ghz",
                                              "eraser",          "ramsey",         "state-detection",
                                              "tomo-roundtrip",  "loss-budget"};
  return names;
}

struct Artifacts {
  Json result;
  std::map<std::string, std::string> csv;  // file name -> content
};

// ---------------------------------------------------------------------------
// Serialization helpers

inline Json counts_to_json(std::span<const tomo::CountsRecord> records) {
  Json arr = Json::array();
  for (const auto& r : records) {
    arr.push_back({{"setting", r.setting.label()}, {"counts", r.counts}, {"total", r.total}});
  }
  return arr;
}

inline std::vector<tomo::CountsRecord> counts_from_json(const nlohmann::json& j) {
  std::vector<tomo::CountsRecord> out;
  for (const auto& e : j) {
    tomo::CountsRecord r{tomo::MeasurementSetting::parse(e.at("setting").get<std::string>()),
                         e.at("counts").get<std::vector<std::uint64_t>>(),
                         e.at("total").get<std::uint64_t>()};
    r.validate();
    out.push_back(std::move(r));
  }
  return out;
}

namespace detail {

inline std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(12) << x;
  return os.str();
}

inline Json optional_number(const std::optional<double>& x) {
  return x ? Json(*x) : Json(nullptr);
}

inline Json metadata(const RunConfig& cfg, std::uint64_t trials) {
  Json snapshot = to_json(cfg);
  // Execution settings do not change results.
  snapshot.erase("threads");
  snapshot.erase("output_dir");
  return {{"mode", protocols::mode_name(cfg.mode)},
          {"seed", cfg.seed},
          {"trials", trials},
          {"config", snapshot}};
}

inline std::string rho_csv(const DensityMatrix& rho) {
  std::ostringstream os;
  os << "row,col,abs,re,im\n";
  const CMatrix& m = rho.matrix();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      os << r << ',' << c << ',' << fmt(std::abs(m(r, c))) << ',' << fmt(m(r, c).real()) << ','
         << fmt(m(r, c).imag()) << '\n';
    }
  }
  return os.str();
}

inline std::string setting_csv(const protocols::TomographyResult& t) {
  std::ostringstream os;
  os << "setting,outcome,probability,count\n";
  for (std::size_t i = 0; i < t.settings.size(); ++i) {
    for (std::size_t o = 0; o < t.probabilities[i].size(); ++o) {
      os << t.settings[i].label() << ',' << o << ',' << fmt(t.probabilities[i][o]) << ',';
      if (!t.counts.empty()) os << t.counts[i].counts[o];
      os << '\n';
    }
  }
  return os.str();
}

inline Json tomography_json(const protocols::TomographyResult& t) {
  Json probs = Json::object();
  for (std::size_t i = 0; i < t.settings.size(); ++i) probs[t.settings[i].label()] = t.probabilities[i];
  return {{"target", t.target},
          {"fidelity", t.fidelity},
          {"fidelity_std", optional_number(t.fidelity_std)},
          {"rotated",
           {{"phi", t.rotated.phi},
            {"phi_over_pi", t.rotated.phi / std::numbers::pi},
            {"fidelity", t.rotated.fidelity},
            {"fidelity_std", optional_number(t.rotated_fidelity_std)}}},
          {"reconstruction",
           {{"method", t.linear_inversion_used ? "linear-inversion" : "mle"},
            {"iterations", t.mle_iterations},
            {"converged", t.mle_converged},
            {"likelihood_monotone", t.likelihood_monotone}}},
          {"events_per_setting", t.events_per_setting},
          {"probabilities", probs},
          {"rho", ::apgate::to_json(t.rho)}};
}

inline void add_tomography(Artifacts& a, const std::string& stem,
                           const protocols::TomographyResult& t) {
  a.csv[stem + "_rho.csv"] = rho_csv(t.rho);
  a.csv[stem + "_settings.csv"] = setting_csv(t);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Subcommands

inline Artifacts run_truth_table(const RunConfig& cfg) {
  const auto r = protocols::run_truth_table(cfg.experiment(), cfg.run_options());
  const auto& labels = protocols::truth_table_labels();
  Artifacts a;
  Json rows = Json::array();
  std::ostringstream csv;
  csv << "input,output,probability,count\n";
  for (int i = 0; i < 4; ++i) {
    rows.push_back(r.probabilities[i]);
    for (int k = 0; k < 4; ++k) {
      csv << labels[i] << ',' << labels[k] << ',' << detail::fmt(r.probabilities[i][k]) << ',';
      if (cfg.mode == protocols::Mode::monte_carlo) csv << r.counts[i][k];
      csv << '\n';
    }
  }
  a.result["label"] = "truth-table";
  if (cfg.mode == protocols::Mode::monte_carlo) {
    Json counts = Json::array();
    for (const auto& row : r.counts) counts.push_back(row);
    a.result["raw_counts"] = counts;
  }
  a.result["derived"] = {{"order", labels},
                         {"probabilities", rows},
                         {"identity_probability", r.identity_probability},
                         {"flip_probability", r.flip_probability}};
  a.result["metadata"] = detail::metadata(cfg, cfg.trials);
  a.csv["truth_table.csv"] = csv.str();
  return a;
}

inline Artifacts run_tomography_protocol(const RunConfig& cfg, const std::string& name) {
  const auto exp = cfg.experiment();
  const auto opt = cfg.run_options();
  const auto t = name == "bell" ? protocols::run_bell(exp, opt) : protocols::run_ghz(exp, opt);
  Artifacts a;
  a.result["label"] = name;
  if (!t.counts.empty()) a.result["raw_counts"] = counts_to_json(t.counts);
  a.result["derived"] = detail::tomography_json(t);
  a.result["metadata"] = detail::metadata(cfg, cfg.trials);
  detail::add_tomography(a, name, t);
  return a;
}

inline Artifacts run_eraser(const RunConfig& cfg) {
  const auto r = protocols::run_eraser(cfg.experiment(), cfg.run_options());
  Artifacts a;
  a.result["label"] = "eraser";
  if (!r.phi_plus.counts.empty()) {
    a.result["raw_counts"] = {{"atom_down", counts_to_json(r.phi_plus.counts)},
                              {"atom_up", counts_to_json(r.phi_minus.counts)}};
  }
  a.result["derived"] = {{"p_atom_down", r.p_atom_down},
                         {"p_atom_up", r.p_atom_up},
                         {"phi_plus", detail::tomography_json(r.phi_plus)},
                         {"phi_minus", detail::tomography_json(r.phi_minus)}};
  a.result["metadata"] = detail::metadata(cfg, cfg.trials);
  detail::add_tomography(a, "eraser_phi_plus", r.phi_plus);
  detail::add_tomography(a, "eraser_phi_minus", r.phi_minus);
  return a;
}

inline Artifacts run_ramsey(const RunConfig& cfg) {
  const auto exp = cfg.experiment();
  const auto opt = cfg.run_options();
  const auto grid = cfg.ramsey.grid();
  const auto r0 = protocols::run_ramsey(exp, grid, 0.0, opt);
  const auto r1 = protocols::run_ramsey(exp, grid, std::numbers::pi / 2.0, opt);
  auto fit_json = [](const protocols::RamseyResult& r) {
    return Json{{"phase2", r.phase2},
                {"amplitude", r.fit.amplitude},
                {"phase", r.fit.phase},
                {"offset", r.fit.offset},
                {"rms_residual", r.fit.rms_residual},
                {"converged", r.fit.converged},
                {"peak_transfer", r.peak_transfer},
                {"contrast", r.contrast}};
  };
  Artifacts a;
  a.result["label"] = "ramsey";
  a.result["derived"] = {
      {"detuning_khz", grid},
      {"transfer_phase0", r0.transfer},
      {"transfer_phase_quarter", r1.transfer},
      {"fit_phase0", fit_json(r0)},
      {"fit_phase_quarter", fit_json(r1)},
      {"fitted_phase_shift", protocols::phase_difference(r0.fit.phase, r1.fit.phase)}};
  a.result["metadata"] = detail::metadata(cfg, cfg.trials);
  std::ostringstream csv;
  csv << "detuning_khz,transfer_phase0,transfer_phase_quarter\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    csv << detail::fmt(grid[i]) << ',' << detail::fmt(r0.transfer[i]) << ','
        << detail::fmt(r1.transfer[i]) << '\n';
  }
  a.csv["ramsey.csv"] = csv.str();
  return a;
}

inline Artifacts run_state_detection(const RunConfig& cfg) {
  auto opt = cfg.run_options();
  opt.trials = cfg.state_detection_trials;
  const auto r = protocols::run_state_detection(cfg.experiment(), opt);
  Artifacts a;
  a.result["label"] = "state-detection";
  a.result["raw_counts"] = {{"f1", r.histogram_f1}, {"f2", r.histogram_f2}};
  a.result["derived"] = {{"threshold", r.threshold},
                         {"p_correct_f1", r.p_correct_f1},
                         {"p_correct_f2", r.p_correct_f2},
                         {"fidelity", r.fidelity},
                         {"closed_form_fidelity", r.closed_form_fidelity}};
  a.result["metadata"] = detail::metadata(cfg, r.trials);
  std::ostringstream csv;
  csv << "photon_count,f1,f2\n";
  for (std::size_t k = 0; k < r.histogram_f1.size(); ++k) {
    csv << k << (k + 1 == r.histogram_f1.size() ? "+" : "") << ',' << r.histogram_f1[k] << ','
        << r.histogram_f2[k] << '\n';
  }
  a.csv["state_detection.csv"] = csv.str();
  return a;
}

struct RoundTripSummary {
  std::vector<double> fidelities;
  double median = 0.0;
  double minimum = 0.0;
  bool all_monotone = true;
  bool all_converged = true;
};

/// Random two-qubit pure states through simulated counts and MLE.
inline RoundTripSummary tomography_round_trip(int states, std::uint64_t shots, std::uint64_t seed,
                                              const tomo::MleOptions& mle, unsigned threads = 1) {
  const auto settings = tomo::all_settings(2);
  auto one = [&](std::size_t i) {
    Rng rng = make_stream(seed, 0x9000, i);
    const PureState psi = tomo::random_pure_state(2, rng);
    const auto data =
        tomo::simulate_counts(DensityMatrix::from_pure(psi), settings, shots, rng);
    const auto rep = tomo::mle_reconstruct(std::span<const tomo::CountsRecord>(data), mle);
    bool mono = true;
    for (std::size_t k = 1; k < rep.history.size(); ++k) mono = mono && rep.history[k] >= rep.history[k - 1];
    return std::tuple<double, bool, bool>{fidelity_pure(rep.rho, psi), mono, rep.converged};
  };
  const auto res = run_blocks(static_cast<std::size_t>(states), threads, one);
  RoundTripSummary s;
  for (const auto& [f, mono, conv] : res) {
    s.fidelities.push_back(f);
    s.all_monotone = s.all_monotone && mono;
    s.all_converged = s.all_converged && conv;
  }
  std::vector<double> sorted = s.fidelities;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  s.median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  s.minimum = sorted.front();
  return s;
}

inline Artifacts run_tomo_roundtrip(const RunConfig& cfg) {
  const auto s = tomography_round_trip(cfg.roundtrip.states, cfg.roundtrip.shots, cfg.seed,
                                       cfg.tomography.mle, cfg.threads);
  Artifacts a;
  a.result["label"] = "tomo-roundtrip";
  a.result["derived"] = {{"states", cfg.roundtrip.states},
                         {"shots_per_setting", cfg.roundtrip.shots},
                         {"median_fidelity", s.median},
                         {"min_fidelity", s.minimum},
                         {"likelihood_monotone", s.all_monotone},
                         {"converged", s.all_converged},
                         {"fidelities", s.fidelities}};
  a.result["metadata"] = detail::metadata(cfg, cfg.roundtrip.shots);
  std::ostringstream csv;
  csv << "state,fidelity\n";
  for (std::size_t i = 0; i < s.fidelities.size(); ++i) csv << i << ',' << detail::fmt(s.fidelities[i]) << '\n';
  a.csv["tomo_roundtrip.csv"] = csv.str();
  return a;
}

inline Artifacts run_loss_budget(const RunConfig& cfg) {
  const auto exp = cfg.experiment();
  const auto rep = cavity::compare_loss_budget(exp.cavity, exp.mirrors, exp.imperfections.losses());
  const Complex ru = cavity::reflection_coefficient(exp.cavity.on_resonance(), false);
  const Complex rc = cavity::reflection_coefficient(exp.cavity.on_resonance(), true);
  Artifacts a;
  a.result["label"] = "loss-budget";
  a.result["derived"] = {
      {"model", {{"uncoupled", rep.model.uncoupled}, {"coupled", rep.model.coupled}}},
      {"measured", {{"uncoupled", rep.measured.uncoupled}, {"coupled", rep.measured.coupled}}},
      {"consistency_window", rep.consistency_window},
      {"uncoupled_consistent", rep.uncoupled_consistent},
      {"coupled_discrepancy", rep.coupled_discrepancy},
      {"reflection",
       {{"uncoupled", {{"re", ru.real()}, {"im", ru.imag()}, {"arg", std::arg(ru)}}},
        {"coupled", {{"re", rc.real()}, {"im", rc.imag()}, {"arg", std::arg(rc)}}}}},
      {"cooperativity", exp.cavity.cooperativity()}};
  a.result["metadata"] = detail::metadata(cfg, 0);
  std::ostringstream csv;
  csv << "branch,model_loss,measured_loss\n";
  csv << "uncoupled," << detail::fmt(rep.model.uncoupled) << ',' << detail::fmt(rep.measured.uncoupled) << '\n';
  csv << "coupled," << detail::fmt(rep.model.coupled) << ',' << detail::fmt(rep.measured.coupled) << '\n';
  a.csv["loss_budget.csv"] = csv.str();
  return a;
}

/// Unknown subcommands throw std::invalid_argument.
inline Artifacts run_subcommand(const std::string& name, const RunConfig& cfg) {
  if (name == "truth-table") return run_truth_table(cfg);
  if (name == "bell" || name == "ghz") return run_tomography_protocol(cfg, name);
  if (name == "eraser") return run_eraser(cfg);
  if (name == "ramsey") return run_ramsey(cfg);
  if (name == "state-detection") return run_state_detection(cfg);
  if (name == "tomo-roundtrip") return run_tomo_roundtrip(cfg);
  if (name == "loss-budget") return run_loss_budget(cfg);
  throw std::invalid_argument("unknown subcommand '" + name + "'");
}

// ---------------------------------------------------------------------------
// Process-level plumbing

/// Applies "a.b.c=value" to a config document. The value is read as JSON
/// when it parses, otherwise as a string. Validation happens on load.
inline void apply_override(nlohmann::json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("<override>", "expected key=value, got '" + assignment + "'");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = text;
  nlohmann::json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError(key, "empty path component");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    if (!node->contains(part)) (*node)[part] = nlohmann::json::object();
    node = &(*node)[part];
    if (!node->is_object()) throw ConfigError(key, "'" + part + "' is not an object");
    start = dot + 1;
  }
}

inline RunConfig load_config_with_overrides(const std::string& path,
                                            const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("<parse>", e.what());
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return config_from_json(doc);
}

/// Flag beats environment beats config file.
inline std::string resolve_output_dir(const RunConfig& cfg, const std::optional<std::string>& flag) {
  if (flag && !flag->empty()) return *flag;
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
  return cfg.output_dir;
}

inline std::string result_file_name(const std::string& subcommand) { return subcommand + ".json"; }

/// Writes <subcommand>.json and the CSV tables; returns the written paths.
inline std::vector<std::string> write_artifacts(const std::string& subcommand, const Artifacts& a,
                                                const std::string& dir, bool write_csv = true) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir + ": " + ec.message());
  std::vector<std::string> written;
  auto put = [&](const std::string& file, const std::string& content) {
    const fs::path p = fs::path(dir) / file;
    std::ofstream out(p, std::ios::binary);
    out << content;
    if (!out) throw std::runtime_error("cannot write " + p.string());
    written.push_back(p.string());
  };
  put(result_file_name(subcommand), a.result.dump(2) + "\n");
  if (write_csv) {
    for (const auto& [file, content] : a.csv) put(file, content);
  }
  return written;
}

inline std::string error_json(const std::string& kind, const std::string& message,
                              const std::string& field = "") {
  Json j{{"error", {{"kind", kind}, {"message", message}}}};
  if (!field.empty()) j["error"]["field"] = field;
  return j.dump();
}

}  // namespace apgate::cli

#endif  // APGATE_CLI_HPP

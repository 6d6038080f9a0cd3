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

#ifndef APGATE_CONFIG_HPP
#define APGATE_CONFIG_HPP

// Run configuration: a JSON document with unit-suffixed keys. Values are kept
// in the units of the file so that serialize -> load reproduces the config
// exactly; conversion to angular rates happens in experiment().

#include <cstdint>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

#include "apgate/protocols.hpp"
#include "apgate/units.hpp"
#include "json.hpp"

namespace apgate {

/// Parse, range or unknown-key problem; the message starts with the field path.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& path, const std::string& what)
      : std::runtime_error(path.empty() ? what : path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

struct CavityConfig {
  double g_mhz = 6.7;
  double kappa_mhz = 2.5;
  double gamma_mhz = 3.0;
  double delta_c_mhz = 0.0;
  double delta_a_mhz = 0.0;
  bool operator==(const CavityConfig&) const = default;
};

struct TomographyConfig {
  int mc_replicas = 100;
  bool compute_errors = true;
  tomo::MleOptions mle{};
  bool operator==(const TomographyConfig& o) const {
    return mc_replicas == o.mc_replicas && compute_errors == o.compute_errors &&
           mle.max_iter == o.mle.max_iter && mle.tol == o.mle.tol &&
           mle.dilution == o.mle.dilution && mle.probability_floor == o.mle.probability_floor;
  }
};

struct RamseyConfig {
  double span_khz = 40.0;  // grid covers [-span, span]
  double step_khz = 2.0;
  double separation_us = 7.5;
  bool operator==(const RamseyConfig&) const = default;

  std::vector<double> grid() const {
    std::vector<double> g;
    const int n = static_cast<int>(std::floor(span_khz / step_khz + 1e-9));
    for (int k = -n; k <= n; ++k) g.push_back(k * step_khz);
    return g;
  }
};

struct RoundTripConfig {
  int states = 50;
  std::uint64_t shots = 10000;
  bool operator==(const RoundTripConfig&) const = default;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::uint64_t trials = 100000;
  std::uint64_t state_detection_trials = 1000000;
  protocols::Mode mode = protocols::Mode::analytic;
  unsigned threads = 1;
  std::string output_dir = "apgate-out";

  CavityConfig cavity{};
  cavity::MirrorBudget mirrors{};
  cavity::LevelScheme levels{};
  pulse::ImperfectionConfig imperfections{};
  pulse::DetectionModel detection = pulse::DetectionModel::calibrated();
  pulse::CoherentPulse truth_table_pulse{0.3, 0.7};
  pulse::CoherentPulse entangling_pulse{0.07, 0.7};
  double preselection_pass = 0.5;
  bool spectral_averaging = false;
  int jitter_nodes = 24;
  TomographyConfig tomography{};
  RamseyConfig ramsey{};
  RoundTripConfig roundtrip{};

  bool operator==(const RunConfig&) const = default;

  protocols::ExperimentConfig experiment() const {
    protocols::ExperimentConfig e;
    e.mirrors = mirrors;
    e.cavity.g = units::angular_from_mhz(cavity.g_mhz);
    e.cavity.kappa = units::angular_from_mhz(cavity.kappa_mhz);
    e.cavity.kappa_in = e.cavity.kappa * mirrors.coupling_fraction();
    e.cavity.gamma = units::angular_from_mhz(cavity.gamma_mhz);
    e.cavity.delta_c = units::angular_from_mhz(cavity.delta_c_mhz);
    e.cavity.delta_a = units::angular_from_mhz(cavity.delta_a_mhz);
    e.levels = levels;
    e.imperfections = imperfections;
    e.detection = detection;
    e.truth_table_pulse = truth_table_pulse;
    e.entangling_pulse = entangling_pulse;
    e.preselection_pass = preselection_pass;
    e.spectral_averaging = spectral_averaging;
    e.jitter_nodes = jitter_nodes;
    e.ramsey_separation_us = ramsey.separation_us;
    return e;
  }

  protocols::RunOptions run_options() const {
    protocols::RunOptions o;
    o.mode = mode;
    o.trials = trials;
    o.seed = seed;
    o.threads = threads;
    o.mle = tomography.mle;
    o.mc_replicas = tomography.mc_replicas;
    o.compute_errors = tomography.compute_errors;
    return o;
  }

  /// Cross-field checks not covered while reading.
  void validate() const {
    if (trials < 1) throw ConfigError("trials", "must be at least 1");
    if (state_detection_trials < 1) throw ConfigError("state_detection_trials", "must be at least 1");
    try {
      experiment().validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("", e.what());
    }
  }
};

namespace config_detail {

/// Reads one JSON object, remembering which keys were consumed.
class Reader {
 public:
  Reader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  void get(const std::string& key, T& out, bool required = false) {
    seen_.insert(key);
    if (!j_.contains(key)) {
      if (required) throw ConfigError(field(key), "required field is missing");
      return;
    }
    const auto& v = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(field(key), "expected a boolean");
        out = v.get<bool>();
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError(field(key), "expected an integer");
        if (std::is_unsigned_v<T> && v.is_number_integer() && !v.is_number_unsigned()) {
          throw ConfigError(field(key), "must be non-negative");
        }
        out = v.get<T>();
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError(field(key), "expected a number");
        out = v.get<T>();
      } else {
        if (!v.is_string()) throw ConfigError(field(key), "expected a string");
        out = v.get<T>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(field(key), e.what());
    }
  }

  void probability(const std::string& key, double& out) {
    get(key, out);
    if (!(out >= 0.0 && out <= 1.0)) throw ConfigError(field(key), "must lie in [0,1]");
  }

  void positive(const std::string& key, double& out) {
    get(key, out);
    if (!(out > 0.0)) throw ConfigError(field(key), "must be positive");
  }

  void non_negative(const std::string& key, double& out) {
    get(key, out);
    if (!(out >= 0.0)) throw ConfigError(field(key), "must be non-negative");
  }

  void finite(const std::string& key, double& out) {
    get(key, out);
    if (!std::isfinite(out)) throw ConfigError(field(key), "must be finite");
  }

  /// Nested object; absent objects read as empty (all defaults).
  template <typename Fn>
  void child(const std::string& key, Fn&& fn) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    Reader r(j_.at(key), field(key));
    fn(r);
    r.finish();
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(field(it.key()), "unknown key");
    }
  }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline void read_pulse(Reader& r, pulse::CoherentPulse& p) {
  r.non_negative("mean_photons", p.mean_photons);
  r.positive("fwhm_us", p.fwhm_us);
}

}  // namespace config_detail

inline protocols::Mode parse_mode(const std::string& s, const std::string& path = "mode") {
  if (s == "analytic") return protocols::Mode::analytic;
  if (s == "monte-carlo") return protocols::Mode::monte_carlo;
  throw ConfigError(path, "expected \"analytic\" or \"monte-carlo\", got \"" + s + "\"");
}

inline RunConfig config_from_json(const nlohmann::json& j) {
  using config_detail::Reader;
  RunConfig c;
  Reader root(j, "");
  root.get("seed", c.seed, /*required=*/true);
  root.get("trials", c.trials);
  root.get("state_detection_trials", c.state_detection_trials);
  std::string mode = protocols::mode_name(c.mode);
  root.get("mode", mode);
  c.mode = parse_mode(mode);
  root.get("threads", c.threads);
  root.get("output_dir", c.output_dir);
  root.child("cavity", [&](Reader& r) {
    r.positive("g_mhz", c.cavity.g_mhz);
    r.positive("kappa_mhz", c.cavity.kappa_mhz);
    r.positive("gamma_mhz", c.cavity.gamma_mhz);
    r.finite("delta_c_mhz", c.cavity.delta_c_mhz);
    r.finite("delta_a_mhz", c.cavity.delta_a_mhz);
  });
  root.child("mirrors", [&](Reader& r) {
    r.non_negative("t_coupling_ppm", c.mirrors.t_coupling_ppm);
    r.non_negative("loss_other_ppm", c.mirrors.loss_other_ppm);
  });
  root.child("levels", [&](Reader& r) {
    r.child("excited_shift_ghz", [&](Reader& e) {
      static const char* keys[4] = {"m0", "m1", "m2", "m3"};
      for (int k = 0; k < 4; ++k) e.positive(keys[k], c.levels.excited_shift_ghz[k]);
    });
    r.non_negative("ground_shift_ghz", c.levels.ground_shift_ghz);
    r.positive("f1_detuning_ghz", c.levels.f1_detuning_ghz);
  });
  root.child("imperfections", [&](Reader& r) {
    auto& m = c.imperfections;
    r.probability("mode_overlap", m.mode_overlap);
    r.probability("prep_fidelity", m.prep_fidelity);
    r.non_negative("freq_jitter_khz", m.freq_jitter_khz);
    r.finite("detuning_bias_khz", m.detuning_bias_khz);
    r.probability("photonic_meas_error", m.photonic_meas_error);
    r.probability("loss_coupled", m.loss_coupled);
    r.probability("loss_uncoupled", m.loss_uncoupled);
    r.probability("rotation_readout_fidelity", m.rotation_readout_fidelity);
    r.get("multi_photon", m.multi_photon);
  });
  root.child("detection", [&](Reader& r) {
    r.non_negative("mean_signal_photons", c.detection.mean_signal_photons);
    r.probability("dark_prob", c.detection.dark_prob);
    r.get("threshold", c.detection.threshold);
    if (c.detection.threshold < 1) throw ConfigError(r.field("threshold"), "must be at least 1");
  });
  root.child("pulses", [&](Reader& r) {
    r.child("truth_table", [&](Reader& p) { config_detail::read_pulse(p, c.truth_table_pulse); });
    r.child("entangling", [&](Reader& p) { config_detail::read_pulse(p, c.entangling_pulse); });
  });
  root.child("protocol", [&](Reader& r) {
    r.probability("preselection_pass", c.preselection_pass);
    if (c.preselection_pass == 0.0) throw ConfigError(r.field("preselection_pass"), "must be positive");
    r.get("spectral_averaging", c.spectral_averaging);
    r.get("jitter_nodes", c.jitter_nodes);
    if (c.jitter_nodes < 1 || c.jitter_nodes > 200) {
      throw ConfigError(r.field("jitter_nodes"), "must lie in [1,200]");
    }
  });
  root.child("tomography", [&](Reader& r) {
    r.get("mc_replicas", c.tomography.mc_replicas);
    if (c.tomography.mc_replicas < 2) throw ConfigError(r.field("mc_replicas"), "must be at least 2");
    r.get("compute_errors", c.tomography.compute_errors);
    r.get("mle_max_iter", c.tomography.mle.max_iter);
    if (c.tomography.mle.max_iter < 1) throw ConfigError(r.field("mle_max_iter"), "must be at least 1");
    r.positive("mle_tol", c.tomography.mle.tol);
    r.probability("mle_dilution", c.tomography.mle.dilution);
    if (c.tomography.mle.dilution >= 1.0) throw ConfigError(r.field("mle_dilution"), "must be below 1");
    r.positive("mle_probability_floor", c.tomography.mle.probability_floor);
  });
  root.child("ramsey", [&](Reader& r) {
    r.non_negative("span_khz", c.ramsey.span_khz);
    r.positive("step_khz", c.ramsey.step_khz);
    r.positive("separation_us", c.ramsey.separation_us);
  });
  root.child("roundtrip", [&](Reader& r) {
    r.get("states", c.roundtrip.states);
    if (c.roundtrip.states < 1) throw ConfigError(r.field("states"), "must be at least 1");
    r.get("shots", c.roundtrip.shots);
    if (c.roundtrip.shots < 1) throw ConfigError(r.field("shots"), "must be at least 1");
  });
  root.finish();
  c.validate();
  return c;
}

inline nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  j["trials"] = c.trials;
  j["state_detection_trials"] = c.state_detection_trials;
  j["mode"] = protocols::mode_name(c.mode);
  j["threads"] = c.threads;
  j["output_dir"] = c.output_dir;
  j["cavity"] = {{"g_mhz", c.cavity.g_mhz},
                 {"kappa_mhz", c.cavity.kappa_mhz},
                 {"gamma_mhz", c.cavity.gamma_mhz},
                 {"delta_c_mhz", c.cavity.delta_c_mhz},
                 {"delta_a_mhz", c.cavity.delta_a_mhz}};
  j["mirrors"] = {{"t_coupling_ppm", c.mirrors.t_coupling_ppm},
                  {"loss_other_ppm", c.mirrors.loss_other_ppm}};
  const auto& e = c.levels.excited_shift_ghz;
  j["levels"] = {{"excited_shift_ghz", {{"m0", e[0]}, {"m1", e[1]}, {"m2", e[2]}, {"m3", e[3]}}},
                 {"ground_shift_ghz", c.levels.ground_shift_ghz},
                 {"f1_detuning_ghz", c.levels.f1_detuning_ghz}};
  const auto& m = c.imperfections;
  j["imperfections"] = {{"mode_overlap", m.mode_overlap},
                        {"prep_fidelity", m.prep_fidelity},
                        {"freq_jitter_khz", m.freq_jitter_khz},
                        {"detuning_bias_khz", m.detuning_bias_khz},
                        {"photonic_meas_error", m.photonic_meas_error},
                        {"loss_coupled", m.loss_coupled},
                        {"loss_uncoupled", m.loss_uncoupled},
                        {"rotation_readout_fidelity", m.rotation_readout_fidelity},
                        {"multi_photon", m.multi_photon}};
  j["detection"] = {{"mean_signal_photons", c.detection.mean_signal_photons},
                    {"dark_prob", c.detection.dark_prob},
                    {"threshold", c.detection.threshold}};
  auto pulse_json = [](const pulse::CoherentPulse& p) {
    return nlohmann::ordered_json{{"mean_photons", p.mean_photons}, {"fwhm_us", p.fwhm_us}};
  };
  j["pulses"] = {{"truth_table", pulse_json(c.truth_table_pulse)},
                 {"entangling", pulse_json(c.entangling_pulse)}};
  j["protocol"] = {{"preselection_pass", c.preselection_pass},
                   {"spectral_averaging", c.spectral_averaging},
                   {"jitter_nodes", c.jitter_nodes}};
  j["tomography"] = {{"mc_replicas", c.tomography.mc_replicas},
                     {"compute_errors", c.tomography.compute_errors},
                     {"mle_max_iter", c.tomography.mle.max_iter},
                     {"mle_tol", c.tomography.mle.tol},
                     {"mle_dilution", c.tomography.mle.dilution},
                     {"mle_probability_floor", c.tomography.mle.probability_floor}};
  j["ramsey"] = {{"span_khz", c.ramsey.span_khz},
                 {"step_khz", c.ramsey.step_khz},
                 {"separation_us", c.ramsey.separation_us}};
  j["roundtrip"] = {{"states", c.roundtrip.states}, {"shots", c.roundtrip.shots}};
  return j;
}

inline RunConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("<parse>", e.what());
  }
  return config_from_json(j);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

#ifdef APGATE_CONFIG_DIR
inline std::string bundled_config_path(const std::string& name = "paper.defaults.json") {
  return std::string(APGATE_CONFIG_DIR) + "/" + name;
}
#endif

}  // namespace apgate

#endif  // APGATE_CONFIG_HPP

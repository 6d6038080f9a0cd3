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

#ifndef APGATE_PROTOCOLS_HPP
#define APGATE_PROTOCOLS_HPP

// End-to-end experiment drivers built on the reflection gate.
//
// Every protocol is a sequence: prepare the atom, reflect one or two photons,
// optionally rotate the atom, measure. Each experimental attempt is described
// by classical variables (preparation error, probe detuning, and per photon:
// photon number, mode matching, survival) and a quantum state. Analytic mode
// integrates over the classical variables exactly (Gauss-Hermite quadrature
// for the detuning, channel mixtures for the rest); Monte-Carlo mode samples
// them attempt by attempt and counts detector outcomes.
//
// A preparation error leaves the atom in another F=2 Zeeman state (the
// "spectator"). It does not couple to the cavity, is not addressed by the
// Raman rotations and is always read out as F=2, i.e. as |up>.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "apgate/cavity.hpp"
#include "apgate/numerics.hpp"
#include "apgate/pulse.hpp"
#include "apgate/qlin.hpp"
#include "apgate/tomography.hpp"
#include "apgate/units.hpp"

namespace apgate::protocols {

enum class Mode { analytic, monte_carlo };

inline const char* mode_name(Mode m) { return m == Mode::analytic ? "analytic" : "monte-carlo"; }

/// A tomography setting (or truth-table row) that kept no events.
class StarvationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  cavity::CavityParams cavity{};
  cavity::MirrorBudget mirrors{};
  cavity::LevelScheme levels{};
  pulse::ImperfectionConfig imperfections{};
  pulse::DetectionModel detection = pulse::DetectionModel::calibrated();
  pulse::CoherentPulse truth_table_pulse{0.3, 0.7};
  pulse::CoherentPulse entangling_pulse{0.07, 0.7};
  double preselection_pass = 0.5;
  bool spectral_averaging = false;
  int jitter_nodes = 24;
  double ramsey_separation_us = 7.5;

  static ExperimentConfig paper() { return {}; }

  static ExperimentConfig ideal() {
    ExperimentConfig c;
    c.imperfections = pulse::ImperfectionConfig::ideal();
    c.detection = pulse::DetectionModel::ideal();
    return c;
  }

  void validate() const {
    cavity.validate();
    mirrors.validate();
    levels.validate();
    imperfections.validate();
    detection.validate();
    truth_table_pulse.validate();
    entangling_pulse.validate();
    if (!(preselection_pass > 0.0 && preselection_pass <= 1.0)) {
      throw std::invalid_argument("preselection_pass must lie in (0,1]");
    }
    if (jitter_nodes < 1) throw std::invalid_argument("jitter_nodes must be positive");
    if (!(ramsey_separation_us > 0.0)) throw std::invalid_argument("ramsey_separation_us");
  }

  cavity::GateModelOptions gate_options(const pulse::CoherentPulse& p) const {
    return {spectral_averaging, p.fwhm_us, levels};
  }

  /// Residual rotation error once preparation and detection errors, which
  /// are modeled separately, are divided out of the aggregate Ramsey figure.
  double residual_rotation_error() const {
    const double denom = imperfections.prep_fidelity * detection.fidelity();
    if (denom <= 0.0) return 0.5;
    return std::clamp(1.0 - imperfections.rotation_readout_fidelity / denom, 0.0, 0.5);
  }

  bool operator==(const ExperimentConfig&) const = default;
};

struct RunOptions {
  Mode mode = Mode::analytic;
  std::uint64_t trials = 100000;  // attempts per setting (or truth-table row)
  std::uint64_t seed = 1;
  unsigned threads = 1;
  tomo::MleOptions mle{};
  int mc_replicas = 100;
  bool compute_errors = true;
  std::uint64_t block_size = 4096;
};

// ---------------------------------------------------------------------------
// Sequence model

/// Sampled classical state of one photon; unset fields mean "average over".
struct PhotonFlags {
  std::optional<bool> matched;
  std::optional<bool> contaminated;
};

struct Sequence {
  PureState atom_input = states::up();   // state after preparation (correct branch)
  bool prepared_up = true;               // optical pumping into |up>: may fail, preselected
  std::vector<PureState> photon_inputs;  // one per reflected pulse
  bool final_atom_rotation = false;      // eraser rotation before readout
  bool atom_rotations = false;           // any Raman rotation involved
  pulse::CoherentPulse pulse{};

  int qubits() const { return 1 + static_cast<int>(photon_inputs.size()); }
};

/// Rotation taking |up> to |down_x>; also the eraser rotation, which maps the
/// GHZ state onto |up>|Phi-_pp> - |down>|Phi+_pp> (up to normalization).
inline UnitaryOp x_basis_rotation() { return rotation(std::numbers::pi / 2.0, -std::numbers::pi / 2.0); }

namespace detail {

inline KrausChannel dephasing_from_extra_photon() {
  return ancilla_channel(cavity::ideal_gate(), states::down_x());
}

/// Channel on (atom, photon) for one reflection at probe detuning `delta`.
inline KrausChannel photon_channel(const ExperimentConfig& cfg, const Sequence& seq,
                                   double delta, const PhotonFlags& flags) {
  const auto& imp = cfg.imperfections;
  const KrausChannel gate = cavity::lossy_gate_channel(
      cfg.cavity.probe_shifted(delta), imp.losses(), cfg.gate_options(seq.pulse));
  KrausChannel mode_part = gate;
  if (flags.matched.has_value()) {
    mode_part = *flags.matched ? gate : KrausChannel::identity(2);
  } else if (imp.mode_overlap < 1.0) {
    mode_part = gate.mix(KrausChannel::identity(2), imp.mode_overlap);
  }
  const double fraction = imp.multi_photon ? pulse::multi_photon_fraction(seq.pulse) : 0.0;
  std::optional<KrausChannel> atom_part;
  if (flags.contaminated.has_value()) {
    if (*flags.contaminated) atom_part = dephasing_from_extra_photon();
  } else if (fraction > 0.0) {
    atom_part = pulse::multi_photon_channel(fraction);
  }
  if (!atom_part) return mode_part;
  return mode_part.then(lift(*atom_part, {0}, 2));
}

/// Unnormalized post-selected state; its trace is the survival probability.
inline CMatrix evolve(const ExperimentConfig& cfg, const Sequence& seq, bool spectator,
                      double delta, std::span<const PhotonFlags> flags) {
  const int n = seq.qubits();
  PureState psi = spectator ? states::down() : seq.atom_input;
  for (const auto& ph : seq.photon_inputs) psi = tensor(psi, ph);
  CMatrix rho = psi.amplitudes() * psi.amplitudes().adjoint();
  for (int k = 1; k < n; ++k) {
    const PhotonFlags f = flags.empty() ? PhotonFlags{} : flags[k - 1];
    rho = lift(photon_channel(cfg, seq, delta, f), {0, k}, n).act(rho);
  }
  if (seq.final_atom_rotation && !spectator) {
    const CMatrix u = lift(x_basis_rotation().matrix(), {0}, n);
    rho = u * rho * u.adjoint();
  }
  return rho;
}

/// Classical readout confusion for each qubit of the correct branch.
inline std::vector<pulse::Confusion> readout_confusion(const ExperimentConfig& cfg,
                                                       const Sequence& seq) {
  std::vector<pulse::Confusion> out;
  const pulse::Confusion rot =
      pulse::Confusion::symmetric(seq.atom_rotations ? cfg.residual_rotation_error() : 0.0);
  out.push_back(pulse::Confusion::chain(rot, cfg.detection.confusion()));
  for (std::size_t k = 0; k < seq.photon_inputs.size(); ++k) {
    out.push_back(pulse::Confusion::symmetric(cfg.imperfections.photonic_meas_error));
  }
  return out;
}

/// Unnormalized detector-outcome weights for setting `s`. A spectator atom
/// reads F=2 (outcome 0) whatever the analysis basis.
inline std::vector<double> outcome_weights(const ExperimentConfig& cfg, const Sequence& seq,
                                           const CMatrix& rho, bool spectator,
                                           const tomo::MeasurementSetting& s) {
  const int n = seq.qubits();
  std::vector<double> w;
  if (!spectator) {
    w = tomo::born_weights(rho, s);
  } else {
    w.assign(std::size_t{1} << n, 0.0);
    std::vector<int> photons;
    for (int k = 1; k < n; ++k) photons.push_back(k);
    const CMatrix photon_part = partial_trace(rho, std::span<const int>(photons));
    tomo::MeasurementSetting ps{{s.bases.begin() + 1, s.bases.end()}};
    const auto pw = tomo::born_weights(photon_part, ps);
    for (std::size_t o = 0; o < pw.size(); ++o) w[o] = pw[o];  // atom bit 0
  }
  for (double& x : w) x = std::max(x, 0.0);
  const auto conf = readout_confusion(cfg, seq);
  pulse::apply_confusion(w, 0, n,
                         spectator ? cfg.detection.confusion() : conf[0]);
  for (int k = 1; k < n; ++k) pulse::apply_confusion(w, k, n, conf[k]);
  return w;
}

inline double spectator_weight(const ExperimentConfig& cfg, const Sequence& seq) {
  return seq.prepared_up ? 1.0 - cfg.imperfections.prep_fidelity : 0.0;
}

/// Probability that at least one photon arrives in every pulse and that
/// preselection passes.
inline double arrival_probability(const ExperimentConfig& cfg, const Sequence& seq) {
  const double p1 = -std::expm1(-seq.pulse.mean_photons);
  double p = std::pow(p1, static_cast<double>(seq.photon_inputs.size()));
  if (seq.prepared_up) p *= cfg.preselection_pass;
  return p;
}

/// Exact branch states averaged over the detuning distribution.
struct AnalyticModel {
  CMatrix correct;    // weighted by 1 - spectator weight
  CMatrix spectator;  // weighted by the spectator weight
  double acceptance;  // post-selection probability per attempt
};

inline AnalyticModel analytic_model(const ExperimentConfig& cfg, const Sequence& seq) {
  const auto& imp = cfg.imperfections;
  const auto rule = gaussian_quadrature(cfg.jitter_nodes, units::angular_from_khz(imp.detuning_bias_khz),
                                        units::angular_from_khz(imp.freq_jitter_khz));
  const Eigen::Index dim = Eigen::Index{1} << seq.qubits();
  const double w_spec = spectator_weight(cfg, seq);
  AnalyticModel m{CMatrix::Zero(dim, dim), CMatrix::Zero(dim, dim), 0.0};
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
    m.correct += rule.weights[k] * evolve(cfg, seq, false, rule.nodes[k], {});
    if (w_spec > 0.0) m.spectator += rule.weights[k] * evolve(cfg, seq, true, rule.nodes[k], {});
  }
  m.correct *= 1.0 - w_spec;
  m.spectator *= w_spec;
  m.acceptance = (m.correct.trace().real() + m.spectator.trace().real()) *
                 arrival_probability(cfg, seq);
  return m;
}

inline std::vector<double> analytic_probabilities(const ExperimentConfig& cfg, const Sequence& seq,
                                                  const AnalyticModel& m,
                                                  const tomo::MeasurementSetting& s) {
  auto w = outcome_weights(cfg, seq, m.correct, false, s);
  if (spectator_weight(cfg, seq) > 0.0) {
    const auto ws = outcome_weights(cfg, seq, m.spectator, true, s);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] += ws[i];
  }
  double sum = 0.0;
  for (double x : w) sum += x;
  if (!(sum > tol::kZeroProbability)) throw StarvationError("no post-selected events survive");
  for (double& x : w) x /= sum;
  return w;
}

/// Monte-Carlo counts for one setting: `trials` attempts, split into blocks
/// with their own generator streams.
inline std::vector<std::uint64_t> sample_setting(const ExperimentConfig& cfg, const Sequence& seq,
                                                 const tomo::MeasurementSetting& s,
                                                 const RunOptions& opt, std::uint64_t stream) {
  const auto& imp = cfg.imperfections;
  const std::size_t n_outcomes = s.outcomes();
  const std::uint64_t n_blocks = (opt.trials + opt.block_size - 1) / opt.block_size;
  auto block = [&](std::size_t b) {
    Rng rng = make_stream(opt.seed, stream, b);
    std::vector<std::uint64_t> counts(n_outcomes, 0);
    const std::uint64_t begin = b * opt.block_size;
    const std::uint64_t end = std::min(opt.trials, begin + opt.block_size);
    std::bernoulli_distribution preselect(cfg.preselection_pass);
    std::bernoulli_distribution prep_ok(imp.prep_fidelity);
    std::bernoulli_distribution matched(imp.mode_overlap);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::poisson_distribution<int> photons(std::max(seq.pulse.mean_photons, 1e-300));
    std::vector<PhotonFlags> flags(seq.photon_inputs.size());
    for (std::uint64_t t = begin; t < end; ++t) {
      if (seq.prepared_up && !preselect(rng)) continue;
      const bool spectator = seq.prepared_up && !prep_ok(rng);
      const double delta = pulse::sample_jitter(rng, imp.freq_jitter_khz, imp.detuning_bias_khz);
      bool arrived = true;
      for (auto& f : flags) {
        const int n_ph = seq.pulse.mean_photons > 0.0 ? photons(rng) : 0;
        arrived = arrived && n_ph >= 1;
        f.contaminated = imp.multi_photon && n_ph >= 2;
        f.matched = matched(rng);
      }
      if (!arrived) continue;
      const CMatrix rho = evolve(cfg, seq, spectator, delta, flags);
      const double survival = rho.trace().real();
      if (unit(rng) >= survival) continue;
      auto w = outcome_weights(cfg, seq, rho, spectator, s);
      double sum = 0.0;
      for (double x : w) sum += x;
      for (double& x : w) x /= sum;
      ++counts[sample_index(rng, w)];
    }
    return counts;
  };
  const auto per_block = run_blocks(static_cast<std::size_t>(n_blocks), opt.threads, block);
  std::vector<std::uint64_t> total(n_outcomes, 0);
  for (const auto& c : per_block) {
    for (std::size_t i = 0; i < n_outcomes; ++i) total[i] += c[i];
  }
  return total;
}

inline std::uint64_t sum_counts(const std::vector<std::uint64_t>& c) {
  std::uint64_t s = 0;
  for (auto x : c) s += x;
  return s;
}

inline std::vector<double> normalized(const std::vector<std::uint64_t>& c) {
  const double total = static_cast<double>(sum_counts(c));
  std::vector<double> p;
  for (auto x : c) p.push_back(total > 0.0 ? static_cast<double>(x) / total : 0.0);
  return p;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Tomography pipeline shared by Bell, GHZ and eraser

struct TomographyResult {
  std::string target;
  std::vector<tomo::MeasurementSetting> settings;
  std::vector<std::vector<double>> probabilities;  // per setting
  std::vector<tomo::CountsRecord> counts;          // Monte-Carlo mode only
  DensityMatrix rho = DensityMatrix::maximally_mixed(1);
  bool linear_inversion_used = false;
  int mle_iterations = 0;
  bool mle_converged = true;
  bool likelihood_monotone = true;
  double fidelity = 0.0;
  PhaseFidelity rotated{};
  std::optional<double> fidelity_std;
  std::optional<double> rotated_fidelity_std;
  double events_per_setting = 0.0;  // expected (analytic) or mean observed
};

namespace detail {

inline bool monotone(const std::vector<double>& h) {
  for (std::size_t i = 1; i < h.size(); ++i) {
    if (h[i] < h[i - 1]) return false;
  }
  return true;
}

/// Maximum-likelihood estimate from exact probabilities: linear inversion
/// already maximizes the likelihood when it is physical.
inline void reconstruct_exact(TomographyResult& r, const tomo::MleOptions& mle) {
  std::vector<tomo::FrequencyRecord> recs;
  for (std::size_t i = 0; i < r.settings.size(); ++i) {
    recs.push_back({r.settings[i], r.probabilities[i], 1.0});
  }
  const CMatrix li = tomo::linear_inversion(std::span<const tomo::FrequencyRecord>(recs));
  if (::apgate::detail::hermitian_eigenvalues(li).minCoeff() >= -1e-12) {
    r.rho = DensityMatrix::from_unnormalized(li);
    r.linear_inversion_used = true;
    return;
  }
  const auto rep = tomo::mle_reconstruct(std::span<const tomo::FrequencyRecord>(recs), mle);
  r.rho = rep.rho;
  r.mle_iterations = rep.iterations;
  r.mle_converged = rep.converged;
  r.likelihood_monotone = monotone(rep.history);
}

inline void reconstruct_counts(TomographyResult& r, const tomo::MleOptions& mle) {
  for (const auto& c : r.counts) {
    if (c.total == 0) {
      throw StarvationError("setting " + c.setting.label() + " kept no post-selected events");
    }
  }
  const auto rep = tomo::mle_reconstruct(std::span<const tomo::CountsRecord>(r.counts), mle);
  r.rho = rep.rho;
  r.mle_iterations = rep.iterations;
  r.mle_converged = rep.converged;
  r.likelihood_monotone = monotone(rep.history);
}

inline void score(TomographyResult& r, const PureState& target, const PureState& u,
                  const PureState& v) {
  r.fidelity = fidelity_pure(r.rho, target);
  r.rotated = optimal_phase_fidelity(r.rho, u, v);
}

/// Bootstrap error bars. In analytic mode a synthetic data set with the
/// expected number of events per setting stands in for the measured one.
inline void error_bars(TomographyResult& r, const PureState& target, const PureState& u,
                       const PureState& v, const RunOptions& opt, std::uint64_t stream) {
  if (!opt.compute_errors) return;
  std::vector<tomo::CountsRecord> data = r.counts;
  if (data.empty()) {
    const auto events = static_cast<std::uint64_t>(std::llround(r.events_per_setting));
    if (events == 0) return;
    Rng rng = make_stream(opt.seed, stream);
    for (std::size_t i = 0; i < r.settings.size(); ++i) {
      data.push_back({r.settings[i], sample_multinomial(rng, events, r.probabilities[i]), events});
    }
  }
  const tomo::Metric metric = [&](const DensityMatrix& rho) {
    return std::vector<double>{fidelity_pure(rho, target),
                               optimal_phase_fidelity(rho, u, v).fidelity};
  };
  tomo::MleOptions mle = opt.mle;
  const auto std_err = tomo::monte_carlo_errors(std::span<const tomo::CountsRecord>(data), metric,
                                                opt.mc_replicas, opt.seed ^ (stream << 20), mle,
                                                opt.threads);
  r.fidelity_std = std_err[0];
  r.rotated_fidelity_std = std_err[1];
}

inline TomographyResult run_tomography(const ExperimentConfig& cfg, const Sequence& seq,
                                       const RunOptions& opt, std::uint64_t stream_base,
                                       const PureState& target, const PureState& u,
                                       const PureState& v, const std::string& target_name) {
  cfg.validate();
  TomographyResult r;
  r.target = target_name;
  r.settings = tomo::all_settings(seq.qubits());
  if (opt.mode == Mode::analytic) {
    const auto model = analytic_model(cfg, seq);
    for (const auto& s : r.settings) r.probabilities.push_back(analytic_probabilities(cfg, seq, model, s));
    r.events_per_setting = model.acceptance * static_cast<double>(opt.trials);
    reconstruct_exact(r, opt.mle);
  } else {
    double events = 0.0;
    for (std::size_t i = 0; i < r.settings.size(); ++i) {
      auto c = sample_setting(cfg, seq, r.settings[i], opt, stream_base + i);
      const auto total = sum_counts(c);
      r.probabilities.push_back(normalized(c));
      r.counts.push_back({r.settings[i], std::move(c), total});
      events += static_cast<double>(total);
    }
    r.events_per_setting = events / static_cast<double>(r.settings.size());
    reconstruct_counts(r, opt.mle);
  }
  score(r, target, u, v);
  error_bars(r, target, u, v, opt, stream_base + 0x1000);
  return r;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Protocols

inline Sequence bell_sequence(const ExperimentConfig& cfg) {
  Sequence s;
  s.atom_input = x_basis_rotation().apply(states::up());
  s.prepared_up = true;
  s.photon_inputs = {states::down_x()};
  s.atom_rotations = true;
  s.pulse = cfg.entangling_pulse;
  return s;
}

inline Sequence ghz_sequence(const ExperimentConfig& cfg) {
  Sequence s = bell_sequence(cfg);
  s.photon_inputs = {states::down_x(), states::down_x()};
  return s;
}

inline Sequence eraser_sequence(const ExperimentConfig& cfg) {
  Sequence s = ghz_sequence(cfg);
  s.final_atom_rotation = true;
  return s;
}

/// |down_x down_x> -> |Phi+_ap>.
inline TomographyResult run_bell(const ExperimentConfig& cfg, const RunOptions& opt) {
  const PureState u = tensor(states::up(), states::up_x());
  const PureState v = tensor(states::down(), states::down_x());
  return detail::run_tomography(cfg, bell_sequence(cfg), opt, 0x2000, targets::phi_plus_ap(), u, v,
                                "Phi+_ap");
}

/// Two sequential photons: |down_x down_x down_x> -> |GHZ>.
inline TomographyResult run_ghz(const ExperimentConfig& cfg, const RunOptions& opt) {
  const PureState u = tensor({states::up(), states::up_x(), states::up_x()});
  const PureState v = PureState::from_amplitudes(
      -tensor({states::down(), states::down_x(), states::down_x()}).amplitudes());
  return detail::run_tomography(cfg, ghz_sequence(cfg), opt, 0x3000, targets::ghz(), u, v, "GHZ");
}

struct EraserResult {
  TomographyResult phi_plus;    // atom read as |down> (F=1)
  TomographyResult phi_minus;   // atom read as |up> (F=2)
  double p_atom_down = 0.0;
  double p_atom_up = 0.0;
};

/// GHZ, then a pi/2 rotation of the atom and its readout; the two photon-pair
/// states are reconstructed separately for each atomic outcome.
inline EraserResult run_eraser(const ExperimentConfig& cfg, const RunOptions& opt) {
  cfg.validate();
  const Sequence seq = eraser_sequence(cfg);
  const auto photon_settings = tomo::all_settings(2);
  EraserResult out;
  TomographyResult* by_outcome[2] = {&out.phi_minus, &out.phi_plus};  // atom bit 0 = up
  out.phi_plus.target = "Phi+_pp";
  out.phi_minus.target = "Phi-_pp";
  for (auto* r : by_outcome) r->settings = photon_settings;

  std::vector<std::vector<double>> joint;  // per photon setting, 8 outcomes
  std::optional<detail::AnalyticModel> model;
  if (opt.mode == Mode::analytic) model = detail::analytic_model(cfg, seq);
  for (std::size_t i = 0; i < photon_settings.size(); ++i) {
    tomo::MeasurementSetting s{{tomo::Basis::Z}};
    for (auto b : photon_settings[i].bases) s.bases.push_back(b);
    if (model) {
      joint.push_back(detail::analytic_probabilities(cfg, seq, *model, s));
    } else {
      const auto c = detail::sample_setting(cfg, seq, s, opt, 0x4000 + i);
      for (int a = 0; a < 2; ++a) {
        std::vector<std::uint64_t> part(c.begin() + 4 * a, c.begin() + 4 * a + 4);
        const auto total = detail::sum_counts(part);
        by_outcome[a]->counts.push_back({photon_settings[i], part, total});
        by_outcome[a]->probabilities.push_back(detail::normalized(part));
        by_outcome[a]->events_per_setting += static_cast<double>(total) / 9.0;
      }
      joint.push_back(detail::normalized(c));
    }
  }
  double p_up = 0.0;
  for (const auto& j : joint) p_up += (j[0] + j[1] + j[2] + j[3]) / static_cast<double>(joint.size());
  out.p_atom_up = p_up;
  out.p_atom_down = 1.0 - p_up;

  if (model) {
    for (int a = 0; a < 2; ++a) {
      for (const auto& j : joint) {
        std::vector<double> cond(j.begin() + 4 * a, j.begin() + 4 * a + 4);
        double sum = 0.0;
        for (double x : cond) sum += x;
        if (!(sum > 0.0)) throw StarvationError("atom outcome never observed");
        for (double& x : cond) x /= sum;
        by_outcome[a]->probabilities.push_back(std::move(cond));
      }
      by_outcome[a]->events_per_setting = model->acceptance * static_cast<double>(opt.trials) *
                                          (a == 0 ? out.p_atom_up : out.p_atom_down);
      detail::reconstruct_exact(*by_outcome[a], opt.mle);
    }
  } else {
    for (auto* r : by_outcome) detail::reconstruct_counts(*r, opt.mle);
  }

  const PureState uu = tensor(states::up_x(), states::up_x());
  const PureState dd = tensor(states::down_x(), states::down_x());
  const PureState dd_minus = PureState::from_amplitudes(-dd.amplitudes());
  detail::score(out.phi_plus, targets::phi_plus_pp(), uu, dd);
  detail::score(out.phi_minus, targets::phi_minus_pp(), uu, dd_minus);
  detail::error_bars(out.phi_plus, targets::phi_plus_pp(), uu, dd, opt, 0x5000);
  detail::error_bars(out.phi_minus, targets::phi_minus_pp(), uu, dd_minus, opt, 0x6000);
  return out;
}

/// Exact post-selected qubit state of a sequence, with the spectator branch
/// represented by its qubit-level image |down>. For physicality and
/// consistency checks; detector-level effects are not included.
inline DensityMatrix model_state(const ExperimentConfig& cfg, const Sequence& seq) {
  const auto m = detail::analytic_model(cfg, seq);
  return DensityMatrix::from_unnormalized(m.correct + m.spectator);
}

// ---------------------------------------------------------------------------
// Truth table

struct TruthTableResult {
  // rows: inputs, columns: outputs, both ordered
  // (down_a down_px, down_a up_px, up_a down_px, up_a up_px)
  std::array<std::array<double, 4>, 4> probabilities{};
  std::array<std::array<std::uint64_t, 4>, 4> counts{};  // Monte-Carlo mode only
  double identity_probability = 0.0;  // mean over control |down_a>
  double flip_probability = 0.0;      // mean over control |up_a>
};

inline const std::array<const char*, 4>& truth_table_labels() {
  static const std::array<const char*, 4> labels{"down_a down_px", "down_a up_px", "up_a down_px",
                                                 "up_a up_px"};
  return labels;
}

inline TruthTableResult run_truth_table(const ExperimentConfig& cfg, const RunOptions& opt) {
  cfg.validate();
  if (opt.trials < 1) throw std::invalid_argument("trials must be at least 1");
  // Column k of the table is detector outcome 3 - k for setting (Z, X).
  const tomo::MeasurementSetting zx = tomo::MeasurementSetting::parse("ZX");
  TruthTableResult out;
  for (int row = 0; row < 4; ++row) {
    const bool atom_up = row >= 2;
    const bool photon_up = row % 2 == 1;
    Sequence seq;
    seq.atom_input = atom_up ? states::up() : states::down();
    seq.prepared_up = atom_up;
    seq.photon_inputs = {photon_up ? states::up_x() : states::down_x()};
    seq.pulse = cfg.truth_table_pulse;
    std::vector<double> p;
    if (opt.mode == Mode::analytic) {
      p = detail::analytic_probabilities(cfg, seq, detail::analytic_model(cfg, seq), zx);
    } else {
      const auto c = detail::sample_setting(cfg, seq, zx, opt, 0x1000 + row);
      if (detail::sum_counts(c) == 0) {
        throw StarvationError(std::string("truth-table row '") + truth_table_labels()[row] +
                              "' kept no events");
      }
      for (int k = 0; k < 4; ++k) out.counts[row][k] = c[3 - k];
      p = detail::normalized(c);
    }
    for (int k = 0; k < 4; ++k) out.probabilities[row][k] = p[3 - k];
  }
  out.identity_probability = 0.5 * (out.probabilities[0][0] + out.probabilities[1][1]);
  out.flip_probability = 0.5 * (out.probabilities[2][3] + out.probabilities[3][2]);
  return out;
}

// ---------------------------------------------------------------------------
// Ramsey spectroscopy

struct SinusoidFit {
  double amplitude = 0.0;  // A >= 0
  double phase = 0.0;      // psi in (-pi, pi]
  double offset = 0.0;     // B
  double rms_residual = 0.0;
  bool converged = false;
};

/// Least-squares fit of y = A cos(omega x + psi) + B at fixed omega.
inline SinusoidFit fit_sinusoid(const std::vector<double>& x, const std::vector<double>& y,
                                double omega) {
  SinusoidFit fit;
  if (x.size() != y.size() || x.size() < 3) return fit;
  Eigen::MatrixXd a(x.size(), 3);
  Eigen::VectorXd b(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    a(i, 0) = std::cos(omega * x[i]);
    a(i, 1) = std::sin(omega * x[i]);
    a(i, 2) = 1.0;
    b(i) = y[i];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < 3) return fit;
  const Eigen::VectorXd c = qr.solve(b);
  fit.amplitude = std::hypot(c(0), c(1));
  fit.phase = std::atan2(-c(1), c(0));
  fit.offset = c(2);
  fit.rms_residual = std::sqrt((a * c - b).squaredNorm() / static_cast<double>(x.size()));
  fit.converged = std::isfinite(fit.amplitude) && std::isfinite(fit.offset);
  return fit;
}

struct RamseyResult {
  std::vector<double> detuning_khz;
  std::vector<double> transfer;
  double phase2 = 0.0;
  SinusoidFit fit;
  double peak_transfer = 0.0;  // B + A
  double contrast = 0.0;       // 2A
};

/// Two pi/2 pulses (instantaneous) separated by the free precession time;
/// the aggregate preparation/rotation/readout error F is applied as a
/// symmetric readout flip with probability 1 - F.
inline double ramsey_transfer(double detuning, double separation_us, double phase2,
                              double readout_fidelity) {
  const UnitaryOp first = rotation(std::numbers::pi / 2.0, 0.0);
  const UnitaryOp second = rotation(std::numbers::pi / 2.0, phase2);
  CMatrix free = CMatrix::Zero(2, 2);
  free(0, 0) = std::polar(1.0, -0.5 * detuning * separation_us);
  free(1, 1) = std::polar(1.0, 0.5 * detuning * separation_us);
  const CVector psi = second.matrix() * free * first.matrix() * states::up().amplitudes();
  const double p = std::norm(psi(1));
  const double e = 1.0 - readout_fidelity;
  return e + (1.0 - 2.0 * e) * p;
}

inline std::vector<double> default_ramsey_grid_khz() {
  std::vector<double> g;
  for (int k = -20; k <= 20; ++k) g.push_back(2.0 * k);
  return g;
}

inline RamseyResult run_ramsey(const ExperimentConfig& cfg, const std::vector<double>& grid_khz,
                               double phase2, const RunOptions& opt) {
  cfg.validate();
  if (grid_khz.empty()) throw std::invalid_argument("Ramsey detuning grid is empty");
  RamseyResult out;
  out.detuning_khz = grid_khz;
  out.phase2 = phase2;
  const double f = cfg.imperfections.rotation_readout_fidelity;
  for (std::size_t i = 0; i < grid_khz.size(); ++i) {
    const double p = ramsey_transfer(units::angular_from_khz(grid_khz[i]), cfg.ramsey_separation_us,
                                     phase2, f);
    if (opt.mode == Mode::analytic) {
      out.transfer.push_back(p);
    } else {
      Rng rng = make_stream(opt.seed, 0x7000 + i + (phase2 != 0.0 ? 0x100 : 0));
      std::binomial_distribution<std::uint64_t> bin(opt.trials, p);
      out.transfer.push_back(static_cast<double>(bin(rng)) / static_cast<double>(opt.trials));
    }
  }
  std::vector<double> x;
  for (double k : grid_khz) x.push_back(units::angular_from_khz(k));
  out.fit = fit_sinusoid(x, out.transfer, cfg.ramsey_separation_us);
  out.peak_transfer = out.fit.offset + out.fit.amplitude;
  out.contrast = 2.0 * out.fit.amplitude;
  return out;
}

/// Signed phase difference b - a wrapped into (-pi, pi].
inline double phase_difference(double a, double b) {
  return std::remainder(b - a, 2.0 * std::numbers::pi);
}

// ---------------------------------------------------------------------------
// Hyperfine-state detection

struct StateDetectionResult {
  std::vector<std::uint64_t> histogram_f1;  // photon counts 0..max, last bin open
  std::vector<std::uint64_t> histogram_f2;
  double p_correct_f1 = 0.0;
  double p_correct_f2 = 0.0;
  double fidelity = 0.0;
  double closed_form_fidelity = 0.0;
  int threshold = 1;
  std::uint64_t trials = 0;
};

inline StateDetectionResult run_state_detection(const ExperimentConfig& cfg, const RunOptions& opt,
                                                int max_count = 20) {
  cfg.validate();
  if (opt.trials < 1) throw std::invalid_argument("trials must be at least 1");
  const auto& d = cfg.detection;
  StateDetectionResult out;
  out.threshold = d.threshold;
  out.trials = opt.trials;
  out.closed_form_fidelity = d.fidelity();
  const std::uint64_t n_blocks = (opt.trials + opt.block_size - 1) / opt.block_size;
  struct Tally {
    std::vector<std::uint64_t> h1, h2;
    std::uint64_t ok1 = 0, ok2 = 0;
  };
  auto block = [&](std::size_t b) {
    Rng rng = make_stream(opt.seed, 0x8000, b);
    Tally t{std::vector<std::uint64_t>(max_count + 1, 0), std::vector<std::uint64_t>(max_count + 1, 0)};
    const std::uint64_t begin = b * opt.block_size;
    const std::uint64_t end = std::min(opt.trials, begin + opt.block_size);
    for (std::uint64_t i = begin; i < end; ++i) {
      const auto r1 = pulse::hyperfine_detection(pulse::Hyperfine::F1, d, rng);
      const auto r2 = pulse::hyperfine_detection(pulse::Hyperfine::F2, d, rng);
      ++t.h1[std::min(r1.count, max_count)];
      ++t.h2[std::min(r2.count, max_count)];
      t.ok1 += r1.label == pulse::Hyperfine::F1;
      t.ok2 += r2.label == pulse::Hyperfine::F2;
    }
    return t;
  };
  const auto tallies = run_blocks(static_cast<std::size_t>(n_blocks), opt.threads, block);
  out.histogram_f1.assign(max_count + 1, 0);
  out.histogram_f2.assign(max_count + 1, 0);
  std::uint64_t ok1 = 0, ok2 = 0;
  for (const auto& t : tallies) {
    for (int k = 0; k <= max_count; ++k) {
      out.histogram_f1[k] += t.h1[k];
      out.histogram_f2[k] += t.h2[k];
    }
    ok1 += t.ok1;
    ok2 += t.ok2;
  }
  out.p_correct_f1 = static_cast<double>(ok1) / static_cast<double>(opt.trials);
  out.p_correct_f2 = static_cast<double>(ok2) / static_cast<double>(opt.trials);
  out.fidelity = 0.5 * (out.p_correct_f1 + out.p_correct_f2);
  return out;
}

}  // namespace apgate::protocols

#endif  // APGATE_PROTOCOLS_HPP

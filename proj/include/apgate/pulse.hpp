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

#ifndef APGATE_PULSE_HPP
#define APGATE_PULSE_HPP

// Faint coherent pulses, the imperfection channels acting on the gate, and
// the hyperfine-state readout of the atom.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "apgate/cavity.hpp"
#include "apgate/numerics.hpp"
#include "apgate/qlin.hpp"
#include "apgate/units.hpp"

namespace apgate::pulse {

namespace detail {
inline void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument(std::string(name) + " must lie in [0,1]");
  }
}
}  // namespace detail

struct CoherentPulse {
  double mean_photons = 0.3;
  double fwhm_us = 0.7;

  void validate() const {
    if (!(mean_photons >= 0.0) || !std::isfinite(mean_photons)) {
      throw std::invalid_argument("mean photon number must be non-negative");
    }
    if (!(fwhm_us > 0.0)) throw std::invalid_argument("pulse FWHM must be positive");
  }

  /// Non-empty when the pulse is too bright for the single-photon picture.
  std::optional<std::string> warning() const {
    if (mean_photons > 1.0) {
      return "mean photon number " + std::to_string(mean_photons) +
             " exceeds 1; multi-photon contamination dominates";
    }
    return std::nullopt;
  }

  bool operator==(const CoherentPulse&) const = default;
};

/// Poisson(nbar) for n = 0..n_max; the tail beyond n_max is folded into the
/// last bin so the vector sums to one.
inline std::vector<double> photon_number_dist(const CoherentPulse& p, int n_max) {
  p.validate();
  if (n_max < 2) throw std::invalid_argument("n_max must be at least 2");
  std::vector<double> out(static_cast<std::size_t>(n_max) + 1, 0.0);
  double term = std::exp(-p.mean_photons);
  double partial = 0.0;
  for (int k = 0; k < n_max; ++k) {
    out[k] = term;
    partial += term;
    term *= p.mean_photons / static_cast<double>(k + 1);
  }
  out[n_max] = 1.0 - partial;
  return out;
}

/// P(n >= 2 | n >= 1) for a Poissonian pulse.
inline double multi_photon_fraction(const CoherentPulse& p) {
  p.validate();
  const double nbar = p.mean_photons;
  if (nbar == 0.0) return 0.0;
  const double p_ge1 = -std::expm1(-nbar);
  const double p_ge2 = p_ge1 - nbar * std::exp(-nbar);
  return p_ge2 / p_ge1;
}

struct ImperfectionConfig {
  double mode_overlap = 0.92;
  double prep_fidelity = 0.96;
  double freq_jitter_khz = 300.0;
  double detuning_bias_khz = 0.0;
  double photonic_meas_error = 0.01;
  double loss_coupled = 0.34;
  double loss_uncoupled = 0.30;
  double rotation_readout_fidelity = 0.95;
  bool multi_photon = true;

  /// Everything switched off.
  static ImperfectionConfig ideal() {
    ImperfectionConfig c;
    c.mode_overlap = 1.0;
    c.prep_fidelity = 1.0;
    c.freq_jitter_khz = 0.0;
    c.detuning_bias_khz = 0.0;
    c.photonic_meas_error = 0.0;
    c.loss_coupled = 0.0;
    c.loss_uncoupled = 0.0;
    c.rotation_readout_fidelity = 1.0;
    c.multi_photon = false;
    return c;
  }

  void validate() const {
    detail::check_probability(mode_overlap, "mode_overlap");
    detail::check_probability(prep_fidelity, "prep_fidelity");
    detail::check_probability(photonic_meas_error, "photonic_meas_error");
    detail::check_probability(loss_coupled, "loss_coupled");
    detail::check_probability(loss_uncoupled, "loss_uncoupled");
    detail::check_probability(rotation_readout_fidelity, "rotation_readout_fidelity");
    if (!(freq_jitter_khz >= 0.0)) throw std::invalid_argument("freq_jitter_khz must be >= 0");
    if (!std::isfinite(detuning_bias_khz)) throw std::invalid_argument("detuning_bias_khz");
  }

  cavity::BranchLosses losses() const { return {loss_coupled, loss_uncoupled}; }

  bool operator==(const ImperfectionConfig&) const = default;
};

// ---------------------------------------------------------------------------
// Channels

/// With probability 1 - f_prep the atom ends up outside the qubit (another
/// F=2 Zeeman state). On the qubit it behaves like the uncoupled |down>, so
/// the channel replaces the state by |down><down|. Readout of that error
/// state is handled by the protocols, which see it as F=2.
inline KrausChannel prep_error_channel(double f_prep) {
  detail::check_probability(f_prep, "f_prep");
  const double s = std::sqrt(1.0 - f_prep);
  CMatrix to_down_from_up = CMatrix::Zero(2, 2);
  to_down_from_up(1, 0) = s;
  CMatrix keep_down = CMatrix::Zero(2, 2);
  keep_down(1, 1) = s;
  return KrausChannel({std::sqrt(f_prep) * pauli::I(), to_down_from_up, keep_down}, true);
}

/// With weight `overlap` the photon enters the cavity mode and sees the lossy
/// gate; otherwise it is reflected by the mirror surface with amplitude +1.
inline KrausChannel mode_mismatch_channel(double overlap, const cavity::CavityParams& p,
                                          const cavity::BranchLosses& losses,
                                          const cavity::GateModelOptions& opt = {}) {
  detail::check_probability(overlap, "overlap");
  return cavity::lossy_gate_channel(p, losses, opt).mix(KrausChannel::identity(2), overlap);
}

/// Atom channel from an extra photon (prepared in |down_x>) that also passes
/// the gate and is never detected; it leaves the atom dephased in z.
/// `fraction` is the probability such a photon accompanies the detected one.
inline KrausChannel multi_photon_channel(double fraction) {
  detail::check_probability(fraction, "fraction");
  const KrausChannel extra = ancilla_channel(cavity::ideal_gate(), states::down_x());
  return KrausChannel::identity(1).mix(extra, 1.0 - fraction);
}

/// Probe detuning (rad/us) for one trial; sigma and bias in kHz.
inline double sample_jitter(Rng& rng, double sigma_khz, double bias_khz = 0.0) {
  if (!(sigma_khz >= 0.0)) throw std::invalid_argument("sigma must be non-negative");
  if (sigma_khz == 0.0) return units::angular_from_khz(bias_khz);
  std::normal_distribution<double> dist(bias_khz, sigma_khz);
  return units::angular_from_khz(dist(rng));
}

/// Classical readout confusion of one binary outcome.
struct Confusion {
  double flip_from_0 = 0.0;  // P(read 1 | true 0)
  double flip_from_1 = 0.0;  // P(read 0 | true 1)

  static Confusion symmetric(double e) {
    detail::check_probability(e, "confusion probability");
    return {e, e};
  }

  /// `first` followed by `second`.
  static Confusion chain(const Confusion& first, const Confusion& second) {
    return {first.flip_from_0 * (1.0 - second.flip_from_1) +
                (1.0 - first.flip_from_0) * second.flip_from_0,
            first.flip_from_1 * (1.0 - second.flip_from_0) +
                (1.0 - first.flip_from_1) * second.flip_from_1};
  }

  bool trivial() const { return flip_from_0 == 0.0 && flip_from_1 == 0.0; }
};

/// Applies `c` to the outcome bit of `qubit` in a joint outcome distribution
/// over `n_qubits` (outcome index bits ordered like basis indices).
inline void apply_confusion(std::vector<double>& probs, int qubit, int n_qubits,
                            const Confusion& c) {
  if (probs.size() != (std::size_t{1} << n_qubits)) {
    throw std::invalid_argument("distribution size does not match qubit count");
  }
  if (c.trivial()) return;
  const std::size_t bit = std::size_t{1} << (n_qubits - 1 - qubit);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (i & bit) continue;
    const double p0 = probs[i];
    const double p1 = probs[i | bit];
    probs[i] = p0 * (1.0 - c.flip_from_0) + p1 * c.flip_from_1;
    probs[i | bit] = p0 * c.flip_from_0 + p1 * (1.0 - c.flip_from_1);
  }
}

/// Outcome flips with probability e in every analyzer basis. As a channel on
/// the photon this is depolarization with Bloch shrink 1 - 2e, which exists
/// for e <= 1/2; use `Confusion::symmetric` for the classical form.
inline KrausChannel analyzer_error_channel(double e) {
  detail::check_probability(e, "analyzer error");
  if (e > 0.5) {
    throw std::invalid_argument("analyzer error above 1/2 has no channel form");
  }
  const double p = 2.0 * e;
  return KrausChannel({std::sqrt(1.0 - 0.75 * p) * pauli::I(), std::sqrt(p / 4.0) * pauli::X(),
                       std::sqrt(p / 4.0) * pauli::Y(), std::sqrt(p / 4.0) * pauli::Z()},
                      true);
}

// ---------------------------------------------------------------------------
// Hyperfine-state detection

enum class Hyperfine { F1, F2 };

struct DetectionModel {
  double mean_signal_photons = -std::log(0.004);
  double dark_prob = 0.003;
  int threshold = 1;

  /// Matches a bright-state detection probability and a dark-state
  /// false-positive probability at threshold 1.
  static DetectionModel calibrated(double p_detect_f2 = 0.996, double p_silent_f1 = 0.997) {
    detail::check_probability(p_detect_f2, "p_detect_f2");
    detail::check_probability(p_silent_f1, "p_silent_f1");
    return {-std::log(1.0 - p_detect_f2), 1.0 - p_silent_f1, 1};
  }

  /// Error-free readout to double precision.
  static DetectionModel ideal() { return {60.0, 0.0, 1}; }

  void validate() const {
    if (!(mean_signal_photons >= 0.0)) throw std::invalid_argument("mean_signal_photons");
    detail::check_probability(dark_prob, "dark_prob");
    if (threshold < 1) throw std::invalid_argument("threshold must be at least 1");
  }

  /// P(count >= threshold | F=2).
  double p_correct_f2() const {
    validate();
    double term = std::exp(-mean_signal_photons);
    double below = 0.0;
    for (int k = 0; k < threshold; ++k) {
      below += term;
      term *= mean_signal_photons / static_cast<double>(k + 1);
    }
    return 1.0 - below;
  }

  /// P(count < threshold | F=1). A dark event yields a single count.
  double p_correct_f1() const {
    validate();
    return threshold >= 2 ? 1.0 : 1.0 - dark_prob;
  }

  double fidelity() const { return 0.5 * (p_correct_f2() + p_correct_f1()); }

  /// Readout confusion on the atom outcome bit (0 = F=2 = |up>).
  Confusion confusion() const { return {1.0 - p_correct_f2(), 1.0 - p_correct_f1()}; }

  bool operator==(const DetectionModel&) const = default;
};

struct DetectionOutcome {
  Hyperfine label;
  int count;
};

inline DetectionOutcome hyperfine_detection(Hyperfine true_state, const DetectionModel& d,
                                            Rng& rng) {
  d.validate();
  int count = 0;
  if (true_state == Hyperfine::F2 && d.mean_signal_photons > 0.0) {
    std::poisson_distribution<int> signal(d.mean_signal_photons);
    count = signal(rng);
  } else {
    std::bernoulli_distribution dark(d.dark_prob);
    count = dark(rng) ? 1 : 0;
  }
  return {count >= d.threshold ? Hyperfine::F2 : Hyperfine::F1, count};
}

}  // namespace apgate::pulse

#endif  // APGATE_PULSE_HPP

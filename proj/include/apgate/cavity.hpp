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

#ifndef APGATE_CAVITY_HPP
#define APGATE_CAVITY_HPP

// Reflection of a photon from a single-sided cavity containing one atom, and
// the conditional-phase gate it implements.

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

#include "apgate/numerics.hpp"
#include "apgate/qlin.hpp"
#include "apgate/units.hpp"

namespace apgate::cavity {

/// Mirror transmissions in ppm. The coupling mirror sets kappa_in, everything
/// else (high reflector, scattering, absorption) only adds to kappa.
struct MirrorBudget {
  double t_coupling_ppm = 95.0;
  double loss_other_ppm = 8.0;

  void validate() const {
    if (!(t_coupling_ppm >= 0.0) || !(loss_other_ppm >= 0.0)) {
      throw std::invalid_argument("mirror transmissions must be non-negative");
    }
    if (t_coupling_ppm + loss_other_ppm <= 0.0) {
      throw std::invalid_argument("mirror budget has no decay channel");
    }
  }

  /// kappa_in / kappa.
  double coupling_fraction() const {
    validate();
    return t_coupling_ppm / (t_coupling_ppm + loss_other_ppm);
  }

  bool operator==(const MirrorBudget&) const = default;
};

/// Rates in rad/us. Detunings are probe minus cavity (delta_c) and probe
/// minus atomic transition (delta_a).
struct CavityParams {
  double g = units::angular_from_mhz(6.7);
  double kappa = units::angular_from_mhz(2.5);
  double kappa_in = units::angular_from_mhz(2.5) * MirrorBudget{}.coupling_fraction();
  double gamma = units::angular_from_mhz(3.0);
  double delta_c = 0.0;
  double delta_a = 0.0;

  static CavityParams with_mirrors(const MirrorBudget& m) {
    CavityParams p;
    p.kappa_in = p.kappa * m.coupling_fraction();
    return p;
  }

  void validate() const {
    if (!(g > 0.0) || !(kappa > 0.0) || !(kappa_in > 0.0) || !(gamma > 0.0)) {
      throw std::invalid_argument("cavity rates must be positive");
    }
    if (kappa_in > kappa) throw std::invalid_argument("kappa_in exceeds kappa");
    if (!std::isfinite(delta_c) || !std::isfinite(delta_a)) {
      throw std::invalid_argument("detunings must be finite");
    }
  }

  /// Same system probed `delta` further from resonance (laser moves, cavity
  /// and atomic transition stay locked to each other).
  CavityParams probe_shifted(double delta) const {
    CavityParams p = *this;
    p.delta_c += delta;
    p.delta_a += delta;
    return p;
  }

  CavityParams on_resonance() const {
    CavityParams p = *this;
    p.delta_c = 0.0;
    p.delta_a = 0.0;
    return p;
  }

  double cooperativity() const { return g * g / (2.0 * kappa * gamma); }

  bool operator==(const CavityParams&) const = default;
};

/// Steady-state single-sided input-output reflection amplitude:
/// r = 1 - 2 kappa_in (i delta_a + gamma) / [(i delta_c + kappa)(i delta_a + gamma) + g^2],
/// with g = 0 for the uncoupled case.
inline Complex reflection_coefficient(const CavityParams& p, bool coupled) {
  p.validate();
  const Complex i{0.0, 1.0};
  const double g = coupled ? p.g : 0.0;
  const Complex atom = i * p.delta_a + p.gamma;
  const Complex denom = (i * p.delta_c + p.kappa) * atom + g * g;
  return 1.0 - 2.0 * p.kappa_in * atom / denom;
}

/// Reflection amplitude averaged over the power spectrum of a Gaussian pulse
/// with temporal intensity FWHM `fwhm_us` (spectral sigma sqrt(2 ln 2)/fwhm).
inline Complex pulse_averaged_reflection(const CavityParams& p, bool coupled, double fwhm_us,
                                         int nodes = 24) {
  if (!(fwhm_us > 0.0)) throw std::invalid_argument("pulse FWHM must be positive");
  const double sigma = std::sqrt(2.0 * std::numbers::ln2) / fwhm_us;
  const auto rule = gaussian_quadrature(nodes, 0.0, sigma);
  Complex acc{0.0};
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
    acc += rule.weights[k] * reflection_coefficient(p.probe_shifted(rule.nodes[k]), coupled);
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Level scheme

enum class AtomQubit { up, down };     // up = |F=2, mF=2>, down = |F=1, mF=1>
enum class PhotonQubit { up, down };   // up = right circular, down = left circular

/// Light-shifted excited manifold. Ground-state shifts are common to all
/// Zeeman states; only the F'=3 shifts depend on |mF|.
struct LevelScheme {
  std::array<double, 4> excited_shift_ghz{0.16, 0.15, 0.10, 0.05};  // index |mF|
  double ground_shift_ghz = 0.05;                                    // of |2,2>
  double f1_detuning_ghz = 7.0;

  void validate() const {
    for (std::size_t k = 0; k < excited_shift_ghz.size(); ++k) {
      if (!(excited_shift_ghz[k] > 0.0)) {
        throw std::invalid_argument("excited-state shifts must be positive");
      }
      if (k > 0 && !(excited_shift_ghz[k] < excited_shift_ghz[k - 1])) {
        throw std::invalid_argument("excited-state shifts must decrease with |mF|");
      }
    }
    if (!(f1_detuning_ghz > 0.0)) throw std::invalid_argument("F=1 detuning must be positive");
  }

  double stark_shift_33() const { return excited_shift_ghz[3] + ground_shift_ghz; }
  double stark_shift_31() const { return excited_shift_ghz[1] + ground_shift_ghz; }
  /// |2,2> <-> |3,1> relative to the resonant |2,2> <-> |3,3> line.
  double spurious_detuning() const { return stark_shift_31() - stark_shift_33(); }

  /// Detuning (GHz) of the transition driven by `photon` from `atom`, with
  /// the probe resonant on |2,2> <-> |3,3>.
  double transition_detuning_ghz(AtomQubit atom, PhotonQubit photon) const {
    if (atom == AtomQubit::down) return f1_detuning_ghz;
    return photon == PhotonQubit::up ? 0.0 : spurious_detuning();
  }

  bool operator==(const LevelScheme&) const = default;
};

/// Strong coupling needs the driven transition within 10 g of the probe.
inline bool is_strongly_coupled(AtomQubit atom, PhotonQubit photon, const LevelScheme& scheme,
                                const CavityParams& p) {
  scheme.validate();
  p.validate();
  const double detuning = units::angular_from_ghz(scheme.transition_detuning_ghz(atom, photon));
  return std::abs(detuning) < 10.0 * p.g;
}

// ---------------------------------------------------------------------------
// Gates

/// Basis order (up_a up_p, up_a down_p, down_a up_p, down_a down_p).
inline constexpr std::array<std::pair<AtomQubit, PhotonQubit>, 4> kBranchOrder{{
    {AtomQubit::up, PhotonQubit::up},
    {AtomQubit::up, PhotonQubit::down},
    {AtomQubit::down, PhotonQubit::up},
    {AtomQubit::down, PhotonQubit::down},
}};

/// Complex reflection amplitude per (atom, photon) basis pair.
struct GateBranch {
  std::array<Complex, 4> amplitude{};

  void validate() const {
    for (const auto& a : amplitude) {
      if (std::abs(a) > 1.0 + 1e-12) throw std::invalid_argument("|amplitude| exceeds 1");
    }
  }

  CMatrix matrix() const {
    CMatrix m = CMatrix::Zero(4, 4);
    for (int k = 0; k < 4; ++k) m(k, k) = amplitude[k];
    return m;
  }
};

/// Conditional pi phase: only |up_a up_p> keeps its sign.
inline UnitaryOp ideal_gate() {
  CMatrix m = CMatrix::Zero(4, 4);
  m.diagonal() << 1.0, -1.0, -1.0, -1.0;
  return UnitaryOp::from_matrix(std::move(m));
}

/// ideal_gate dressed with an atom-local Z. In the photonic x basis this is
/// exactly the CNOT matrix (control atom |up>, target photon).
inline UnitaryOp cnot_gate() {
  return UnitaryOp::from_matrix(kron(pauli::Z(), pauli::I())) * ideal_gate();
}

/// Probability that the photon is not reflected back into the detected mode.
struct BranchLosses {
  double coupled = 0.34;
  double uncoupled = 0.30;

  void validate() const {
    if (!(coupled >= 0.0 && coupled <= 1.0) || !(uncoupled >= 0.0 && uncoupled <= 1.0)) {
      throw std::invalid_argument("loss probabilities must lie in [0,1]");
    }
  }

  bool operator==(const BranchLosses&) const = default;
};

struct GateModelOptions {
  bool spectral_averaging = false;
  double pulse_fwhm_us = 0.7;
  LevelScheme scheme{};
};

/// Branch amplitudes sqrt(1 - loss) * sign, where the sign is the resonant
/// reflection sign (+1 coupled, -1 uncoupled) and any probe detuning in `p`
/// adds the phase that the reflection model predicts relative to resonance.
inline GateBranch gate_branches(const CavityParams& p, const BranchLosses& losses,
                                const GateModelOptions& opt = {}) {
  losses.validate();
  auto r = [&](const CavityParams& q, bool coupled) {
    return opt.spectral_averaging ? pulse_averaged_reflection(q, coupled, opt.pulse_fwhm_us)
                                  : reflection_coefficient(q, coupled);
  };
  const CavityParams resonant = p.on_resonance();
  const double excess_c = std::arg(r(p, true)) - std::arg(r(resonant, true));
  const double excess_u = std::arg(r(p, false)) - std::arg(r(resonant, false));
  GateBranch out;
  for (int k = 0; k < 4; ++k) {
    const auto [atom, photon] = kBranchOrder[k];
    const bool coupled = is_strongly_coupled(atom, photon, opt.scheme, p);
    const double loss = coupled ? losses.coupled : losses.uncoupled;
    const double sign = coupled ? 1.0 : -1.0;
    out.amplitude[k] = std::sqrt(1.0 - loss) * sign * std::polar(1.0, coupled ? excess_c : excess_u);
  }
  out.validate();
  return out;
}

/// Trace-decreasing channel on atom (x) photon; the missing trace is the
/// probability that the photon was lost.
inline KrausChannel lossy_gate_channel(const CavityParams& p, const BranchLosses& losses,
                                       const GateModelOptions& opt = {}) {
  const GateBranch b = gate_branches(p, losses, opt);
  const bool lossless = losses.coupled == 0.0 && losses.uncoupled == 0.0;
  return KrausChannel({b.matrix()}, lossless);
}

struct LossEstimate {
  double coupled = 0.0;
  double uncoupled = 0.0;
};

/// Resonant non-reflection probability 1 - |r|^2 for both branches, with
/// kappa_in / kappa taken from the mirror budget.
inline LossEstimate loss_from_first_principles(const CavityParams& p, const MirrorBudget& m) {
  CavityParams q = p.on_resonance();
  q.kappa_in = q.kappa * m.coupling_fraction();
  return {1.0 - std::norm(reflection_coefficient(q, true)),
          1.0 - std::norm(reflection_coefficient(q, false))};
}

/// Model losses next to the calibrated ones. The uncoupled branch is expected
/// to agree within 0.04; the coupled branch is known to disagree.
struct LossBudgetReport {
  LossEstimate model;
  BranchLosses measured;
  bool uncoupled_consistent = false;
  bool coupled_discrepancy = false;
  double consistency_window = 0.04;
};

inline LossBudgetReport compare_loss_budget(const CavityParams& p, const MirrorBudget& m,
                                            const BranchLosses& measured) {
  LossBudgetReport rep;
  rep.model = loss_from_first_principles(p, m);
  rep.measured = measured;
  rep.uncoupled_consistent =
      std::abs(rep.model.uncoupled - measured.uncoupled) <= rep.consistency_window;
  rep.coupled_discrepancy =
      std::abs(rep.model.coupled - measured.coupled) > rep.consistency_window;
  return rep;
}

}  // namespace apgate::cavity

#endif  // APGATE_CAVITY_HPP

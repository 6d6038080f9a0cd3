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

#ifndef APGATE_TOMOGRAPHY_HPP
#define APGATE_TOMOGRAPHY_HPP

// Pauli-basis state tomography: every qubit is measured in X, Y or Z, giving
// 3^n settings with 2^n outcomes each. Outcome bit 0 is the +1 eigenstate
// (|up>, |up_x>, |up_y>); outcome indices are ordered like basis indices.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "apgate/numerics.hpp"
#include "apgate/pulse.hpp"
#include "apgate/qlin.hpp"

namespace apgate::tomo {

enum class Basis { X, Y, Z };

inline char basis_char(Basis b) {
  switch (b) {
    case Basis::X: return 'X';
    case Basis::Y: return 'Y';
    case Basis::Z: return 'Z';
  }
  return '?';
}

/// Eigenvector of `b` for outcome bit `bit`.
inline const PureState& basis_vector(Basis b, int bit) {
  static const PureState table[3][2] = {{states::up_x(), states::down_x()},
                                        {states::up_y(), states::down_y()},
                                        {states::up(), states::down()}};
  return table[static_cast<int>(b)][bit & 1];
}

struct MeasurementSetting {
  std::vector<Basis> bases;

  static MeasurementSetting parse(std::string_view label) {
    if (label.empty() || label.size() > static_cast<std::size_t>(kMaxQubits)) {
      throw std::invalid_argument("setting label must name 1 to 3 bases");
    }
    MeasurementSetting s;
    for (char c : label) {
      switch (c) {
        case 'X': s.bases.push_back(Basis::X); break;
        case 'Y': s.bases.push_back(Basis::Y); break;
        case 'Z': s.bases.push_back(Basis::Z); break;
        default: throw std::invalid_argument(std::string("unknown basis '") + c + "'");
      }
    }
    return s;
  }

  std::string label() const {
    std::string out;
    for (Basis b : bases) out.push_back(basis_char(b));
    return out;
  }

  int qubits() const { return static_cast<int>(bases.size()); }
  std::size_t outcomes() const { return std::size_t{1} << bases.size(); }

  /// Product eigenvectors, one per outcome.
  std::vector<CVector> outcome_vectors() const {
    std::vector<CVector> out;
    const int n = qubits();
    for (std::size_t o = 0; o < outcomes(); ++o) {
      CVector v = CVector::Ones(1);
      for (int q = 0; q < n; ++q) {
        const int bit = static_cast<int>((o >> (n - 1 - q)) & 1u);
        const CVector& f = basis_vector(bases[q], bit).amplitudes();
        CVector next(v.size() * 2);
        for (Eigen::Index i = 0; i < v.size(); ++i) next.segment(2 * i, 2) = v(i) * f;
        v = std::move(next);
      }
      out.push_back(std::move(v));
    }
    return out;
  }

  std::vector<CMatrix> projectors() const {
    std::vector<CMatrix> out;
    for (const auto& v : outcome_vectors()) out.push_back(v * v.adjoint());
    return out;
  }

  bool operator==(const MeasurementSetting&) const = default;
};

/// All 3^n settings, first qubit varying slowest, X < Y < Z.
inline std::vector<MeasurementSetting> all_settings(int n_qubits) {
  if (n_qubits < 1 || n_qubits > kMaxQubits) throw std::invalid_argument("qubit count");
  std::vector<MeasurementSetting> out;
  int total = 1;
  for (int q = 0; q < n_qubits; ++q) total *= 3;
  for (int k = 0; k < total; ++k) {
    MeasurementSetting s;
    s.bases.resize(n_qubits);
    int rest = k;
    for (int q = n_qubits - 1; q >= 0; --q) {
      s.bases[q] = static_cast<Basis>(rest % 3);
      rest /= 3;
    }
    out.push_back(std::move(s));
  }
  return out;
}

/// p_i = <v_i| rho |v_i>; works on any Hermitian operator (used on
/// unnormalized states by the protocols).
inline std::vector<double> born_weights(const CMatrix& rho, const MeasurementSetting& s) {
  if (rho.rows() != static_cast<Eigen::Index>(s.outcomes())) {
    throw std::invalid_argument("setting does not match state dimension");
  }
  std::vector<double> p;
  p.reserve(s.outcomes());
  for (const auto& v : s.outcome_vectors()) p.push_back(v.dot(rho * v).real());
  return p;
}

inline std::vector<double> born_probabilities(const DensityMatrix& rho, const MeasurementSetting& s) {
  std::vector<double> p = born_weights(rho.matrix(), s);
  double sum = 0.0;
  for (double& x : p) {
    x = std::max(x, 0.0);
    sum += x;
  }
  for (double& x : p) x /= sum;
  return p;
}

// ---------------------------------------------------------------------------
// Data records

struct CountsRecord {
  MeasurementSetting setting;
  std::vector<std::uint64_t> counts;
  std::uint64_t total = 0;

  void validate() const {
    if (counts.size() != setting.outcomes()) {
      throw std::invalid_argument("counts size does not match setting " + setting.label());
    }
    std::uint64_t sum = 0;
    for (auto c : counts) sum += c;
    if (sum != total) throw std::invalid_argument("counts do not sum to total");
  }

  bool operator==(const CountsRecord&) const = default;
};

/// Relative frequencies with a statistical weight (event count for data,
/// 1 for exact probabilities).
struct FrequencyRecord {
  MeasurementSetting setting;
  std::vector<double> frequencies;
  double weight = 1.0;
};

inline std::vector<FrequencyRecord> to_frequencies(std::span<const CountsRecord> records) {
  std::vector<FrequencyRecord> out;
  for (const auto& r : records) {
    r.validate();
    if (r.total == 0) {
      throw std::invalid_argument("setting " + r.setting.label() + " has no events");
    }
    FrequencyRecord f{r.setting, {}, static_cast<double>(r.total)};
    for (auto c : r.counts) f.frequencies.push_back(static_cast<double>(c) / static_cast<double>(r.total));
    out.push_back(std::move(f));
  }
  return out;
}

/// Multinomial counts per setting from the Born probabilities of `rho`,
/// optionally passed through a per-qubit readout confusion.
inline std::vector<CountsRecord> simulate_counts(
    const DensityMatrix& rho, std::span<const MeasurementSetting> settings, std::uint64_t shots,
    Rng& rng, const std::vector<pulse::Confusion>& confusion = {}) {
  if (shots == 0) throw std::invalid_argument("shots per setting must be at least 1");
  if (!confusion.empty() && static_cast<int>(confusion.size()) != rho.qubits()) {
    throw std::invalid_argument("one confusion entry per qubit required");
  }
  std::vector<CountsRecord> out;
  for (const auto& s : settings) {
    std::vector<double> p = born_probabilities(rho, s);
    for (std::size_t q = 0; q < confusion.size(); ++q) {
      pulse::apply_confusion(p, static_cast<int>(q), rho.qubits(), confusion[q]);
    }
    out.push_back({s, sample_multinomial(rng, shots, p), shots});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Linear inversion

namespace detail {

inline int common_qubits(std::span<const FrequencyRecord> records) {
  if (records.empty()) throw std::invalid_argument("no measurement records");
  const int n = records.front().setting.qubits();
  for (const auto& r : records) {
    if (r.setting.qubits() != n) throw std::invalid_argument("records mix qubit counts");
    if (r.frequencies.size() != r.setting.outcomes()) {
      throw std::invalid_argument("frequency vector does not match setting");
    }
  }
  return n;
}

inline void require_complete(std::span<const FrequencyRecord> records, int n) {
  for (const auto& s : all_settings(n)) {
    bool found = false;
    for (const auto& r : records) found = found || r.setting == s;
    if (!found) {
      throw std::invalid_argument("tomographically incomplete: missing setting " + s.label());
    }
  }
}

}  // namespace detail

/// rho = 2^-n sum_P <P> P over all Pauli strings, with each expectation value
/// averaged over every setting that measures it. Hermitian with unit trace
/// but not necessarily positive.
inline CMatrix linear_inversion(std::span<const FrequencyRecord> records) {
  const int n = detail::common_qubits(records);
  detail::require_complete(records, n);
  const CMatrix paulis[4] = {pauli::I(), pauli::X(), pauli::Y(), pauli::Z()};
  const Eigen::Index dim = Eigen::Index{1} << n;
  int n_strings = 1;
  for (int q = 0; q < n; ++q) n_strings *= 4;
  CMatrix rho = CMatrix::Zero(dim, dim);
  for (int code = 0; code < n_strings; ++code) {
    std::vector<int> letters(n);  // 0 = I, 1 = X, 2 = Y, 3 = Z
    int rest = code;
    for (int q = n - 1; q >= 0; --q) {
      letters[q] = rest % 4;
      rest /= 4;
    }
    double sum = 0.0;
    int matches = 0;
    for (const auto& r : records) {
      bool compatible = true;
      for (int q = 0; q < n && compatible; ++q) {
        compatible = letters[q] == 0 || static_cast<int>(r.setting.bases[q]) + 1 == letters[q];
      }
      if (!compatible) continue;
      double e = 0.0;
      for (std::size_t o = 0; o < r.frequencies.size(); ++o) {
        int parity = 0;
        for (int q = 0; q < n; ++q) {
          if (letters[q] != 0) parity ^= static_cast<int>((o >> (n - 1 - q)) & 1u);
        }
        e += parity ? -r.frequencies[o] : r.frequencies[o];
      }
      sum += e;
      ++matches;
    }
    const double expectation = sum / matches;
    CMatrix p = paulis[letters[0]];
    for (int q = 1; q < n; ++q) p = kron(p, paulis[letters[q]]);
    rho += expectation * p;
  }
  return rho / static_cast<double>(dim);
}

inline CMatrix linear_inversion(std::span<const CountsRecord> records) {
  const auto f = to_frequencies(records);
  return linear_inversion(std::span<const FrequencyRecord>(f));
}

// ---------------------------------------------------------------------------
// Maximum likelihood

struct MleOptions {
  int max_iter = 5000;
  double tol = 1e-10;       // stop when the log-likelihood gain per event drops below
  double dilution = 0.1;
  double probability_floor = 1e-12;
};

struct ReconstructionReport {
  DensityMatrix rho = DensityMatrix::maximally_mixed(1);
  double log_likelihood = 0.0;  // per event, sum_s w_s sum_o f_o ln p_o / sum_s w_s
  int iterations = 0;
  bool converged = false;
  std::vector<double> history;  // log-likelihood after each accepted step
  std::map<std::string, double> mc_std;
};

namespace detail {

struct Projected {
  std::vector<CVector> vectors;
  std::vector<double> coeff;  // weight * frequency / total weight
};

inline Projected flatten(std::span<const FrequencyRecord> records) {
  double total_weight = 0.0;
  for (const auto& r : records) {
    if (!(r.weight > 0.0)) throw std::invalid_argument("record weight must be positive");
    total_weight += r.weight;
  }
  Projected out;
  for (const auto& r : records) {
    auto vs = r.setting.outcome_vectors();
    for (std::size_t o = 0; o < vs.size(); ++o) {
      if (r.frequencies[o] < 0.0) throw std::invalid_argument("negative frequency");
      if (r.frequencies[o] == 0.0) continue;
      out.vectors.push_back(std::move(vs[o]));
      out.coeff.push_back(r.weight * r.frequencies[o] / total_weight);
    }
  }
  return out;
}

inline double log_likelihood(const Projected& data, const CMatrix& rho, double floor) {
  double ll = 0.0;
  for (std::size_t i = 0; i < data.vectors.size(); ++i) {
    const double p = data.vectors[i].dot(rho * data.vectors[i]).real();
    ll += data.coeff[i] * std::log(std::max(p, floor));
  }
  return ll;
}

}  // namespace detail

/// Diluted R-rho-R iteration: rho <- N[(1 - d) R rho R + d rho] with
/// R = sum_i (f_i / p_i) Pi_i. A step that would lower the likelihood is
/// retried with stronger dilution, so accepted steps never decrease it.
inline ReconstructionReport mle_reconstruct(std::span<const FrequencyRecord> records,
                                            const MleOptions& opt = {}) {
  const int n = detail::common_qubits(records);
  detail::require_complete(records, n);
  if (opt.max_iter < 1) throw std::invalid_argument("max_iter must be positive");
  if (!(opt.dilution >= 0.0 && opt.dilution < 1.0)) {
    throw std::invalid_argument("dilution must lie in [0,1)");
  }
  const detail::Projected data = detail::flatten(records);
  const Eigen::Index dim = Eigen::Index{1} << n;
  CMatrix rho = CMatrix::Identity(dim, dim) / static_cast<double>(dim);
  double ll = detail::log_likelihood(data, rho, opt.probability_floor);

  ReconstructionReport rep;
  rep.history.push_back(ll);
  for (int it = 1; it <= opt.max_iter; ++it) {
    CMatrix r = CMatrix::Zero(dim, dim);
    for (std::size_t i = 0; i < data.vectors.size(); ++i) {
      const CVector& v = data.vectors[i];
      const double p = std::max(v.dot(rho * v).real(), opt.probability_floor);
      r.noalias() += (data.coeff[i] / p) * (v * v.adjoint());
    }
    double d = opt.dilution;
    bool accepted = false;
    CMatrix next;
    double next_ll = ll;
    for (int attempt = 0; attempt < 40; ++attempt) {
      next = (1.0 - d) * (r * rho * r) + d * rho;
      next = ::apgate::detail::hermitian_part(next);
      next /= next.trace().real();
      next_ll = detail::log_likelihood(data, next, opt.probability_floor);
      if (next_ll >= ll) {
        accepted = true;
        break;
      }
      d = 0.5 * (1.0 + d);
    }
    rep.iterations = it;
    if (!accepted) {
      rep.converged = true;  // no ascent direction left at working precision
      break;
    }
    const double gain = next_ll - ll;
    rho = std::move(next);
    ll = next_ll;
    rep.history.push_back(ll);
    if (gain < opt.tol) {
      rep.converged = true;
      break;
    }
  }
  rep.rho = DensityMatrix::from_unnormalized(rho);
  rep.log_likelihood = ll;
  return rep;
}

inline ReconstructionReport mle_reconstruct(std::span<const CountsRecord> records,
                                            const MleOptions& opt = {}) {
  const auto f = to_frequencies(records);
  return mle_reconstruct(std::span<const FrequencyRecord>(f), opt);
}

using Metric = std::function<std::vector<double>(const DensityMatrix&)>;

/// Parametric bootstrap: each replica redraws every setting's counts from its
/// observed frequencies (same total), reconstructs by MLE and evaluates
/// `metric`. Returns the sample standard deviation of each metric component.
inline std::vector<double> monte_carlo_errors(std::span<const CountsRecord> records,
                                              const Metric& metric, int replicas,
                                              std::uint64_t seed, const MleOptions& opt = {},
                                              unsigned threads = 1) {
  if (replicas < 2) throw std::invalid_argument("at least two replicas required");
  const auto observed = to_frequencies(records);
  auto one = [&](std::size_t b) {
    Rng rng = make_stream(seed, 0x4d43'0000ull + b);
    std::vector<CountsRecord> replica;
    replica.reserve(observed.size());
    for (const auto& r : observed) {
      const auto total = static_cast<std::uint64_t>(std::llround(r.weight));
      replica.push_back({r.setting, sample_multinomial(rng, total, r.frequencies), total});
    }
    return metric(mle_reconstruct(std::span<const CountsRecord>(replica), opt).rho);
  };
  const auto values = run_blocks(static_cast<std::size_t>(replicas), threads, one);
  const std::size_t n_metrics = values.front().size();
  std::vector<double> out(n_metrics, 0.0);
  for (std::size_t m = 0; m < n_metrics; ++m) {
    std::vector<double> xs;
    for (const auto& v : values) xs.push_back(v.at(m));
    out[m] = sample_stddev(xs);
  }
  return out;
}

/// Haar-random pure state of n qubits.
inline PureState random_pure_state(int n_qubits, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  CVector v(Eigen::Index{1} << n_qubits);
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = Complex{g(rng), g(rng)};
  return PureState::from_amplitudes(std::move(v));
}

}  // namespace apgate::tomo

#endif  // APGATE_TOMOGRAPHY_HPP

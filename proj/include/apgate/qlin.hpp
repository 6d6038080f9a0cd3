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

#ifndef APGATE_QLIN_HPP
#define APGATE_QLIN_HPP

// Small dense complex linear algebra for at most three qubits.
//
// Conventions used throughout the library:
//   * qubit 0 is the atom, qubits 1 and 2 are photons in reflection order;
//   * basis index bit for qubit q is (index >> (n - 1 - q)) & 1, so qubit 0
//     is the most significant bit;
//   * bit value 0 is |up>, bit value 1 is |down>;
//   * x-basis: |up_x> = (|up> + |down>)/sqrt2, |down_x> = (|up> - |down>)/sqrt2,
//     used for both atom and photon.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace apgate {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr int kMaxQubits = 3;

namespace tol {
inline constexpr double kNorm = 1e-12;
inline constexpr double kHermitian = 1e-10;
inline constexpr double kTrace = 1e-10;
inline constexpr double kPsdFloor = -1e-8;
inline constexpr double kUnitary = 1e-10;
inline constexpr double kIdempotent = 1e-10;
inline constexpr double kKraus = 1e-10;
inline constexpr double kPhaseEquality = 1e-10;
inline constexpr double kCoherenceTie = 1e-12;
inline constexpr double kZeroProbability = 1e-15;
}  // namespace tol

/// Raised when post-selection keeps no probability mass at all.
class PostSelectionFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline int qubits_for_dim(Eigen::Index dim) {
  if (dim < 2 || (dim & (dim - 1)) != 0) {
    throw std::invalid_argument("dimension " + std::to_string(dim) +
                                " is not a power of two >= 2");
  }
  int n = 0;
  while ((Eigen::Index{1} << n) < dim) ++n;
  if (n > kMaxQubits) {
    throw std::invalid_argument("at most " + std::to_string(kMaxQubits) +
                                " qubits are supported, got " +
                                std::to_string(n));
  }
  return n;
}

inline double max_abs(const CMatrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline CMatrix hermitian_part(const CMatrix& m) {
  return 0.5 * (m + m.adjoint());
}

inline Eigen::VectorXd hermitian_eigenvalues(const CMatrix& m) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(m),
                                            Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

inline int bit_of(std::uint32_t index, int qubit, int n_qubits) {
  return static_cast<int>((index >> (n_qubits - 1 - qubit)) & 1u);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Value types

class PureState {
 public:
  /// Normalizes `amplitudes`; rejects zero vectors and unsupported sizes.
  static PureState from_amplitudes(CVector amplitudes) {
    detail::qubits_for_dim(amplitudes.size());
    const double norm = amplitudes.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw std::invalid_argument("cannot normalize a zero or non-finite state");
    }
    amplitudes /= norm;
    return PureState(std::move(amplitudes));
  }

  static PureState basis(int n_qubits, Eigen::Index index) {
    if (n_qubits < 1 || n_qubits > kMaxQubits) {
      throw std::invalid_argument("unsupported qubit count");
    }
    const Eigen::Index dim = Eigen::Index{1} << n_qubits;
    if (index < 0 || index >= dim) throw std::out_of_range("basis index");
    CVector v = CVector::Zero(dim);
    v(index) = 1.0;
    return PureState(std::move(v));
  }

  const CVector& amplitudes() const { return amplitudes_; }
  Eigen::Index dim() const { return amplitudes_.size(); }
  int qubits() const { return detail::qubits_for_dim(amplitudes_.size()); }
  Complex operator[](Eigen::Index i) const { return amplitudes_(i); }

  /// |<this|other>|^2.
  double overlap(const PureState& other) const {
    if (other.dim() != dim()) throw std::invalid_argument("dimension mismatch");
    return std::norm(amplitudes_.dot(other.amplitudes_));
  }

 private:
  explicit PureState(CVector v) : amplitudes_(std::move(v)) {}
  CVector amplitudes_;
};

/// Equality up to a global phase: |<a|b>| = 1 within 1e-10.
inline bool equal_up_to_phase(const PureState& a, const PureState& b,
                              double tolerance = tol::kPhaseEquality) {
  if (a.dim() != b.dim()) return false;
  return std::abs(std::abs(a.amplitudes().dot(b.amplitudes())) - 1.0) <=
         tolerance;
}

class DensityMatrix {
 public:
  /// Validates Hermiticity, unit trace and positivity (eigenvalue floor).
  static DensityMatrix from_matrix(const CMatrix& m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("matrix not square");
    detail::qubits_for_dim(m.rows());
    if (!m.allFinite()) throw std::invalid_argument("matrix has non-finite entries");
    const double herm = detail::max_abs(m - m.adjoint());
    if (herm > tol::kHermitian) {
      throw std::invalid_argument("matrix not Hermitian (deviation " +
                                  std::to_string(herm) + ")");
    }
    const Complex tr = m.trace();
    if (std::abs(tr - 1.0) > tol::kTrace) {
      throw std::invalid_argument("trace " + std::to_string(tr.real()) +
                                  " differs from 1");
    }
    const double min_eig = detail::hermitian_eigenvalues(m).minCoeff();
    if (min_eig < tol::kPsdFloor) {
      throw std::invalid_argument("matrix not positive semidefinite (eigenvalue " +
                                  std::to_string(min_eig) + ")");
    }
    return DensityMatrix(detail::hermitian_part(m));
  }

  /// Hermitizes and rescales to unit trace before validating; for results of
  /// arithmetic that is physical up to round-off.
  static DensityMatrix from_unnormalized(const CMatrix& m) {
    const double tr = m.trace().real();
    if (!(tr > tol::kZeroProbability)) {
      throw PostSelectionFailure("zero-trace operator cannot be normalized");
    }
    return from_matrix(detail::hermitian_part(m) / tr);
  }

  static DensityMatrix from_pure(const PureState& psi) {
    return DensityMatrix(psi.amplitudes() * psi.amplitudes().adjoint());
  }

  static DensityMatrix maximally_mixed(int n_qubits) {
    const Eigen::Index dim = Eigen::Index{1} << n_qubits;
    detail::qubits_for_dim(dim);
    return DensityMatrix(CMatrix::Identity(dim, dim) / static_cast<double>(dim));
  }

  const CMatrix& matrix() const { return m_; }
  Eigen::Index dim() const { return m_.rows(); }
  int qubits() const { return detail::qubits_for_dim(m_.rows()); }
  Complex operator()(Eigen::Index r, Eigen::Index c) const { return m_(r, c); }

  Eigen::VectorXd eigenvalues() const { return detail::hermitian_eigenvalues(m_); }
  double purity() const { return (m_ * m_).trace().real(); }

 private:
  explicit DensityMatrix(CMatrix m) : m_(std::move(m)) {}
  CMatrix m_;
};

class UnitaryOp {
 public:
  static UnitaryOp from_matrix(CMatrix m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("matrix not square");
    detail::qubits_for_dim(m.rows());
    const double dev = detail::max_abs(
        m * m.adjoint() - CMatrix::Identity(m.rows(), m.cols()));
    if (dev > tol::kUnitary) {
      throw std::invalid_argument("matrix not unitary (deviation " +
                                  std::to_string(dev) + ")");
    }
    return UnitaryOp(std::move(m));
  }

  static UnitaryOp identity(int n_qubits) {
    const Eigen::Index dim = Eigen::Index{1} << n_qubits;
    detail::qubits_for_dim(dim);
    return UnitaryOp(CMatrix::Identity(dim, dim));
  }

  const CMatrix& matrix() const { return m_; }
  Eigen::Index dim() const { return m_.rows(); }
  int qubits() const { return detail::qubits_for_dim(m_.rows()); }
  Complex operator()(Eigen::Index r, Eigen::Index c) const { return m_(r, c); }

  UnitaryOp operator*(const UnitaryOp& rhs) const {
    if (rhs.dim() != dim()) throw std::invalid_argument("dimension mismatch");
    return UnitaryOp(m_ * rhs.m_);
  }
  UnitaryOp adjoint() const { return UnitaryOp(m_.adjoint()); }

  PureState apply(const PureState& psi) const {
    if (psi.dim() != dim()) throw std::invalid_argument("dimension mismatch");
    return PureState::from_amplitudes(m_ * psi.amplitudes());
  }
  DensityMatrix apply(const DensityMatrix& rho) const {
    if (rho.dim() != dim()) throw std::invalid_argument("dimension mismatch");
    return DensityMatrix::from_unnormalized(m_ * rho.matrix() * m_.adjoint());
  }

 private:
  explicit UnitaryOp(CMatrix m) : m_(std::move(m)) {}
  CMatrix m_;
};

/// Equality of operators up to a global phase.
inline bool equal_up_to_phase(const CMatrix& a, const CMatrix& b,
                              double tolerance = 1e-10) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  Eigen::Index r = 0, c = 0;
  b.cwiseAbs().maxCoeff(&r, &c);
  if (std::abs(b(r, c)) == 0.0) return detail::max_abs(a) <= tolerance;
  const Complex ratio = a(r, c) / b(r, c);
  if (std::abs(std::abs(ratio) - 1.0) > tolerance) return false;
  return detail::max_abs(a - ratio * b) <= tolerance;
}

/// A completely positive map given by Kraus operators. Trace-decreasing maps
/// model photon loss that is later post-selected away.
class KrausChannel {
 public:
  KrausChannel(std::vector<CMatrix> kraus_ops, bool trace_preserving)
      : ops_(std::move(kraus_ops)), trace_preserving_(trace_preserving) {
    if (ops_.empty()) throw std::invalid_argument("channel needs Kraus operators");
    const Eigen::Index dim = ops_.front().cols();
    detail::qubits_for_dim(dim);
    CMatrix completeness = CMatrix::Zero(dim, dim);
    for (const auto& k : ops_) {
      if (k.rows() != dim || k.cols() != dim) {
        throw std::invalid_argument("Kraus operators differ in dimension");
      }
      completeness += k.adjoint() * k;
    }
    const CMatrix slack = CMatrix::Identity(dim, dim) - completeness;
    if (trace_preserving_) {
      if (detail::max_abs(slack) > tol::kKraus) {
        throw std::invalid_argument("Kraus operators are not trace preserving");
      }
    } else if (detail::hermitian_eigenvalues(slack).minCoeff() < -tol::kKraus) {
      throw std::invalid_argument("Kraus operators exceed the identity");
    }
  }

  static KrausChannel identity(int n_qubits) {
    const Eigen::Index dim = Eigen::Index{1} << n_qubits;
    return KrausChannel({CMatrix::Identity(dim, dim)}, true);
  }

  static KrausChannel from_unitary(const UnitaryOp& u) {
    return KrausChannel({u.matrix()}, true);
  }

  const std::vector<CMatrix>& ops() const { return ops_; }
  bool trace_preserving() const { return trace_preserving_; }
  Eigen::Index dim() const { return ops_.front().rows(); }
  int qubits() const { return detail::qubits_for_dim(dim()); }

  /// Unnormalized action: sum_k K rho K^dagger.
  CMatrix act(const CMatrix& rho) const {
    if (rho.rows() != dim()) throw std::invalid_argument("dimension mismatch");
    CMatrix out = CMatrix::Zero(dim(), dim());
    for (const auto& k : ops_) out.noalias() += k * rho * k.adjoint();
    return out;
  }

  /// `second` after `this`.
  KrausChannel then(const KrausChannel& second) const {
    if (second.dim() != dim()) throw std::invalid_argument("dimension mismatch");
    std::vector<CMatrix> out;
    out.reserve(ops_.size() * second.ops_.size());
    for (const auto& b : second.ops_) {
      for (const auto& a : ops_) out.push_back(b * a);
    }
    return KrausChannel(std::move(out), trace_preserving_ && second.trace_preserving_);
  }

  /// Convex mixture: weight * this + (1 - weight) * other.
  KrausChannel mix(const KrausChannel& other, double weight) const {
    if (other.dim() != dim()) throw std::invalid_argument("dimension mismatch");
    if (weight < 0.0 || weight > 1.0) throw std::invalid_argument("weight outside [0,1]");
    std::vector<CMatrix> out;
    for (const auto& k : ops_) out.push_back(std::sqrt(weight) * k);
    for (const auto& k : other.ops_) out.push_back(std::sqrt(1.0 - weight) * k);
    return KrausChannel(std::move(out), trace_preserving_ && other.trace_preserving_);
  }

 private:
  std::vector<CMatrix> ops_;
  bool trace_preserving_;
};

// ---------------------------------------------------------------------------
// Named states

namespace states {

inline PureState up() { return PureState::basis(1, 0); }
inline PureState down() { return PureState::basis(1, 1); }
inline PureState up_x() { return PureState::from_amplitudes(CVector{{1.0, 1.0}}); }
inline PureState down_x() { return PureState::from_amplitudes(CVector{{1.0, -1.0}}); }
inline PureState up_y() {
  return PureState::from_amplitudes(CVector{{Complex{1.0}, Complex{0.0, 1.0}}});
}
inline PureState down_y() {
  return PureState::from_amplitudes(CVector{{Complex{1.0}, Complex{0.0, -1.0}}});
}

}  // namespace states

// ---------------------------------------------------------------------------
// Operations

inline PureState tensor(const PureState& a, const PureState& b) {
  if (a.qubits() + b.qubits() > kMaxQubits) {
    throw std::invalid_argument("tensor product exceeds the three-qubit limit");
  }
  CVector out(a.dim() * b.dim());
  for (Eigen::Index i = 0; i < a.dim(); ++i) {
    out.segment(i * b.dim(), b.dim()) = a[i] * b.amplitudes();
  }
  return PureState::from_amplitudes(std::move(out));
}

inline CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

inline DensityMatrix tensor(const DensityMatrix& a, const DensityMatrix& b) {
  if (a.qubits() + b.qubits() > kMaxQubits) {
    throw std::invalid_argument("tensor product exceeds the three-qubit limit");
  }
  return DensityMatrix::from_matrix(kron(a.matrix(), b.matrix()));
}

inline UnitaryOp tensor(const UnitaryOp& a, const UnitaryOp& b) {
  if (a.qubits() + b.qubits() > kMaxQubits) {
    throw std::invalid_argument("tensor product exceeds the three-qubit limit");
  }
  return UnitaryOp::from_matrix(kron(a.matrix(), b.matrix()));
}

/// Tensor product of several pure states, in order.
inline PureState tensor(std::initializer_list<PureState> factors) {
  if (factors.size() == 0) throw std::invalid_argument("empty tensor product");
  auto it = factors.begin();
  PureState out = *it++;
  for (; it != factors.end(); ++it) out = tensor(out, *it);
  return out;
}

/// Embeds `op`, acting on `targets` (first target = most significant), into
/// the n-qubit space as op (x) identity on the remaining qubits.
inline CMatrix lift(const CMatrix& op, std::span<const int> targets, int n_qubits) {
  const int k = static_cast<int>(targets.size());
  if (op.rows() != (Eigen::Index{1} << k) || op.cols() != op.rows()) {
    throw std::invalid_argument("operator size does not match target count");
  }
  std::uint32_t target_mask = 0;
  for (int t : targets) {
    if (t < 0 || t >= n_qubits) throw std::out_of_range("target qubit index");
    const std::uint32_t bit = 1u << (n_qubits - 1 - t);
    if (target_mask & bit) throw std::invalid_argument("repeated target qubit");
    target_mask |= bit;
  }
  const std::uint32_t dim = 1u << n_qubits;
  auto sub_index = [&](std::uint32_t full) {
    std::uint32_t s = 0;
    for (int t : targets) s = (s << 1) | static_cast<std::uint32_t>(detail::bit_of(full, t, n_qubits));
    return s;
  };
  CMatrix out = CMatrix::Zero(dim, dim);
  for (std::uint32_t r = 0; r < dim; ++r) {
    for (std::uint32_t c = 0; c < dim; ++c) {
      if ((r & ~target_mask) != (c & ~target_mask)) continue;
      out(r, c) = op(sub_index(r), sub_index(c));
    }
  }
  return out;
}

inline CMatrix lift(const CMatrix& op, std::initializer_list<int> targets, int n_qubits) {
  return lift(op, std::span<const int>(targets.begin(), targets.size()), n_qubits);
}

inline KrausChannel lift(const KrausChannel& ch, std::span<const int> targets, int n_qubits) {
  std::vector<CMatrix> ops;
  ops.reserve(ch.ops().size());
  for (const auto& k : ch.ops()) ops.push_back(lift(k, targets, n_qubits));
  return KrausChannel(std::move(ops), ch.trace_preserving());
}

inline KrausChannel lift(const KrausChannel& ch, std::initializer_list<int> targets,
                         int n_qubits) {
  return lift(ch, std::span<const int>(targets.begin(), targets.size()), n_qubits);
}

/// Partial trace over an arbitrary (unnormalized) operator, keeping `keep` in
/// ascending qubit order.
inline CMatrix partial_trace(const CMatrix& rho, std::span<const int> keep) {
  const int n = detail::qubits_for_dim(rho.rows());
  if (keep.empty()) throw std::invalid_argument("partial trace needs a non-empty keep set");
  std::vector<int> kept(keep.begin(), keep.end());
  std::sort(kept.begin(), kept.end());
  if (std::adjacent_find(kept.begin(), kept.end()) != kept.end()) {
    throw std::invalid_argument("repeated qubit in keep set");
  }
  for (int q : kept) {
    if (q < 0 || q >= n) throw std::out_of_range("qubit index in keep set");
  }
  const int k = static_cast<int>(kept.size());
  const std::uint32_t dim = 1u << n;
  auto split = [&](std::uint32_t full, std::uint32_t& kept_idx, std::uint32_t& rest_idx) {
    kept_idx = 0;
    rest_idx = 0;
    for (int q = 0; q < n; ++q) {
      const auto b = static_cast<std::uint32_t>(detail::bit_of(full, q, n));
      if (std::binary_search(kept.begin(), kept.end(), q)) {
        kept_idx = (kept_idx << 1) | b;
      } else {
        rest_idx = (rest_idx << 1) | b;
      }
    }
  };
  CMatrix out = CMatrix::Zero(Eigen::Index{1} << k, Eigen::Index{1} << k);
  for (std::uint32_t r = 0; r < dim; ++r) {
    std::uint32_t rk = 0, rr = 0;
    split(r, rk, rr);
    for (std::uint32_t c = 0; c < dim; ++c) {
      std::uint32_t ck = 0, cr = 0;
      split(c, ck, cr);
      if (rr == cr) out(rk, ck) += rho(r, c);
    }
  }
  return out;
}

inline DensityMatrix partial_trace(const DensityMatrix& rho, std::span<const int> keep) {
  return DensityMatrix::from_unnormalized(partial_trace(rho.matrix(), keep));
}

inline DensityMatrix partial_trace(const DensityMatrix& rho, std::initializer_list<int> keep) {
  return partial_trace(rho, std::span<const int>(keep.begin(), keep.size()));
}

template <typename State>
struct Projection {
  std::optional<State> state;  // empty when the outcome has zero probability
  double probability = 0.0;

  bool empty() const { return !state.has_value(); }
};

namespace detail {

inline CMatrix checked_projector(const CMatrix& projector) {
  if (projector.rows() != 2 || projector.cols() != 2) {
    throw std::invalid_argument("projector must act on a single qubit");
  }
  if (max_abs(projector - projector.adjoint()) > tol::kIdempotent ||
      max_abs(projector * projector - projector) > tol::kIdempotent) {
    throw std::invalid_argument("projector is not a Hermitian idempotent");
  }
  return projector;
}

}  // namespace detail

/// Projects `subsystem` of a pure state; returns the renormalized state and
/// the Born weight.
inline Projection<PureState> project_and_renormalize(const PureState& psi,
                                                     const CMatrix& projector,
                                                     int subsystem) {
  const int n = psi.qubits();
  const CMatrix p = lift(detail::checked_projector(projector), {subsystem}, n);
  CVector v = p * psi.amplitudes();
  const double prob = v.squaredNorm();
  if (prob <= tol::kZeroProbability) return {std::nullopt, 0.0};
  return {PureState::from_amplitudes(std::move(v)), prob};
}

inline Projection<DensityMatrix> project_and_renormalize(const DensityMatrix& rho,
                                                         const CMatrix& projector,
                                                         int subsystem) {
  const int n = rho.qubits();
  const CMatrix p = lift(detail::checked_projector(projector), {subsystem}, n);
  const CMatrix out = p * rho.matrix() * p;
  const double prob = out.trace().real();
  if (prob <= tol::kZeroProbability) return {std::nullopt, 0.0};
  return {DensityMatrix::from_unnormalized(out), prob};
}

inline CMatrix projector_onto(const PureState& psi) {
  return psi.amplitudes() * psi.amplitudes().adjoint();
}

namespace pauli {

inline CMatrix I() { return CMatrix::Identity(2, 2); }
inline CMatrix X() { return CMatrix{{0.0, 1.0}, {1.0, 0.0}}; }
inline CMatrix Y() {
  return CMatrix{{Complex{0.0}, Complex{0.0, -1.0}}, {Complex{0.0, 1.0}, Complex{0.0}}};
}
inline CMatrix Z() { return CMatrix{{1.0, 0.0}, {0.0, -1.0}}; }
inline CMatrix H() { return CMatrix{{1.0, 1.0}, {1.0, -1.0}} / std::numbers::sqrt2; }

}  // namespace pauli

/// R(theta, phi) = exp(-i theta/2 (cos(phi) X + sin(phi) Y)).
inline UnitaryOp rotation(double theta, double phi) {
  const double c = std::cos(theta / 2.0);
  const double s = std::sin(theta / 2.0);
  const Complex minus_i{0.0, -1.0};
  CMatrix m(2, 2);
  m(0, 0) = c;
  m(0, 1) = minus_i * s * std::polar(1.0, -phi);
  m(1, 0) = minus_i * s * std::polar(1.0, phi);
  m(1, 1) = c;
  return UnitaryOp::from_matrix(std::move(m));
}

inline double fidelity_pure(const DensityMatrix& rho, const PureState& target) {
  if (rho.dim() != target.dim()) throw std::invalid_argument("dimension mismatch");
  const Complex f = target.amplitudes().dot(rho.matrix() * target.amplitudes());
  return std::clamp(f.real(), 0.0, 1.0);
}

struct PhaseFidelity {
  double phi = 0.0;       // radians, in (-pi, pi]
  double fidelity = 0.0;
};

/// Maximizes <psi(phi)|rho|psi(phi)> for psi(phi) = (|u> + e^{-i phi}|v>)/sqrt2.
/// F(phi) = (rho_uu + rho_vv)/2 + Re(e^{-i phi} rho_uv), so the maximum sits at
/// phi = arg(rho_uv).
inline PhaseFidelity optimal_phase_fidelity(const DensityMatrix& rho, const PureState& u,
                                            const PureState& v) {
  if (u.dim() != rho.dim() || v.dim() != rho.dim()) {
    throw std::invalid_argument("dimension mismatch");
  }
  if (std::abs(u.amplitudes().dot(v.amplitudes())) > 1e-10) {
    throw std::invalid_argument("u and v are not orthogonal");
  }
  const CMatrix& m = rho.matrix();
  const double rho_uu = u.amplitudes().dot(m * u.amplitudes()).real();
  const double rho_vv = v.amplitudes().dot(m * v.amplitudes()).real();
  const Complex rho_uv = u.amplitudes().dot(m * v.amplitudes());
  PhaseFidelity out;
  out.phi = std::abs(rho_uv) < tol::kCoherenceTie ? 0.0 : std::arg(rho_uv);
  out.fidelity = std::clamp(0.5 * (rho_uu + rho_vv) + std::abs(rho_uv), 0.0, 1.0);
  return out;
}

/// (|u> + e^{-i phi}|v>)/sqrt2.
inline PureState phased_superposition(const PureState& u, const PureState& v, double phi) {
  return PureState::from_amplitudes(u.amplitudes() + std::polar(1.0, -phi) * v.amplitudes());
}

struct ChannelResult {
  DensityMatrix rho;
  double success_probability;
};

inline ChannelResult apply_channel(const DensityMatrix& rho, const KrausChannel& ch) {
  if (rho.dim() != ch.dim()) throw std::invalid_argument("dimension mismatch");
  const CMatrix out = ch.act(rho.matrix());
  const double tr = out.trace().real();
  if (!(tr > tol::kZeroProbability)) {
    throw PostSelectionFailure("channel output has zero trace");
  }
  return {DensityMatrix::from_unnormalized(out), ch.trace_preserving() ? 1.0 : tr};
}

inline double trace_distance(const CMatrix& a, const CMatrix& b) {
  return 0.5 * detail::hermitian_eigenvalues(a - b).cwiseAbs().sum();
}

inline double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
  return trace_distance(a.matrix(), b.matrix());
}

/// Channel on the principal system obtained by coupling it to an ancilla
/// prepared in `ancilla`, applying `joint` (system qubits first) and tracing
/// the ancilla out. Kraus operators are K_j = (I (x) <j|) U (I (x) |a>).
inline KrausChannel ancilla_channel(const UnitaryOp& joint, const PureState& ancilla) {
  const Eigen::Index da = ancilla.dim();
  const Eigen::Index ds = joint.dim() / da;
  if (ds * da != joint.dim()) throw std::invalid_argument("ancilla does not fit");
  std::vector<CMatrix> ops;
  for (Eigen::Index j = 0; j < da; ++j) {
    CMatrix k = CMatrix::Zero(ds, ds);
    for (Eigen::Index r = 0; r < ds; ++r) {
      for (Eigen::Index c = 0; c < ds; ++c) {
        Complex acc{0.0};
        for (Eigen::Index a = 0; a < da; ++a) {
          acc += joint(r * da + j, c * da + a) * ancilla[a];
        }
        k(r, c) = acc;
      }
    }
    ops.push_back(std::move(k));
  }
  return KrausChannel(std::move(ops), true);
}

// ---------------------------------------------------------------------------
// Target states of the gate protocols. Photons are written in the x basis.

namespace targets {

/// (|up, up_x> + |down, down_x>)/sqrt2
inline PureState phi_plus_ap() {
  return PureState::from_amplitudes(tensor(states::up(), states::up_x()).amplitudes() +
                                    tensor(states::down(), states::down_x()).amplitudes());
}

/// (|up, up_x, up_x> - |down, down_x, down_x>)/sqrt2
inline PureState ghz() {
  return PureState::from_amplitudes(
      tensor({states::up(), states::up_x(), states::up_x()}).amplitudes() -
      tensor({states::down(), states::down_x(), states::down_x()}).amplitudes());
}

/// (|up_x, up_x> + |down_x, down_x>)/sqrt2
inline PureState phi_plus_pp() {
  return PureState::from_amplitudes(tensor(states::up_x(), states::up_x()).amplitudes() +
                                    tensor(states::down_x(), states::down_x()).amplitudes());
}

/// (|up_x, up_x> - |down_x, down_x>)/sqrt2
inline PureState phi_minus_pp() {
  return PureState::from_amplitudes(tensor(states::up_x(), states::up_x()).amplitudes() -
                                    tensor(states::down_x(), states::down_x()).amplitudes());
}

}  // namespace targets

}  // namespace apgate

#endif  // APGATE_QLIN_HPP

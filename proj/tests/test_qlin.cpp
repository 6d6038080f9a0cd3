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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "apgate/qlin.hpp"
#include "apgate/qlin_json.hpp"
#include "apgate/numerics.hpp"

namespace apgate {
namespace {

constexpr double kPi = std::numbers::pi;
const double kRt2 = std::sqrt(2.0);

CMatrix projector(const PureState& s) { return s.amplitudes() * s.amplitudes().adjoint(); }

DensityMatrix random_density(int n, Rng& rng) {
  std::normal_distribution<double> g;
  const Eigen::Index d = Eigen::Index{1} << n;
  CMatrix a(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) a(i, j) = Complex{g(rng), g(rng)};
  return DensityMatrix::from_unnormalized(a * a.adjoint());
}

PureState bell_phi_plus() {
  return PureState::from_amplitudes(CVector{{1.0, 0.0, 0.0, 1.0}});
}

// --- tensor ---------------------------------------------------------------

TEST(Tensor, UpDownIsBasisVectorOne) {
  const PureState s = tensor(states::up(), states::down());
  ASSERT_EQ(s.dim(), 4);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(std::abs(s[i] - Complex(i == 1 ? 1.0 : 0.0)), 0.0, 1e-15);
}

TEST(Tensor, IdentityTimesIdentity) {
  const UnitaryOp i4 = tensor(UnitaryOp::identity(1), UnitaryOp::identity(1));
  EXPECT_LT(detail::max_abs(i4.matrix() - CMatrix::Identity(4, 4)), 1e-15);
}

TEST(Tensor, XStatesExpandByHand) {
  const PureState s = tensor(states::up_x(), states::down_x());
  const double expect[4] = {0.5, -0.5, 0.5, -0.5};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(std::abs(s[i] - Complex(expect[i])), 0.0, 1e-15);
}

TEST(Tensor, RejectsMoreThanThreeQubits) {
  const PureState three = tensor({states::up(), states::up(), states::up()});
  EXPECT_THROW(tensor(three, states::up()), std::invalid_argument);
}

TEST(Tensor, Associative) {
  Rng rng(3);
  const DensityMatrix a = random_density(1, rng), b = random_density(1, rng), c = random_density(1, rng);
  const CMatrix left = tensor(tensor(a, b), c).matrix();
  const CMatrix right = tensor(a, tensor(b, c)).matrix();
  EXPECT_LT(detail::max_abs(left - right), 1e-12);
}

// --- invariants -----------------------------------------------------------

TEST(PureState, NormalizesOnConstruction) {
  const PureState s = PureState::from_amplitudes(CVector{{3.0, Complex(0.0, 4.0)}});
  EXPECT_NEAR(s.amplitudes().squaredNorm(), 1.0, 1e-12);
}

TEST(PureState, RejectsZeroAndNonPowerOfTwo) {
  EXPECT_THROW(PureState::from_amplitudes(CVector::Zero(2)), std::invalid_argument);
  EXPECT_THROW(PureState::from_amplitudes(CVector::Ones(3)), std::invalid_argument);
}

TEST(DensityMatrix, RejectsUnphysicalInput) {
  CMatrix not_hermitian{{0.5, 0.3}, {0.0, 0.5}};
  EXPECT_THROW(DensityMatrix::from_matrix(not_hermitian), std::invalid_argument);
  CMatrix bad_trace{{0.7, 0.0}, {0.0, 0.7}};
  EXPECT_THROW(DensityMatrix::from_matrix(bad_trace), std::invalid_argument);
  CMatrix negative{{1.2, 0.0}, {0.0, -0.2}};
  EXPECT_THROW(DensityMatrix::from_matrix(negative), std::invalid_argument);
}

TEST(UnitaryOp, RejectsNonUnitary) {
  EXPECT_THROW(UnitaryOp::from_matrix(CMatrix{{1.0, 1.0}, {0.0, 1.0}}), std::invalid_argument);
}

TEST(KrausChannel, CompletenessChecked) {
  EXPECT_THROW(KrausChannel({pauli::I(), pauli::X()}, false), std::invalid_argument);
  EXPECT_THROW(KrausChannel({std::sqrt(0.5) * pauli::I()}, true), std::invalid_argument);
  EXPECT_NO_THROW(KrausChannel({std::sqrt(0.5) * pauli::I()}, false));
}

// --- partial trace ----------------------------------------------------------

TEST(PartialTrace, BellMarginalIsMaximallyMixed) {
  const auto rho = DensityMatrix::from_pure(bell_phi_plus());
  const auto atom = partial_trace(rho, {0});
  EXPECT_LT(detail::max_abs(atom.matrix() - 0.5 * CMatrix::Identity(2, 2)), 1e-15);
}

TEST(PartialTrace, KeepAllIsIdentityMap) {
  Rng rng(5);
  const auto rho = random_density(2, rng);
  EXPECT_LT(detail::max_abs(partial_trace(rho, {0, 1}).matrix() - rho.matrix()), 1e-15);
}

TEST(PartialTrace, TraceAtomOutOfProductByBlockSum) {
  Rng rng(7);
  const auto sigma = random_density(1, rng);
  const auto rho = tensor(DensityMatrix::from_pure(states::up()), sigma);
  // Oracle: sum of the diagonal 2x2 blocks of the 4x4 matrix.
  const CMatrix& m = rho.matrix();
  const CMatrix oracle = m.block(0, 0, 2, 2) + m.block(2, 2, 2, 2);
  EXPECT_LT(detail::max_abs(partial_trace(rho, {1}).matrix() - oracle), 1e-15);
  EXPECT_LT(detail::max_abs(oracle - sigma.matrix()), 1e-15);
}

TEST(PartialTrace, RecoversFactorsOfRandomProducts) {
  Rng rng(11);
  for (int k = 0; k < 20; ++k) {
    const auto a = random_density(1, rng), b = random_density(2, rng);
    const auto ab = tensor(a, b);
    EXPECT_LT(detail::max_abs(partial_trace(ab, {0}).matrix() - a.matrix()), 1e-12);
    EXPECT_LT(detail::max_abs(partial_trace(ab, {1, 2}).matrix() - b.matrix()), 1e-12);
  }
}

TEST(PartialTrace, EmptyKeepRejected) {
  const auto rho = DensityMatrix::maximally_mixed(2);
  EXPECT_THROW(partial_trace(rho, std::span<const int>{}), std::invalid_argument);
}

// --- projection -----------------------------------------------------------

TEST(Projection, BellOntoAtomUp) {
  const PureState phi = PureState::from_amplitudes(tensor(states::up(), states::up_x()).amplitudes() +
                                                   tensor(states::down(), states::down_x()).amplitudes());
  const auto r = project_and_renormalize(phi, projector(states::up()), 0);
  ASSERT_FALSE(r.empty());
  EXPECT_NEAR(r.probability, 0.5, 1e-12);
  EXPECT_TRUE(equal_up_to_phase(*r.state, tensor(states::up(), states::up_x())));
}

TEST(Projection, ZeroProbabilityIsEmpty) {
  const auto r = project_and_renormalize(states::up(), projector(states::down()), 0);
  EXPECT_TRUE(r.empty());
  EXPECT_EQ(r.probability, 0.0);
}

TEST(Projection, NonIdempotentRejected) {
  EXPECT_THROW(project_and_renormalize(states::up(), 2.0 * projector(states::up()), 0),
               std::invalid_argument);
}

TEST(Projection, ErasedStateOntoAtomDown) {
  // Written out: (|up>(|up_x up_x> - |down_x down_x>) - |down>(|up_x up_x> + |down_x down_x>))/2.
  const CVector uu = tensor(states::up_x(), states::up_x()).amplitudes();
  const CVector dd = tensor(states::down_x(), states::down_x()).amplitudes();
  const CVector erased = (kron(states::up().amplitudes(), uu - dd) -
                          kron(states::down().amplitudes(), uu + dd)) / 2.0;
  const auto r = project_and_renormalize(PureState::from_amplitudes(erased), projector(states::down()), 0);
  ASSERT_FALSE(r.empty());
  EXPECT_NEAR(r.probability, 0.5, 1e-12);
  const PureState expected = tensor(states::down(), targets::phi_plus_pp());
  EXPECT_NEAR(std::abs(r.state->amplitudes().dot(expected.amplitudes())), 1.0, 1e-12);
  // Sign: the projected state is -|Phi+>.
  EXPECT_NEAR(r.state->amplitudes().dot(expected.amplitudes()).real(), -1.0, 1e-12);
}

// --- rotations --------------------------------------------------------------

TEST(Rotation, ZeroAngleIsIdentity) {
  for (double phi : {0.0, 0.7, -2.0}) {
    EXPECT_LT(detail::max_abs(rotation(0.0, phi).matrix() - CMatrix::Identity(2, 2)), 1e-15);
  }
}

TEST(Rotation, TwoPiPulsesReturnUpToPhase) {
  const PureState s = rotation(kPi, 0.0).apply(rotation(kPi, 0.0).apply(states::up()));
  EXPECT_TRUE(equal_up_to_phase(s, states::up()));
}

TEST(Rotation, HalfPiFromUpByHand) {
  const PureState s = rotation(kPi / 2.0, 0.0).apply(states::up());
  EXPECT_NEAR(std::abs(s[0] - Complex(1.0 / kRt2, 0.0)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(s[1] - Complex(0.0, -1.0 / kRt2)), 0.0, 1e-15);
}

TEST(Rotation, MatchesMatrixExponentialSeries) {
  // Oracle: exp(-i a n.sigma) via truncated power series.
  for (double theta : {0.3, 1.1, 2.9}) {
    for (double phi : {0.0, 0.4, -1.3}) {
      const CMatrix gen = Complex(0.0, -theta / 2.0) * (std::cos(phi) * pauli::X() + std::sin(phi) * pauli::Y());
      CMatrix term = CMatrix::Identity(2, 2), sum = CMatrix::Identity(2, 2);
      for (int k = 1; k < 40; ++k) {
        term = term * gen / static_cast<double>(k);
        sum += term;
      }
      EXPECT_LT(detail::max_abs(rotation(theta, phi).matrix() - sum), 1e-13);
    }
  }
}

// --- fidelities -------------------------------------------------------------

TEST(Fidelity, Examples) {
  const PureState phi_p = bell_phi_plus();
  const PureState phi_m = PureState::from_amplitudes(CVector{{1.0, 0.0, 0.0, -1.0}});
  EXPECT_NEAR(fidelity_pure(DensityMatrix::from_pure(phi_p), phi_p), 1.0, 1e-12);
  EXPECT_NEAR(fidelity_pure(DensityMatrix::maximally_mixed(2), phi_p), 0.25, 1e-12);
  const CMatrix mix = 0.75 * projector(phi_p) + 0.25 * projector(phi_m);
  EXPECT_NEAR(fidelity_pure(DensityMatrix::from_matrix(mix), phi_p), 0.75, 1e-12);
}

TEST(Fidelity, GlobalPhaseInvariant) {
  Rng rng(13);
  const auto rho = random_density(2, rng);
  const PureState psi = PureState::from_amplitudes(CVector{{0.3, Complex(0.1, 0.5), 0.2, -0.7}});
  const PureState rotated = PureState::from_amplitudes(std::polar(1.0, 1.234) * psi.amplitudes());
  EXPECT_NEAR(fidelity_pure(rho, psi), fidelity_pure(rho, rotated), 1e-14);
}

TEST(OptimalPhase, Examples) {
  const PureState u = tensor(states::up(), states::up_x());
  const PureState v = tensor(states::down(), states::down_x());
  const auto bell = DensityMatrix::from_pure(phased_superposition(u, v, 0.0));
  const auto r0 = optimal_phase_fidelity(bell, u, v);
  EXPECT_NEAR(r0.phi, 0.0, 1e-12);
  EXPECT_NEAR(r0.fidelity, 1.0, 1e-12);

  const CMatrix no_coherence = 0.3 * projector(u) + 0.5 * projector(v) +
                               0.2 * projector(tensor(states::up(), states::down_x()));
  const auto r1 = optimal_phase_fidelity(DensityMatrix::from_matrix(no_coherence), u, v);
  EXPECT_EQ(r1.phi, 0.0);
  EXPECT_NEAR(r1.fidelity, 0.4, 1e-12);

  const auto r2 = optimal_phase_fidelity(DensityMatrix::from_pure(phased_superposition(u, v, 0.3)), u, v);
  EXPECT_NEAR(r2.phi, 0.3, 1e-12);
  EXPECT_NEAR(r2.fidelity, 1.0, 1e-12);
}

TEST(OptimalPhase, RejectsNonOrthogonalPair) {
  const auto rho = DensityMatrix::maximally_mixed(1);
  EXPECT_THROW(optimal_phase_fidelity(rho, states::up(), states::up_x()), std::invalid_argument);
}

TEST(OptimalPhase, ClosedFormMatchesGridScan) {
  Rng rng(17);
  const PureState u = tensor(states::up(), states::up_x());
  const PureState v = tensor(states::down(), states::down_x());
  constexpr int kGrid = 10000;
  for (int trial = 0; trial < 100; ++trial) {
    const auto rho = random_density(2, rng);
    const auto closed = optimal_phase_fidelity(rho, u, v);
    double best = -1.0, best_phi = 0.0;
    for (int k = 0; k < kGrid; ++k) {
      const double phi = -kPi + 2.0 * kPi * k / kGrid;
      const double f = fidelity_pure(rho, phased_superposition(u, v, phi));
      if (f > best) { best = f; best_phi = phi; }
    }
    // Refine the scan maximum with golden-section search on the bracket.
    double a = best_phi - 2.0 * kPi / kGrid, b = best_phi + 2.0 * kPi / kGrid;
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int it = 0; it < 80; ++it) {
      const double c = b - gr * (b - a), d = a + gr * (b - a);
      if (fidelity_pure(rho, phased_superposition(u, v, c)) > fidelity_pure(rho, phased_superposition(u, v, d))) b = d; else a = c;
    }
    const double refined = fidelity_pure(rho, phased_superposition(u, v, 0.5 * (a + b)));
    EXPECT_NEAR(closed.fidelity, refined, 1e-9);
    EXPECT_GE(closed.fidelity + 1e-12, best);
  }
}

// --- channels ---------------------------------------------------------------

TEST(ApplyChannel, Examples) {
  Rng rng(19);
  const auto rho = random_density(1, rng);
  const auto id = apply_channel(rho, KrausChannel::identity(1));
  EXPECT_LT(detail::max_abs(id.rho.matrix() - rho.matrix()), 1e-15);
  EXPECT_EQ(id.success_probability, 1.0);

  const KrausChannel dephase({projector(states::up()), projector(states::down())}, true);
  const auto d = apply_channel(DensityMatrix::from_pure(states::up_x()), dephase);
  EXPECT_LT(detail::max_abs(d.rho.matrix() - 0.5 * CMatrix::Identity(2, 2)), 1e-15);

  const auto lossy = apply_channel(rho, KrausChannel({std::sqrt(0.7) * pauli::I()}, false));
  EXPECT_NEAR(lossy.success_probability, 0.7, 1e-15);
  EXPECT_LT(detail::max_abs(lossy.rho.matrix() - rho.matrix()), 1e-14);
}

TEST(ApplyChannel, ZeroTraceSignalsPostSelectionFailure) {
  const KrausChannel kill({projector(states::down())}, false);
  EXPECT_THROW(apply_channel(DensityMatrix::from_pure(states::up()), kill), PostSelectionFailure);
}

TEST(ApplyChannel, TracePreservingKeepsPhysicality) {
  Rng rng(23);
  const KrausChannel dep({std::sqrt(0.7) * pauli::I(), std::sqrt(0.1) * pauli::X(),
                          std::sqrt(0.1) * pauli::Y(), std::sqrt(0.1) * pauli::Z()}, true);
  const KrausChannel two = lift(dep, {1}, 2);
  for (int k = 0; k < 50; ++k) {
    const auto rho = random_density(2, rng);
    const CMatrix out = two.act(rho.matrix());
    EXPECT_NEAR(out.trace().real(), 1.0, 1e-12);
    EXPECT_NO_THROW(DensityMatrix::from_matrix(out));
  }
}

TEST(AncillaChannel, GateWithDownXPhotonDephasesAtom) {
  CMatrix gate = CMatrix::Zero(4, 4);
  gate.diagonal() << 1.0, -1.0, -1.0, -1.0;
  const auto ch = ancilla_channel(UnitaryOp::from_matrix(gate), states::down_x());
  const CMatrix out = ch.act(projector(states::up_x()));
  EXPECT_LT(detail::max_abs(out - 0.5 * CMatrix::Identity(2, 2)), 1e-14);
}

// --- json -----------------------------------------------------------------

TEST(Json, DensityMatrixRoundTrip) {
  Rng rng(29);
  const auto rho = random_density(3, rng);
  const auto j = to_json(rho);
  EXPECT_EQ(j.at("dim").get<int>(), 8);
  const auto back = density_matrix_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_LT(detail::max_abs(back.matrix() - rho.matrix()), 1e-15);
}

TEST(Json, RejectsUnphysicalMatrix) {
  nlohmann::json j = to_json(DensityMatrix::maximally_mixed(1));
  j["re"][0][0] = 2.0;
  EXPECT_THROW(density_matrix_from_json(j), std::invalid_argument);
}

}  // namespace
}  // namespace apgate

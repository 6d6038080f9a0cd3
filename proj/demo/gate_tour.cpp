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

// A short walk through the library: reflection amplitudes, the truth table,
// and atom-photon entanglement with and without imperfections.

#include <complex>
#include <cstdio>
#include <numbers>

#include "apgate/cavity.hpp"
#include "apgate/protocols.hpp"

int main() {
  using namespace apgate;
  const cavity::CavityParams p;
  const auto ru = cavity::reflection_coefficient(p, false);
  const auto rc = cavity::reflection_coefficient(p, true);
  std::printf("r(uncoupled) = %+.4f%+.4fi   r(coupled) = %+.4f%+.4fi\n", ru.real(), ru.imag(),
              rc.real(), rc.imag());
  std::printf("phase contrast = %.4f pi\n",
              std::abs(std::arg(rc) - std::arg(ru)) / std::numbers::pi);

  protocols::RunOptions opt;
  opt.compute_errors = false;
  for (const auto& [name, cfg] : {std::pair{"ideal", protocols::ExperimentConfig::ideal()},
                                  std::pair{"lab", protocols::ExperimentConfig::paper()}}) {
    const auto tt = protocols::run_truth_table(cfg, opt);
    const auto bell = protocols::run_bell(cfg, opt);
    std::printf("%-5s  identity %.3f  flip %.3f  F(Phi+_ap) %.3f\n", name, tt.identity_probability,
                tt.flip_probability, bell.fidelity);
  }
  return 0;
}

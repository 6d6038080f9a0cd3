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

// apgate: command-line driver for the atom-photon gate simulator.
//
//   apgate bell --config config/paper.defaults.json --mode monte-carlo
//   apgate ghz --set imperfections.detuning_bias_khz=500 --output out/

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "apgate/cli.hpp"

namespace {

struct Flags {
  std::string config = apgate::bundled_config_path();
  std::optional<std::string> output;
  std::optional<std::string> mode;
  std::optional<std::uint64_t> trials;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::vector<std::string> overrides;
  bool no_csv = false;
  bool quiet = false;
};

int run(const std::string& sub, const Flags& f) {
  using namespace apgate;
  RunConfig cfg;
  try {
    std::vector<std::string> overrides = f.overrides;
    if (f.mode) overrides.push_back("mode=\"" + *f.mode + "\"");
    if (f.trials) overrides.push_back("trials=" + std::to_string(*f.trials));
    if (f.seed) overrides.push_back("seed=" + std::to_string(*f.seed));
    if (f.threads) overrides.push_back("threads=" + std::to_string(*f.threads));
    cfg = cli::load_config_with_overrides(f.config, overrides);
  } catch (const ConfigError& e) {
    std::cerr << cli::error_json("config", e.what(), e.path()) << "\n";
    return cli::kExitConfig;
  }
  try {
    const auto artifacts = cli::run_subcommand(sub, cfg);
    const auto dir = cli::resolve_output_dir(cfg, f.output);
    const auto files = cli::write_artifacts(sub, artifacts, dir, !f.no_csv);
    if (!f.quiet) {
      for (const auto& p : files) std::cout << p << "\n";
    }
    return cli::kExitOk;
  } catch (const protocols::StarvationError& e) {
    std::cerr << cli::error_json("starvation", e.what()) << "\n";
  } catch (const std::exception& e) {
    std::cerr << cli::error_json("runtime", e.what()) << "\n";
  }
  return cli::kExitRuntime;
}

const char* describe(const std::string& name) {
  static const std::map<std::string, const char*> text{
      {"truth-table", "CNOT truth table in the photon x basis"},
      {"bell", "atom-photon Bell state with tomography"},
      {"ghz", "atom-photon-photon GHZ state with tomography"},
      {"eraser", "photon-pair states conditioned on the rotated atom"},
      {"ramsey", "Ramsey fringe of the atomic rotations"},
      {"state-detection", "hyperfine state detection fidelity"},
      {"tomo-roundtrip", "tomography of random pure states"},
      {"loss-budget", "reflection losses from the cavity model"},
  };
  const auto it = text.find(name);
  return it == text.end() ? "" : it->second;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulator of a reflection-based atom-photon cavity-QED gate"};
  app.require_subcommand(1);
  Flags flags;
  std::string chosen;
  for (const auto& name : apgate::cli::subcommands()) {
    auto* sub = app.add_subcommand(name, describe(name));
    sub->add_option("-c,--config", flags.config, "JSON config file")->capture_default_str();
    sub->add_option("-o,--output", flags.output,
                    std::string("output directory (overrides $") + apgate::cli::kOutputDirEnv + ")");
    sub->add_option("--mode", flags.mode, "analytic or monte-carlo");
    sub->add_option("--trials", flags.trials, "attempts per setting");
    sub->add_option("--seed", flags.seed, "generator seed");
    sub->add_option("--threads", flags.threads, "worker threads");
    sub->add_option("--set", flags.overrides, "override a config field, e.g. imperfections.mode_overlap=0.9");
    sub->add_flag("--no-csv", flags.no_csv, "skip CSV tables");
    sub->add_flag("-q,--quiet", flags.quiet, "do not list written files");
    sub->callback([&chosen, name] { chosen = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : apgate::cli::kExitConfig;
  }
  return run(chosen, flags);
}

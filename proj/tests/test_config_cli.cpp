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

#include <filesystem>
#include <fstream>

#include "apgate/cli.hpp"
#include "apgate/qlin_json.hpp"
#include "support.hpp"

namespace apgate {
namespace {

namespace fs = std::filesystem;

nlohmann::json bundled_json() {
  return nlohmann::json::parse(testing::read_file(bundled_config_path()));
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("apgate-test-" + name);
  fs::remove_all(p);
  return p;
}

std::string cli() { return "\"" + testing::cli_path() + "\""; }

std::string quiet(const std::string& cmd) { return cmd + " -q 2>/dev/null"; }

std::string error_path(const nlohmann::json& doc) {
  try {
    config_from_json(doc);
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "";
}

TEST(Config, BundledProfileLoads) {
  const RunConfig cfg = load_config(bundled_config_path());
  const auto exp = cfg.experiment();
  EXPECT_NEAR(exp.cavity.g, 2.0 * std::numbers::pi * 6.7, 1e-12);
  EXPECT_NEAR(exp.cavity.kappa_in / exp.cavity.kappa, 95.0 / 103.0, 1e-15);
  auto paper = protocols::ExperimentConfig::paper();
  // The calibrated detection model is computed, the file holds its decimals.
  EXPECT_NEAR(exp.detection.mean_signal_photons, paper.detection.mean_signal_photons, 1e-12);
  EXPECT_NEAR(exp.detection.dark_prob, paper.detection.dark_prob, 1e-12);
  paper.detection = exp.detection;
  EXPECT_EQ(exp, paper);
  EXPECT_EQ(cfg.mode, protocols::Mode::analytic);
}

TEST(Config, MissingSeedNamesField) {
  auto doc = bundled_json();
  doc.erase("seed");
  EXPECT_EQ(error_path(doc), "seed");
}

TEST(Config, OutOfRangeProbabilityNamesField) {
  auto doc = bundled_json();
  doc["imperfections"]["mode_overlap"] = 1.3;
  EXPECT_EQ(error_path(doc), "imperfections.mode_overlap");
}

TEST(Config, UnknownKeyRejected) {
  auto doc = bundled_json();
  doc["cavity"]["g_mzh"] = 6.7;
  EXPECT_EQ(error_path(doc), "cavity.g_mzh");
  doc = bundled_json();
  doc["mode"] = "sampling";
  EXPECT_EQ(error_path(doc), "mode");
}

TEST(Config, WrongTypeRejected) {
  auto doc = bundled_json();
  doc["trials"] = "many";
  EXPECT_EQ(error_path(doc), "trials");
  EXPECT_THROW(parse_config("{ not json"), ConfigError);
}

TEST(Config, RoundTripPreservesEverything) {
  auto doc = bundled_json();
  doc["imperfections"]["detuning_bias_khz"] = 120.5;
  doc["mode"] = "monte-carlo";
  const RunConfig a = config_from_json(doc);
  const RunConfig b = parse_config(to_json(a).dump());
  EXPECT_EQ(a, b);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
}

TEST(Config, OverridesApplyDottedPaths) {
  auto doc = bundled_json();
  cli::apply_override(doc, "imperfections.mode_overlap=0.9");
  cli::apply_override(doc, "mode=monte-carlo");
  const RunConfig cfg = config_from_json(doc);
  EXPECT_DOUBLE_EQ(cfg.imperfections.mode_overlap, 0.9);
  EXPECT_EQ(cfg.mode, protocols::Mode::monte_carlo);
  EXPECT_THROW(cli::apply_override(doc, "no-equals-sign"), ConfigError);
}

TEST(Library, SameSeedSameJson) {
  RunConfig cfg = load_config(bundled_config_path());
  cfg.mode = protocols::Mode::monte_carlo;
  cfg.trials = 5000;
  cfg.tomography.mc_replicas = 5;
  const auto a = cli::run_subcommand("bell", cfg).result.dump(2);
  const auto b = cli::run_subcommand("bell", cfg).result.dump(2);
  EXPECT_EQ(a, b);
  cfg.threads = 3;
  EXPECT_EQ(cli::run_subcommand("bell", cfg).result.dump(2), a);
}

TEST(Library, EmittedDensityMatricesRevalidate) {
  RunConfig cfg = load_config(bundled_config_path());
  cfg.tomography.compute_errors = false;
  const auto bell = nlohmann::json::parse(cli::run_subcommand("bell", cfg).result.dump());
  const auto rho = density_matrix_from_json(bell["derived"]["rho"]);
  EXPECT_EQ(rho.qubits(), 2);
  const auto eraser = nlohmann::json::parse(cli::run_subcommand("eraser", cfg).result.dump());
  for (const char* k : {"phi_plus", "phi_minus"}) {
    EXPECT_NO_THROW(density_matrix_from_json(eraser["derived"][k]["rho"])) << k;
  }
}

TEST(Library, LossBudgetReportsModelAndCalibration) {
  const RunConfig cfg = load_config(bundled_config_path());
  const auto j = cli::run_subcommand("loss-budget", cfg).result;
  const auto& d = j.at("derived");
  EXPECT_NEAR(d["model"]["uncoupled"].get<double>(), 0.287, 0.001);
  EXPECT_NEAR(d["model"]["coupled"].get<double>(), 0.458, 0.001);
  EXPECT_DOUBLE_EQ(d["measured"]["uncoupled"].get<double>(), 0.30);
  EXPECT_DOUBLE_EQ(d["measured"]["coupled"].get<double>(), 0.34);
  EXPECT_TRUE(d["coupled_discrepancy"].get<bool>());
  EXPECT_TRUE(d["uncoupled_consistent"].get<bool>());
}

TEST(Library, OutputDirectoryPrecedence) {
  RunConfig cfg;
  cfg.output_dir = "from-config";
  ::unsetenv(cli::kOutputDirEnv);
  EXPECT_EQ(cli::resolve_output_dir(cfg, std::nullopt), "from-config");
  ::setenv(cli::kOutputDirEnv, "from-env", 1);
  EXPECT_EQ(cli::resolve_output_dir(cfg, std::nullopt), "from-env");
  EXPECT_EQ(cli::resolve_output_dir(cfg, std::string("from-flag")), "from-flag");
  ::unsetenv(cli::kOutputDirEnv);
}

class Process : public ::testing::Test {
 protected:
  void SetUp() override {
    if (testing::cli_path().empty() || !fs::exists(testing::cli_path())) {
      GTEST_SKIP() << "command-line tool not built";
    }
  }
};

TEST_F(Process, LossBudgetWritesJsonAndCsv) {
  const auto dir = fresh_dir("loss");
  EXPECT_EQ(testing::run_command(quiet(cli() + " loss-budget -o " + dir.string())), 0);
  const auto j = nlohmann::json::parse(testing::read_file((dir / "loss-budget.json").string()));
  EXPECT_EQ(j["label"], "loss-budget");
  EXPECT_TRUE(fs::exists(dir / "loss_budget.csv"));
}

TEST_F(Process, RepeatedRunsAreByteIdentical) {
  const auto a = fresh_dir("det-a"), b = fresh_dir("det-b");
  const std::string args = " bell --mode monte-carlo --trials 4000 --set tomography.mc_replicas=4 -o ";
  ASSERT_EQ(testing::run_command(quiet(cli() + args + a.string())), 0);
  ASSERT_EQ(testing::run_command(quiet(cli() + args + b.string())), 0);
  const auto ja = testing::read_file((a / "bell.json").string());
  EXPECT_FALSE(ja.empty());
  EXPECT_EQ(ja, testing::read_file((b / "bell.json").string()));
  EXPECT_EQ(testing::read_file((a / "bell_rho.csv").string()),
            testing::read_file((b / "bell_rho.csv").string()));
}

TEST_F(Process, ConfigErrorExitsWithTwo) {
  const auto dir = fresh_dir("bad");
  EXPECT_EQ(testing::run_command(quiet(cli() + " bell --set imperfections.mode_overlap=1.3 -o " +
                                       dir.string())),
            cli::kExitConfig);
  EXPECT_EQ(testing::run_command(quiet(cli() + " bell --config /nonexistent.json")), cli::kExitConfig);
  EXPECT_FALSE(fs::exists(dir / "bell.json"));
}

TEST_F(Process, StarvationExitsWithThree) {
  EXPECT_EQ(testing::run_command(quiet(cli() + " bell --mode monte-carlo --trials 1 -o " +
                                       fresh_dir("starve").string())),
            cli::kExitRuntime);
}

TEST_F(Process, EnvironmentChoosesOutputDirectory) {
  const auto dir = fresh_dir("env");
  const std::string cmd = std::string(cli::kOutputDirEnv) + "=" + dir.string() + " " + cli() +
                          " loss-budget";
  EXPECT_EQ(testing::run_command(quiet(cmd)), 0);
  EXPECT_TRUE(fs::exists(dir / "loss-budget.json"));
}

TEST_F(Process, BellAnalyticFidelityInModelWindow) {
  const auto dir = fresh_dir("bell");
  ASSERT_EQ(testing::run_command(quiet(cli() + " bell --set tomography.compute_errors=false -o " +
                                       dir.string())),
            0);
  const auto j = nlohmann::json::parse(testing::read_file((dir / "bell.json").string()));
  const double f = j["derived"]["fidelity"].get<double>();
  EXPECT_GE(f, 0.757);
  EXPECT_LE(f, 0.857);
  EXPECT_NO_THROW(density_matrix_from_json(j["derived"]["rho"]));
}

}  // namespace
}  // namespace apgate

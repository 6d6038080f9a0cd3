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

#ifndef APGATE_TESTS_SUPPORT_HPP
#define APGATE_TESTS_SUPPORT_HPP

// Helpers shared by the unit tests and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

namespace apgate::testing {

/// Largest |observed - expected| / sigma over one outcome distribution, with
/// the binomial sigma floored at one count so that empty cells with a tiny
/// expected probability do not produce infinite scores.
inline double max_z_score(const std::vector<double>& expected,
                          const std::vector<std::uint64_t>& counts) {
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  if (total == 0) return 0.0;
  const double n = static_cast<double>(total);
  double worst = 0.0;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const double p = expected[i];
    const double var = std::max(p * (1.0 - p), 1.0 / n) / n;
    worst = std::max(worst, std::abs(static_cast<double>(counts[i]) / n - p) / std::sqrt(var));
  }
  return worst;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Path of the command-line tool, injected by the build or the environment.
inline std::string cli_path() {
  if (const char* p = std::getenv("APGATE_CLI_PATH"); p && *p) return p;
#ifdef APGATE_CLI_PATH
  return APGATE_CLI_PATH;
#else
  return "";
#endif
}

/// Runs a shell command and returns its exit status (-1 if it did not exit).
inline int run_command(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  if (status == -1) return -1;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace apgate::testing

#endif  // APGATE_TESTS_SUPPORT_HPP

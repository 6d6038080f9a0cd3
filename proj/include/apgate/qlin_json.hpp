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

#ifndef APGATE_QLIN_JSON_HPP
#define APGATE_QLIN_JSON_HPP

// {"dim": d, "re": [[...]], "im": [[...]]}, row-major, d = matrix dimension.

#include "apgate/qlin.hpp"
#include "json.hpp"

namespace apgate {

inline nlohmann::json matrix_to_json(const CMatrix& m) {
  nlohmann::json re = nlohmann::json::array();
  nlohmann::json im = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json re_row = nlohmann::json::array();
    nlohmann::json im_row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      re_row.push_back(m(r, c).real());
      im_row.push_back(m(r, c).imag());
    }
    re.push_back(std::move(re_row));
    im.push_back(std::move(im_row));
  }
  return {{"dim", m.rows()}, {"re", std::move(re)}, {"im", std::move(im)}};
}

inline CMatrix matrix_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("dim") || !j.contains("re") || !j.contains("im")) {
    throw std::invalid_argument("density matrix JSON needs dim, re and im");
  }
  const auto dim = j.at("dim").get<Eigen::Index>();
  const auto& re = j.at("re");
  const auto& im = j.at("im");
  auto check_rows = [dim](const nlohmann::json& a, const char* name) {
    if (!a.is_array() || static_cast<Eigen::Index>(a.size()) != dim) {
      throw std::invalid_argument(std::string("'") + name + "' must have dim rows");
    }
    for (const auto& row : a) {
      if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != dim) {
        throw std::invalid_argument(std::string("'") + name + "' rows must have dim entries");
      }
    }
  };
  check_rows(re, "re");
  check_rows(im, "im");
  CMatrix m(dim, dim);
  for (Eigen::Index r = 0; r < dim; ++r) {
    for (Eigen::Index c = 0; c < dim; ++c) {
      m(r, c) = Complex{re[r][c].get<double>(), im[r][c].get<double>()};
    }
  }
  return m;
}

inline nlohmann::json to_json(const DensityMatrix& rho) { return matrix_to_json(rho.matrix()); }

/// Parses and validates physicality.
inline DensityMatrix density_matrix_from_json(const nlohmann::json& j) {
  return DensityMatrix::from_matrix(matrix_from_json(j));
}

}  // namespace apgate

#endif  // APGATE_QLIN_JSON_HPP

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

#ifndef APGATE_UNITS_HPP
#define APGATE_UNITS_HPP

// All rates and detunings are stored as angular frequencies in rad/us
// ("angular MHz", omega = 2 pi f with f in MHz). Times are in microseconds.
// Configuration files carry plain frequencies with the unit in the key name.

#include <numbers>

namespace apgate::units {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

constexpr double angular_from_mhz(double f_mhz) { return kTwoPi * f_mhz; }
constexpr double angular_from_khz(double f_khz) { return kTwoPi * f_khz * 1e-3; }
constexpr double angular_from_ghz(double f_ghz) { return kTwoPi * f_ghz * 1e3; }

constexpr double mhz_from_angular(double omega) { return omega / kTwoPi; }
constexpr double khz_from_angular(double omega) { return omega / kTwoPi * 1e3; }
constexpr double ghz_from_angular(double omega) { return omega / kTwoPi * 1e-3; }

}  // namespace apgate::units

#endif  // APGATE_UNITS_HPP

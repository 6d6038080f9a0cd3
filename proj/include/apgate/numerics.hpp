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

#ifndef APGATE_NUMERICS_HPP
#define APGATE_NUMERICS_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <numbers>
#include <random>
#include <stdexcept>
#include <thread>
#include <vector>

namespace apgate {

using Rng = std::mt19937_64;

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Nodes and weights for E[f(X)], X ~ N(mean, sigma^2), from Gauss-Hermite
/// quadrature (Golub-Welsch on the probabilists' Hermite recurrence).
inline QuadratureRule gaussian_quadrature(int n_nodes, double mean, double sigma) {
  if (n_nodes < 1) throw std::invalid_argument("quadrature needs at least one node");
  if (sigma < 0.0) throw std::invalid_argument("negative standard deviation");
  if (sigma == 0.0 || n_nodes == 1) return {{mean}, {1.0}};
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n_nodes, n_nodes);
  for (int k = 1; k < n_nodes; ++k) {
    jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  QuadratureRule rule;
  for (int k = 0; k < n_nodes; ++k) {
    const double v0 = es.eigenvectors()(0, k);
    rule.nodes.push_back(mean + sigma * es.eigenvalues()(k));
    rule.weights.push_back(v0 * v0);
  }
  return rule;
}

/// Independent generator for (seed, stream, block). Streams partition work by
/// purpose (setting, replica, ...) and blocks partition trials, so results do
/// not depend on how blocks are distributed over workers.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream, std::uint64_t block = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32)};
  return Rng(seq);
}

/// Runs fn(block) for block in [0, n_blocks) on up to `threads` workers and
/// returns the results in block order.
template <typename Fn>
auto run_blocks(std::size_t n_blocks, unsigned threads, Fn&& fn)
    -> std::vector<decltype(fn(std::size_t{}))> {
  using Result = decltype(fn(std::size_t{}));
  std::vector<Result> results(n_blocks);
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n_blocks)));
  if (threads <= 1) {
    for (std::size_t b = 0; b < n_blocks; ++b) results[b] = fn(b);
    return results;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t b = w; b < n_blocks; b += threads) results[b] = fn(b);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

/// Sample standard deviation (n - 1 denominator).
inline double sample_stddev(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

/// Multinomial draw by sequential conditional binomials.
inline std::vector<std::uint64_t> sample_multinomial(Rng& rng, std::uint64_t n,
                                                     const std::vector<double>& probs) {
  std::vector<std::uint64_t> out(probs.size(), 0);
  double remaining_mass = 1.0;
  std::uint64_t remaining = n;
  for (std::size_t i = 0; i + 1 < probs.size() && remaining > 0; ++i) {
    const double p = remaining_mass > 0.0 ? std::clamp(probs[i] / remaining_mass, 0.0, 1.0) : 0.0;
    std::binomial_distribution<std::uint64_t> bin(remaining, p);
    out[i] = bin(rng);
    remaining -= out[i];
    remaining_mass -= probs[i];
  }
  if (!probs.empty()) out.back() += remaining;
  return out;
}

/// Index drawn from a discrete distribution given by `probs` (sum ~ 1).
inline std::size_t sample_index(Rng& rng, const std::vector<double>& probs) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double x = u(rng);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (x < probs[i]) return i;
    x -= probs[i];
  }
  return probs.size() - 1;
}

}  // namespace apgate

#endif  // APGATE_NUMERICS_HPP

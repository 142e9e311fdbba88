// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "cfmimo/channel.hpp"
#include "cfmimo/metrics.hpp"

namespace cfmimo {

enum class WmmseInit { kScaledConjugate, kRandom };

struct WmmseOptions {
  std::size_t max_iters = 500;
  /// Stop once |SE_t - SE_{t-1}| <= tolerance * SE_{t-1}.
  double tolerance = 1e-5;
  /// Relative width at which the per-AP multiplier bisection stops.
  double bisection_tolerance = 1e-13;
  WmmseInit init = WmmseInit::kScaledConjugate;
  std::uint64_t seed = 0;  // only used by kRandom

  void validate() const;
};

struct WmmseResult {
  PrecoderTensor precoder;
  /// Sum SE of the initial point followed by one entry per iteration.
  std::vector<double> trace;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Block-coordinate WMMSE for sum-SE maximization under per-AP power
/// budgets. Each iteration updates the MMSE receivers u_k, the weights
/// w_k = 1 / MSE_k, then every AP's beams in turn (Gauss-Seidel) with its
/// own multiplier mu_j found by bisection (mu_j = 0 when the unconstrained
/// block solution already fits the budget).
WmmseResult wmmse_solve(const ChannelTensor& h, double p_max, double noise_power,
                        const WmmseOptions& options = {});

/// Maximum-ratio directions scaled so every AP spends exactly p_max.
PrecoderTensor scaled_conjugate_precoder(const ChannelTensor& h, double p_max);

}  // namespace cfmimo

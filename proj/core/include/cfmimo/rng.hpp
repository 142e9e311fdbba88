// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstdint>

namespace cfmimo {

/// Counter-based 64-bit generator. Output i of stream s under seed k is a
/// pure function of (k, s, i), so per-sample streams can be drawn in any
/// order or in parallel and still reproduce bit-for-bit.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (0, 1); safe as a log() argument.
  double uniform_open();
  /// Standard normal via Box-Muller (pairs are cached).
  double normal();
  /// Circularly-symmetric CN(0, 1).
  std::complex<double> complex_normal();

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t mix64(std::uint64_t x);

/// Derives an independent seed from (seed, salt); used to split one user seed
/// into scenario, fading and parameter-init streams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace cfmimo

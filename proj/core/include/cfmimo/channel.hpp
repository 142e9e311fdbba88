// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cfmimo/complex_linalg.hpp"

namespace cfmimo {

double dbm_to_mw(double dbm);
double db_to_linear(double db);
double linear_to_db(double lin);

enum class Correlation { kIdentity, kLocalScattering };

/// Cell-free deployment. Defaults follow the desk reproduction: 9 APs with
/// 8 antennas, 8 UEs, 1 km square, 1 W per AP, -94 dBm noise.
struct ScenarioConfig {
  std::size_t num_aps = 9;
  std::size_t num_ues = 8;
  std::size_t num_antennas = 8;
  double side_m = 1000.0;
  double p_max_mw = 1000.0;
  double noise_power_mw = 3.981071705534972e-10;  // -94 dBm
  double ap_height_offset_m = 10.0;
  Correlation correlation = Correlation::kIdentity;
  /// Angular standard deviation of the local-scattering model, degrees.
  double scattering_spread_deg = 10.0;

  void validate() const;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct Scenario {
  std::vector<Point2> ap_positions;
  std::vector<Point2> ue_positions;
  /// Linear large-scale fading, AP-major: beta[j * K + k].
  std::vector<double> beta;

  std::size_t num_aps() const { return ap_positions.size(); }
  std::size_t num_ues() const { return ue_positions.size(); }
  double beta_at(std::size_t ap, std::size_t ue) const { return beta[ap * num_ues() + ue]; }
};

/// -30.5 - 36.7 log10(d), d = sqrt(height_offset^2 + horizontal^2).
double large_scale_fading_db(double horizontal_m, double height_offset_m = 10.0);

Scenario generate_scenario(const ScenarioConfig& config, std::uint64_t seed);

/// Complex gains H[j, k, n] (AP, UE, antenna), row-major.
class ChannelTensor {
 public:
  ChannelTensor() = default;
  ChannelTensor(std::size_t aps, std::size_t ues, std::size_t antennas);
  ChannelTensor(std::size_t aps, std::size_t ues, std::size_t antennas,
                std::vector<cdouble> gains);

  std::size_t num_aps() const { return aps_; }
  std::size_t num_ues() const { return ues_; }
  std::size_t num_antennas() const { return antennas_; }
  std::size_t size() const { return gains_.size(); }

  cdouble& operator()(std::size_t j, std::size_t k, std::size_t n) {
    return gains_[(j * ues_ + k) * antennas_ + n];
  }
  cdouble operator()(std::size_t j, std::size_t k, std::size_t n) const {
    return gains_[(j * ues_ + k) * antennas_ + n];
  }
  /// h_{j,k} as a span of N antennas.
  std::span<const cdouble> link(std::size_t j, std::size_t k) const {
    return {gains_.data() + (j * ues_ + k) * antennas_, antennas_};
  }
  std::span<cdouble> link(std::size_t j, std::size_t k) {
    return {gains_.data() + (j * ues_ + k) * antennas_, antennas_};
  }

  std::span<const cdouble> gains() const { return gains_; }
  std::span<cdouble> gains() { return gains_; }

  bool all_finite() const;
  /// Rounds every component to the nearest float; datasets store float32.
  void round_to_float();

  friend bool operator==(const ChannelTensor&, const ChannelTensor&) = default;

 private:
  std::size_t aps_ = 0;
  std::size_t ues_ = 0;
  std::size_t antennas_ = 0;
  std::vector<cdouble> gains_;
};

/// Per-(AP, UE) square roots of the spatial correlation matrices. Empty
/// means identity correlation.
struct CorrelationSet {
  std::vector<ComplexMatrix> sqrt_r;  // AP-major, L*K entries

  bool identity() const { return sqrt_r.empty(); }
};

/// Local-scattering correlation of a half-wavelength ULA around the nominal
/// angle `angle_rad` with Gaussian angular spread `spread_rad`.
ComplexMatrix local_scattering_correlation(std::size_t antennas, double angle_rad,
                                           double spread_rad);

/// Builds sqrt(R_{j,k}) for the configured correlation model; throws
/// DomainError on a non-PSD matrix.
CorrelationSet build_correlation(const Scenario& scenario, const ScenarioConfig& config);

/// H_{j,k,:} = sqrt(beta_{j,k}) R_{j,k}^{1/2} g, g ~ CN(0, I). The draw is a
/// pure function of (seed, sample_index).
ChannelTensor sample_rayleigh(const Scenario& scenario, const ScenarioConfig& config,
                              const CorrelationSet& correlation, std::uint64_t seed,
                              std::uint64_t sample_index = 0);
ChannelTensor sample_rayleigh(const Scenario& scenario, const ScenarioConfig& config,
                              std::uint64_t seed, std::uint64_t sample_index = 0);

/// Single-transmitter Saleh-Valenzuela configuration for the precoding task.
/// `p_max` and `noise_power` carry the link budget of that task.
struct SVChannelConfig {
  std::size_t num_ues = 4;
  std::size_t num_antennas = 16;
  std::size_t n_clusters = 4;
  std::size_t n_rays = 5;
  double angular_spread_deg = 10.0;
  double p_max = 1.0;
  double noise_power = 0.1;

  void validate() const;
};

/// Normalized half-wavelength ULA steering vector, ||a|| = 1.
std::vector<cdouble> ula_steering(std::size_t antennas, double angle_rad);

/// K x Nt matrix; row k is h_k^T with E||h_k||^2 = Nt.
ComplexMatrix sample_sv(const SVChannelConfig& config, std::uint64_t seed,
                        std::uint64_t sample_index = 0);

/// Views a K x Nt single-transmitter channel as a 1 x K x Nt tensor.
ChannelTensor to_channel_tensor(const ComplexMatrix& k_by_nt);

}  // namespace cfmimo

// SPDX-License-Identifier: Apache-2.0
#include "cfmimo/channel.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "cfmimo/error.hpp"
#include "cfmimo/rng.hpp"

namespace cfmimo {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr std::uint64_t kScenarioStream = 0x5CE4A210ULL;
}  // namespace

double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }
double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

void ScenarioConfig::validate() const {
  if (num_aps < 1 || num_ues < 1 || num_antennas < 1) {
    throw ConfigError("scenario needs L, K, N >= 1");
  }
  if (!(side_m > 0.0)) throw ConfigError("scenario side length must be positive");
  if (!(p_max_mw > 0.0)) throw ConfigError("P_max must be positive");
  if (!(noise_power_mw > 0.0)) throw ConfigError("noise power must be positive");
  if (!(ap_height_offset_m >= 0.0)) throw ConfigError("AP height offset must be >= 0");
  if (correlation == Correlation::kLocalScattering && !(scattering_spread_deg > 0.0)) {
    throw ConfigError("local-scattering spread must be positive");
  }
}

void SVChannelConfig::validate() const {
  if (num_ues < 1 || num_antennas < 1) throw ConfigError("SV channel needs K, Nt >= 1");
  if (n_clusters < 1 || n_rays < 1) throw ConfigError("SV channel needs >= 1 cluster and ray");
  if (!(angular_spread_deg > 0.0)) throw ConfigError("SV angular spread must be positive");
  if (!(p_max > 0.0)) throw ConfigError("P_max must be positive");
  if (!(noise_power > 0.0)) throw ConfigError("noise power must be positive");
}

double large_scale_fading_db(double horizontal_m, double height_offset_m) {
  const double d = std::sqrt(height_offset_m * height_offset_m + horizontal_m * horizontal_m);
  return -30.5 - 36.7 * std::log10(d);
}

Scenario generate_scenario(const ScenarioConfig& config, std::uint64_t seed) {
  config.validate();
  CounterRng rng(seed, kScenarioStream);
  Scenario s;
  s.ap_positions.resize(config.num_aps);
  s.ue_positions.resize(config.num_ues);
  for (auto& p : s.ap_positions) {
    p.x = rng.uniform() * config.side_m;
    p.y = rng.uniform() * config.side_m;
  }
  for (auto& p : s.ue_positions) {
    p.x = rng.uniform() * config.side_m;
    p.y = rng.uniform() * config.side_m;
  }
  s.beta.resize(config.num_aps * config.num_ues);
  for (std::size_t j = 0; j < config.num_aps; ++j)
    for (std::size_t k = 0; k < config.num_ues; ++k) {
      const double dx = s.ap_positions[j].x - s.ue_positions[k].x;
      const double dy = s.ap_positions[j].y - s.ue_positions[k].y;
      const double db = large_scale_fading_db(std::hypot(dx, dy), config.ap_height_offset_m);
      s.beta[j * config.num_ues + k] = db_to_linear(db);
    }
  return s;
}

ChannelTensor::ChannelTensor(std::size_t aps, std::size_t ues, std::size_t antennas)
    : aps_(aps), ues_(ues), antennas_(antennas), gains_(aps * ues * antennas) {}

ChannelTensor::ChannelTensor(std::size_t aps, std::size_t ues, std::size_t antennas,
                             std::vector<cdouble> gains)
    : aps_(aps), ues_(ues), antennas_(antennas), gains_(std::move(gains)) {
  if (gains_.size() != aps * ues * antennas) {
    throw ShapeError("channel tensor " + std::to_string(aps) + "x" + std::to_string(ues) + "x" +
                     std::to_string(antennas) + " given " + std::to_string(gains_.size()) +
                     " gains");
  }
}

bool ChannelTensor::all_finite() const {
  for (auto z : gains_)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  return true;
}

void ChannelTensor::round_to_float() {
  // Flat pass over the interleaved parts. GCC 11 at -O3 drops the odd tail
  // element when this loop is written over std::complex values.
  double* p = reinterpret_cast<double*>(gains_.data());
  for (std::size_t i = 0; i < 2 * gains_.size(); ++i) p[i] = static_cast<double>(static_cast<float>(p[i]));
}

ComplexMatrix local_scattering_correlation(std::size_t antennas, double angle_rad,
                                           double spread_rad) {
  ComplexMatrix r(antennas, antennas);
  for (std::size_t m = 0; m < antennas; ++m)
    for (std::size_t l = 0; l < antennas; ++l) {
      const double dist = static_cast<double>(m) - static_cast<double>(l);
      const double phase = kPi * dist * std::sin(angle_rad);
      const double damp = std::exp(-0.5 * spread_rad * spread_rad *
                                   std::pow(kPi * dist * std::cos(angle_rad), 2));
      r(m, l) = std::polar(damp, phase);
    }
  return r;
}

CorrelationSet build_correlation(const Scenario& scenario, const ScenarioConfig& config) {
  CorrelationSet set;
  if (config.correlation == Correlation::kIdentity) return set;
  const double spread = config.scattering_spread_deg * kPi / 180.0;
  set.sqrt_r.reserve(scenario.num_aps() * scenario.num_ues());
  for (std::size_t j = 0; j < scenario.num_aps(); ++j)
    for (std::size_t k = 0; k < scenario.num_ues(); ++k) {
      const double angle = std::atan2(scenario.ue_positions[k].y - scenario.ap_positions[j].y,
                                      scenario.ue_positions[k].x - scenario.ap_positions[j].x);
      set.sqrt_r.push_back(
          hermitian_sqrt(local_scattering_correlation(config.num_antennas, angle, spread)));
    }
  return set;
}

ChannelTensor sample_rayleigh(const Scenario& scenario, const ScenarioConfig& config,
                              const CorrelationSet& correlation, std::uint64_t seed,
                              std::uint64_t sample_index) {
  const std::size_t L = scenario.num_aps(), K = scenario.num_ues(), N = config.num_antennas;
  if (L != config.num_aps || K != config.num_ues) {
    throw ShapeError("scenario has " + std::to_string(L) + " APs / " + std::to_string(K) +
                     " UEs but config says " + std::to_string(config.num_aps) + " / " +
                     std::to_string(config.num_ues));
  }
  if (!correlation.identity() && correlation.sqrt_r.size() != L * K) {
    throw ShapeError("correlation set does not cover every AP-UE pair");
  }
  CounterRng rng(seed, sample_index);
  ChannelTensor h(L, K, N);
  std::vector<cdouble> g(N);
  for (std::size_t j = 0; j < L; ++j)
    for (std::size_t k = 0; k < K; ++k) {
      const double amp = std::sqrt(scenario.beta_at(j, k));
      for (auto& z : g) z = rng.complex_normal();
      auto out = h.link(j, k);
      if (correlation.identity()) {
        for (std::size_t n = 0; n < N; ++n) out[n] = amp * g[n];
      } else {
        const auto& s = correlation.sqrt_r[j * K + k];
        for (std::size_t n = 0; n < N; ++n) {
          cdouble acc = 0.0;
          for (std::size_t m = 0; m < N; ++m) acc += s(n, m) * g[m];
          out[n] = amp * acc;
        }
      }
    }
  return h;
}

ChannelTensor sample_rayleigh(const Scenario& scenario, const ScenarioConfig& config,
                              std::uint64_t seed, std::uint64_t sample_index) {
  return sample_rayleigh(scenario, config, build_correlation(scenario, config), seed,
                         sample_index);
}

std::vector<cdouble> ula_steering(std::size_t antennas, double angle_rad) {
  std::vector<cdouble> a(antennas);
  const double norm = 1.0 / std::sqrt(static_cast<double>(antennas));
  for (std::size_t n = 0; n < antennas; ++n)
    a[n] = std::polar(norm, kPi * static_cast<double>(n) * std::sin(angle_rad));
  return a;
}

ComplexMatrix sample_sv(const SVChannelConfig& config, std::uint64_t seed,
                        std::uint64_t sample_index) {
  config.validate();
  CounterRng rng(seed, sample_index);
  const std::size_t K = config.num_ues, Nt = config.num_antennas;
  const double spread = config.angular_spread_deg * kPi / 180.0;
  const double laplace_scale = spread / std::numbers::sqrt2;
  const double gain = std::sqrt(static_cast<double>(Nt) /
                                static_cast<double>(config.n_clusters * config.n_rays));
  ComplexMatrix h(K, Nt);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t c = 0; c < config.n_clusters; ++c) {
      const double center = (rng.uniform() - 0.5) * kPi;
      for (std::size_t r = 0; r < config.n_rays; ++r) {
        const double u = rng.uniform_open() - 0.5;
        const double offset = -laplace_scale * std::copysign(1.0, u) * std::log(1.0 - 2.0 * std::abs(u));
        const cdouble alpha = rng.complex_normal();
        const auto a = ula_steering(Nt, center + offset);
        for (std::size_t n = 0; n < Nt; ++n) h(k, n) += gain * alpha * a[n];
      }
    }
  }
  return h;
}

ChannelTensor to_channel_tensor(const ComplexMatrix& k_by_nt) {
  return ChannelTensor(1, k_by_nt.rows(), k_by_nt.cols(),
                       std::vector<cdouble>(k_by_nt.entries().begin(), k_by_nt.entries().end()));
}

}  // namespace cfmimo

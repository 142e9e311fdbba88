// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cfmimo/channel.hpp"

namespace cfmimo {

/// Transmission tensor F[j, k, n]: AP j's beam towards UE k on antenna n.
/// The norm of F_{j,k} is the allocated power, its direction the beam.
class PrecoderTensor {
 public:
  PrecoderTensor() = default;
  PrecoderTensor(std::size_t aps, std::size_t ues, std::size_t antennas, double p_max);

  std::size_t num_aps() const { return aps_; }
  std::size_t num_ues() const { return ues_; }
  std::size_t num_antennas() const { return antennas_; }
  double p_max() const { return p_max_; }

  cdouble& operator()(std::size_t j, std::size_t k, std::size_t n) {
    return entries_[(j * ues_ + k) * antennas_ + n];
  }
  cdouble operator()(std::size_t j, std::size_t k, std::size_t n) const {
    return entries_[(j * ues_ + k) * antennas_ + n];
  }
  std::span<cdouble> beam(std::size_t j, std::size_t k) {
    return {entries_.data() + (j * ues_ + k) * antennas_, antennas_};
  }
  std::span<const cdouble> beam(std::size_t j, std::size_t k) const {
    return {entries_.data() + (j * ues_ + k) * antennas_, antennas_};
  }
  std::span<cdouble> entries() { return entries_; }
  std::span<const cdouble> entries() const { return entries_; }

 private:
  std::size_t aps_ = 0;
  std::size_t ues_ = 0;
  std::size_t antennas_ = 0;
  double p_max_ = 0.0;
  std::vector<cdouble> entries_;
};

struct SEReport {
  std::vector<double> sinr;
  std::vector<double> se;
  double sum_se = 0.0;
};

/// SINR_k = |sum_j h_{j,k}^H F_{j,k}|^2 / (sum_{i != k} |sum_j h_{j,k}^H F_{j,i}|^2 + noise).
std::vector<double> sinr(const ChannelTensor& h, const PrecoderTensor& f, double noise_power);

SEReport sum_se(const ChannelTensor& h, const PrecoderTensor& f, double noise_power);

/// p_j = sum_k ||F_{j,k}||^2.
std::vector<double> per_ap_power(const PrecoderTensor& f);

/// True when every AP is within budget * (1 + rel_tol).
bool power_feasible(const PrecoderTensor& f, double budget, double rel_tol = 1e-6);

/// Largest relative budget excess max_j (p_j - budget) / budget (<= 0 when feasible).
double max_power_excess(const PrecoderTensor& f, double budget);

struct CdfPoint {
  double value = 0.0;
  double probability = 0.0;
};

/// Right-continuous step CDF: one point per distinct value, probability is
/// the fraction of samples <= value. Throws DomainError on empty input.
std::vector<CdfPoint> empirical_cdf(std::span<const double> values);

/// Evaluates a step CDF at x (0 below the first step).
double cdf_at(std::span<const CdfPoint> curve, double x);

struct Summary {
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double p5 = 0.0;
};

/// Mean, median and 5th percentile (linear interpolation between order
/// statistics).
Summary summarize(std::span<const double> values);
double percentile(std::span<const double> values, double q);

/// CSV with header "value,cdf".
void write_cdf_csv(const std::filesystem::path& path, std::span<const CdfPoint> curve);
std::string summary_json(const Summary& s);

}  // namespace cfmimo

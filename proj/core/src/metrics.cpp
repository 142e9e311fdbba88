// SPDX-License-Identifier: Apache-2.0
#include "cfmimo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

#include "cfmimo/error.hpp"
#include "cfmimo/json_io.hpp"

namespace cfmimo {

PrecoderTensor::PrecoderTensor(std::size_t aps, std::size_t ues, std::size_t antennas,
                               double p_max)
    : aps_(aps), ues_(ues), antennas_(antennas), p_max_(p_max), entries_(aps * ues * antennas) {}

namespace {

void check_shapes(const ChannelTensor& h, const PrecoderTensor& f) {
  if (h.num_aps() != f.num_aps() || h.num_ues() != f.num_ues() ||
      h.num_antennas() != f.num_antennas()) {
    throw ShapeError("channel is " + std::to_string(h.num_aps()) + "x" +
                     std::to_string(h.num_ues()) + "x" + std::to_string(h.num_antennas()) +
                     " but precoder is " + std::to_string(f.num_aps()) + "x" +
                     std::to_string(f.num_ues()) + "x" + std::to_string(f.num_antennas()));
  }
}

}  // namespace

std::vector<double> sinr(const ChannelTensor& h, const PrecoderTensor& f, double noise_power) {
  check_shapes(h, f);
  if (!(noise_power > 0.0)) throw DomainError("noise power must be positive");
  const std::size_t L = h.num_aps(), K = h.num_ues(), N = h.num_antennas();
  std::vector<double> out(K);
  for (std::size_t k = 0; k < K; ++k) {
    double desired = 0.0, interference = 0.0;
    for (std::size_t i = 0; i < K; ++i) {
      cdouble s = 0.0;
      for (std::size_t j = 0; j < L; ++j) {
        const auto hk = h.link(j, k);
        const auto fi = f.beam(j, i);
        for (std::size_t n = 0; n < N; ++n) s += std::conj(hk[n]) * fi[n];
      }
      (i == k ? desired : interference) += std::norm(s);
    }
    out[k] = desired / (interference + noise_power);
  }
  return out;
}

SEReport sum_se(const ChannelTensor& h, const PrecoderTensor& f, double noise_power) {
  SEReport r;
  r.sinr = sinr(h, f, noise_power);
  r.se.resize(r.sinr.size());
  for (std::size_t k = 0; k < r.sinr.size(); ++k) {
    r.se[k] = std::log2(1.0 + r.sinr[k]);
    r.sum_se += r.se[k];
  }
  return r;
}

std::vector<double> per_ap_power(const PrecoderTensor& f) {
  std::vector<double> p(f.num_aps(), 0.0);
  for (std::size_t j = 0; j < f.num_aps(); ++j)
    for (std::size_t k = 0; k < f.num_ues(); ++k)
      for (auto z : f.beam(j, k)) p[j] += std::norm(z);
  return p;
}

double max_power_excess(const PrecoderTensor& f, double budget) {
  double worst = -INFINITY;
  for (double p : per_ap_power(f)) worst = std::max(worst, (p - budget) / budget);
  return worst;
}

bool power_feasible(const PrecoderTensor& f, double budget, double rel_tol) {
  return max_power_excess(f, budget) <= rel_tol;
}

std::vector<CdfPoint> empirical_cdf(std::span<const double> values) {
  if (values.empty()) throw DomainError("empirical CDF of an empty sample");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  std::vector<CdfPoint> curve;
  const double n = static_cast<double>(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i + 1 < v.size() && v[i + 1] == v[i]) continue;
    curve.push_back({v[i], static_cast<double>(i + 1) / n});
  }
  return curve;
}

double cdf_at(std::span<const CdfPoint> curve, double x) {
  auto it = std::upper_bound(curve.begin(), curve.end(), x,
                             [](double a, const CdfPoint& p) { return a < p.value; });
  if (it == curve.begin()) return 0.0;
  return std::prev(it)->probability;
}

double percentile(std::span<const double> values, double q) {
  if (values.empty()) throw DomainError("percentile of an empty sample");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double pos = q / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

Summary summarize(std::span<const double> values) {
  if (values.empty()) throw DomainError("summary of an empty sample");
  Summary s;
  s.count = values.size();
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(s.count);
  s.median = percentile(values, 50.0);
  s.p5 = percentile(values, 5.0);
  return s;
}

void write_cdf_csv(const std::filesystem::path& path, std::span<const CdfPoint> curve) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "value,cdf\n" << std::setprecision(17);
  for (const auto& p : curve) out << p.value << ',' << p.probability << '\n';
}

std::string summary_json(const Summary& s) {
  return Json{{"count", s.count}, {"mean", s.mean}, {"median", s.median}, {"p5", s.p5}}.dump(2);
}

}  // namespace cfmimo

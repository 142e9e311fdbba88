// SPDX-License-Identifier: Apache-2.0
#include "cfmimo/inference.hpp"

#include <Eigen/Core>
#include <cmath>
#include <map>

#include "cfmimo/error.hpp"

namespace cfmimo {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

ConstMap as_matrix(const RealTensor& t) {
  return ConstMap(t.data().data(), static_cast<Eigen::Index>(t.dim(0)),
                  static_cast<Eigen::Index>(t.dim(1)));
}

// Adds sum_{r in group} src.row(r) into dst.row(group).
void scatter_sum(const RowMat& src, const std::vector<std::uint32_t>& group, RowMat& dst) {
  dst.setZero();
  for (Eigen::Index r = 0; r < src.rows(); ++r) dst.row(group[static_cast<std::size_t>(r)]) += src.row(r);
}

}  // namespace

InferenceEngine::InferenceEngine(const GnnModel& model)
    : layers_(model.layers), attention_(model.attention) {
  for (const auto& b : model.branches) {
    Branch c;
    c.spec = b.spec;
    c.input_scale = b.input_scale;
    const std::size_t L = b.spec.shape.aps, K = b.spec.shape.ues, N = b.spec.shape.antennas;
    std::map<std::size_t, std::uint32_t> ids[3];
    std::vector<double> counts[3];
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t k = 0; k < K; ++k)
        for (std::size_t n = 0; n < N; ++n) {
          const std::size_t flat = (l * K + k) * N + n;
          const double a = sigmoid(b.sparse.w[flat]);
          if (!(a > b.sparse.tau)) continue;
          c.links.push_back(static_cast<std::uint32_t>(flat));
          c.a.push_back(a);
          c.ap_of_link.push_back(static_cast<std::uint32_t>(l));
          const std::size_t key[3] = {k * N + n, l * N + n, l * K + k};
          for (int ax = 0; ax < 3; ++ax) {
            auto [it, fresh] = ids[ax].try_emplace(key[ax], static_cast<std::uint32_t>(counts[ax].size()));
            if (fresh) counts[ax].push_back(0.0);
            counts[ax][it->second] += 1.0;
            c.groups[ax].of_link.push_back(it->second);
          }
        }
    for (int ax = 0; ax < 3; ++ax) {
      for (double n : counts[ax]) c.groups[ax].inv_count.push_back(1.0 / n);
    }
    branches_.push_back(std::move(c));
  }
}

bool InferenceEngine::has(Task task) const {
  for (const auto& b : branches_)
    if (b.spec.task == task) return true;
  return false;
}

const InferenceEngine::Branch& InferenceEngine::branch(Task task) const {
  for (const auto& b : branches_)
    if (b.spec.task == task) return b;
  throw ConfigError("model has no " + std::string(task_name(task)) + " head");
}

std::size_t InferenceEngine::retained_links(Task task) const { return branch(task).links.size(); }
std::size_t InferenceEngine::total_links(Task task) const { return branch(task).spec.shape.links(); }

double InferenceEngine::multiply_adds(Task task) const {
  const auto& b = branch(task);
  const double r = static_cast<double>(b.links.size());
  double g = 0.0;
  for (const auto& gr : b.groups) g += static_cast<double>(gr.count());
  double total = 0.0;
  for (const auto& l : layers_) {
    const double cd = static_cast<double>(l.in_dim() * l.out_dim());
    total += (r + g) * cd + 4.0 * r * static_cast<double>(l.in_dim());
  }
  if (!attention_.empty()) total += 2.0 * r * static_cast<double>(attention_.wq.size()) + 3.0 * r;
  return total + 6.0 * r;  // SE-independent head normalization
}

PrecoderTensor InferenceEngine::run(Task task, const ChannelTensor& h) const {
  const auto& b = branch(task);
  const auto& sh = b.spec.shape;
  if (h.num_aps() != sh.aps || h.num_ues() != sh.ues || h.num_antennas() != sh.antennas) {
    throw ShapeError("inference: sample shape does not match the model branch");
  }
  const auto R = static_cast<Eigen::Index>(b.links.size());
  const auto gains = h.gains();
  RowMat x(R, 2);
  for (Eigen::Index r = 0; r < R; ++r) {
    const auto z = gains[b.links[static_cast<std::size_t>(r)]];
    x(r, 0) = z.real() / b.input_scale;
    x(r, 1) = z.imag() / b.input_scale;
  }

  std::array<RowMat, 3> att_w;
  if (!attention_.empty()) {
    const RowMat q = x * as_matrix(attention_.wq);
    const RowMat k = x * as_matrix(attention_.wk);
    const double inv = 1.0 / std::sqrt(static_cast<double>(attention_.wq.dim(1)));
    Eigen::VectorXd s(R);
    for (Eigen::Index r = 0; r < R; ++r) s(r) = sigmoid(q.row(r).dot(k.row(r)) * inv);
    for (int ax = 0; ax < 3; ++ax) {
      const auto& g = b.groups[ax];
      std::vector<double> tot(g.count(), 0.0);
      for (Eigen::Index r = 0; r < R; ++r) tot[g.of_link[static_cast<std::size_t>(r)]] += s(r);
      att_w[ax].resize(R, 1);
      for (Eigen::Index r = 0; r < R; ++r) att_w[ax](r, 0) = s(r) / (tot[g.of_link[static_cast<std::size_t>(r)]] + 1e-300);
    }
  }

  const Eigen::Map<const Eigen::VectorXd> a(b.a.data(), R);
  RowMat y, out, agg, z;
  for (const auto& layer : layers_) {
    const auto C = static_cast<Eigen::Index>(layer.in_dim());
    if (attention_.empty()) {
      y = a.asDiagonal() * x;
      out.noalias() = y * as_matrix(layer.p[0]);
      for (int ax = 0; ax < 3; ++ax) {
        const auto& g = b.groups[ax];
        agg.resize(static_cast<Eigen::Index>(g.count()), C);
        scatter_sum(y, g.of_link, agg);
        agg = Eigen::Map<const Eigen::VectorXd>(g.inv_count.data(), agg.rows()).asDiagonal() * agg;
        z.noalias() = agg * as_matrix(layer.p[ax + 1]);
        for (Eigen::Index r = 0; r < R; ++r) out.row(r) += z.row(g.of_link[static_cast<std::size_t>(r)]);
      }
    } else {
      out.noalias() = x * as_matrix(layer.p[0]);
      for (int ax = 0; ax < 3; ++ax) {
        const auto& g = b.groups[ax];
        agg.resize(static_cast<Eigen::Index>(g.count()), C);
        y = att_w[ax].col(0).asDiagonal() * x;
        scatter_sum(y, g.of_link, agg);
        z.noalias() = agg * as_matrix(layer.p[ax + 1]);
        for (Eigen::Index r = 0; r < R; ++r) out.row(r) += z.row(g.of_link[static_cast<std::size_t>(r)]);
      }
    }
    if (layer.activation == Activation::kRelu) out = out.cwiseMax(0.0);
    x.swap(out);
  }

  PrecoderTensor f(sh.aps, sh.ues, sh.antennas, b.spec.p_max);
  std::vector<double> power(sh.aps, 0.0);
  for (Eigen::Index r = 0; r < R; ++r) power[b.ap_of_link[static_cast<std::size_t>(r)]] += x.row(r).squaredNorm();
  auto e = f.entries();
  for (Eigen::Index r = 0; r < R; ++r) {
    const double p = power[b.ap_of_link[static_cast<std::size_t>(r)]];
    if (p < 1e-20) continue;
    const double s = std::sqrt(b.spec.p_max / p);
    e[b.links[static_cast<std::size_t>(r)]] = {x(r, 0) * s, x(r, 1) * s};
  }
  return f;
}

}  // namespace cfmimo

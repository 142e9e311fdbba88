// SPDX-License-Identifier: Apache-2.0
// Shared helpers for the unit and acceptance tests.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "cfmimo/autodiff.hpp"
#include "cfmimo/channel.hpp"
#include "cfmimo/metrics.hpp"
#include "cfmimo/rng.hpp"

namespace cfmimo::testing {

inline RealTensor random_tensor(const Shape& shape, CounterRng& rng, double lo = -1.0,
                                double hi = 1.0) {
  RealTensor t(shape);
  for (auto& v : t.data()) v = lo + (hi - lo) * rng.uniform();
  return t;
}

inline ChannelTensor random_channel(std::size_t L, std::size_t K, std::size_t N, CounterRng& rng,
                                    double scale = 1.0) {
  ChannelTensor h(L, K, N);
  for (auto& z : h.gains()) z = scale * rng.complex_normal();
  return h;
}

struct GradCheck {
  double max_rel_error = 0.0;
  bool ok = true;
};

/// Compares tape gradients of `build` (leaves -> scalar node) with central
/// differences. Relative error uses max(|fd|, |an|, 1e-6) as the scale, so
/// entries whose gradient is essentially zero are judged absolutely.
inline GradCheck check_gradients(
    const std::vector<RealTensor>& inputs,
    const std::function<NodeId(Tape&, const std::vector<NodeId>&)>& build, double h = 1e-5,
    double tol = 1e-4) {
  Tape tape;
  std::vector<NodeId> ids;
  for (const auto& x : inputs) ids.push_back(tape.leaf(x));
  const NodeId out = build(tape, ids);
  const auto grads = tape.backward(out);

  auto eval = [&](const std::vector<RealTensor>& xs) {
    Tape t;
    std::vector<NodeId> v;
    for (const auto& x : xs) v.push_back(t.leaf(x, false));
    return t.value(build(t, v)).item();
  };

  GradCheck r;
  auto xs = inputs;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto& an = grads.at(ids[i]);
    for (std::size_t e = 0; e < xs[i].size(); ++e) {
      const double x0 = xs[i][e];
      xs[i][e] = x0 + h;
      const double fp = eval(xs);
      xs[i][e] = x0 - h;
      const double fm = eval(xs);
      xs[i][e] = x0;
      const double fd = (fp - fm) / (2 * h);
      const double scale = std::max({std::abs(fd), std::abs(an[e]), 1e-6});
      const double rel = std::abs(fd - an[e]) / scale;
      r.max_rel_error = std::max(r.max_rel_error, rel);
      if (!(rel < tol)) r.ok = false;
    }
  }
  return r;
}

}  // namespace cfmimo::testing

#include "cfmimo/mdgnn.hpp"

namespace cfmimo::testing {

inline ModelConfig small_config(std::size_t L, std::size_t K, std::size_t N, double tau,
                                std::size_t hidden = 4, std::size_t layers = 2) {
  ModelConfig c;
  c.hidden = hidden;
  c.layers = layers;
  BranchSpec b;
  b.task = Task::kPowerControl;
  b.shape = {L, K, N};
  b.tau = tau;
  b.p_max = 1.0;
  b.noise_power = 0.5;
  c.branches = {b};
  return c;
}

/// W drawn so sigmoid(W) spreads across (0.27, 0.88): masks vary at usual taus.
inline void randomize_adjacency(GnnModel& model, CounterRng& rng) {
  for (auto& b : model.branches)
    for (auto& v : b.sparse.w.data()) v = -1.0 + 3.0 * rng.uniform();
}

/// Loss of one branch over a batch, evaluated without gradients.
inline double branch_loss(const GnnModel& model, std::size_t branch,
                          const std::vector<ChannelTensor>& batch) {
  Tape tape;
  auto binding = bind_parameters(tape, model, false);
  std::vector<const ChannelTensor*> ptrs;
  for (const auto& h : batch) ptrs.push_back(&h);
  return tape.value(build_branch_graph(tape, model, binding, branch, ptrs).loss).item();
}

}  // namespace cfmimo::testing

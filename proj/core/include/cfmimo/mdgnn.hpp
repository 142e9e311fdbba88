// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "cfmimo/autodiff.hpp"
#include "cfmimo/channel.hpp"
#include "cfmimo/dataset.hpp"
#include "cfmimo/metrics.hpp"
#include "cfmimo/tensor.hpp"

namespace cfmimo {

/// Index structure of one task: L x K x N links (the precoding task is a
/// single transmitter, L = 1).
struct TaskShape {
  std::size_t aps = 1;
  std::size_t ues = 1;
  std::size_t antennas = 1;

  std::size_t links() const { return aps * ues * antennas; }
  friend bool operator==(const TaskShape&, const TaskShape&) = default;
};

/// Learnable adjacency: A = sigmoid(W), mask M = [A > tau].
struct SparseLayerState {
  RealTensor w;  // [L, K, N]
  double tau = 0.0;

  RealTensor adjacency() const;
  RealTensor mask() const;
  std::size_t retained() const;
};

struct SparseForward {
  RealTensor h_sparse;  // [L, K, N, 2]
  RealTensor a;         // [L, K, N]
  RealTensor m;         // [L, K, N]
};

/// Channel features [L, K, N, 2] (real, imag) masked by the thresholded
/// adjacency.
SparseForward sparse_forward(const RealTensor& h_features, const SparseLayerState& state);

/// Real/imag stacking of a channel tensor, divided by `scale`.
RealTensor channel_features(const ChannelTensor& h, double scale = 1.0);

enum class Activation { kRelu, kIdentity };

/// Four index-shared mixing matrices: self, AP mean, UE mean, antenna mean.
struct GnnLayerParams {
  std::array<RealTensor, 4> p;  // each [in, out]
  Activation activation = Activation::kRelu;

  std::size_t in_dim() const { return p[0].dim(0); }
  std::size_t out_dim() const { return p[0].dim(1); }
};

/// One propagation step on a single sample, written as plain loops.
/// x: [L, K, N, C]; a_masked: [L, K, N] (A * M, zero on pruned links).
/// Means along an axis divide by the number of retained links on it.
RealTensor mdgnn_layer(const RealTensor& x, const GnnLayerParams& params,
                       const RealTensor& a_masked);

/// Per-AP normalization of x_last [L, K, N, 2] so that every AP spends
/// exactly p_max; APs whose raw power is below 1e-20 transmit nothing.
PrecoderTensor power_head(const RealTensor& x_last, double p_max);

/// x_last [K, Nt, 2] -> Nt x K precoder with total power p_max.
ComplexMatrix precoding_head(const RealTensor& x_last, double p_max);

/// alpha * l_power + (1 - alpha) * l_prec; alpha must lie in [0, 1].
double joint_loss(double l_power, double l_prec, double alpha);

/// Edge scoring for the attention variant: per-link score
/// s = sigmoid(<x Wq, x Wk> / sqrt(d)) computed from the 2-channel input.
struct AttentionParams {
  RealTensor wq;  // [2, d]
  RealTensor wk;  // [2, d]

  bool empty() const { return wq.size() == 0; }
};

/// Scores in (0, 1), shape [L, K, N].
RealTensor attention_scores(const RealTensor& h_features, const AttentionParams& params);

/// Scores normalized to sum to one along `axis` (0 = AP, 1 = UE,
/// 2 = antenna) among the links where `mask` is set.
RealTensor normalize_scores(const RealTensor& scores, const RealTensor& mask, int axis);

enum class Method { kWmmse, kMdgnn, kAMdgnn, kSpMdgnn };
std::string_view method_name(Method m);
Method parse_method(std::string_view name);

struct BranchSpec {
  Task task = Task::kPowerControl;
  TaskShape shape;
  double tau = 0.0;
  double p_max = 1.0;
  double noise_power = 1.0;

  friend bool operator==(const BranchSpec&, const BranchSpec&) = default;
};

struct ModelConfig {
  std::vector<BranchSpec> branches;  // one head per entry, at most one per task
  std::size_t hidden = 32;
  std::size_t layers = 5;
  double alpha = 0.5;
  bool attention = false;
  std::size_t attention_dim = 8;
  /// Initial W; sigmoid(1) ~ 0.73 keeps every link alive at the usual taus.
  double w_init = 1.0;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct TaskBranch {
  BranchSpec spec;
  SparseLayerState sparse;
  /// Divides the raw channel before it enters the network.
  double input_scale = 1.0;
};

struct GnnModel {
  ModelConfig config;
  std::vector<GnnLayerParams> layers;  // shared by every branch
  AttentionParams attention;
  std::vector<TaskBranch> branches;
  std::uint64_t seed = 0;
  std::size_t step = 0;

  std::size_t branch_index(Task task) const;
  const TaskBranch& branch(Task task) const { return branches[branch_index(task)]; }
  TaskBranch& branch(Task task) { return branches[branch_index(task)]; }

  /// Trainable tensors in a fixed order: layer matrices, attention, then
  /// one W per branch.
  std::vector<RealTensor*> parameters();
  std::vector<const RealTensor*> parameters() const;
  /// Index of the first W in parameters().
  std::size_t mask_parameter_offset() const;
  std::size_t parameter_count() const;
};

/// Uniform(+-sqrt(1 / fan_in)) mixing matrices and W = w_init everywhere.
GnnModel init_model(const ModelConfig& config, std::uint64_t seed);

/// Rounds every parameter to float32, the checkpoint precision.
void round_parameters_to_float(GnnModel& model);

/// Tape handles of a model's parameters, in parameters() order.
struct TapeBinding {
  std::vector<NodeId> ids;
};

TapeBinding bind_parameters(Tape& tape, const GnnModel& model, bool trainable = true);

struct BranchGraph {
  NodeId output;      // [B, L, K, N, 2] precoder entries, real/imag
  NodeId loss;        // -(batch mean sum SE)
  NodeId adjacency;   // [1, L, K, N, 1] sigmoid(W)
};

/// Records the forward pass and SE loss of one branch over a batch.
BranchGraph build_branch_graph(Tape& tape, const GnnModel& model, const TapeBinding& binding,
                               std::size_t branch, std::span<const ChannelTensor* const> batch);

/// Tape-based precoder for a single sample (reference path, slow).
PrecoderTensor tape_forward(const GnnModel& model, Task task, const ChannelTensor& h);

}  // namespace cfmimo

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cfmimo/inference.hpp"
#include "cfmimo/json_io.hpp"
#include "cfmimo/mdgnn.hpp"

namespace cfmimo {

struct TrainConfig {
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t epochs = 200;
  /// Stop after this many epochs without a better test objective (0 = never).
  std::size_t patience = 20;
  std::uint64_t seed = 0;
  double alpha = 0.5;
  double tau_pc = 0.0;
  double tau_prec = 0.0;
  /// Step size for the adjacency logits W.
  double mask_learning_rate = 2e-2;
  /// Weight of the mean-adjacency penalty added for sparse branches (tau > 0).
  double mask_penalty = 1.0;
  /// Samples per tape. Batches are split into fixed chunks so results do not
  /// depend on the worker count.
  std::size_t chunk_size = 16;
  std::size_t workers = 1;

  void validate() const;
};

void to_json(Json& j, const TrainConfig& c);
void from_json(const Json& j, TrainConfig& c);

/// Train and test samples of one task.
struct TaskData {
  Task task = Task::kPowerControl;
  std::span<const ChannelTensor> train;
  std::span<const ChannelTensor> test;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  /// Loss-weighted test mean sum SE (the model-selection criterion).
  double test_objective = 0.0;
  std::vector<double> test_se;          // per branch, mean sum SE
  std::vector<std::size_t> retained;    // per branch, retained links
};

struct TrainResult {
  GnnModel model;  // best-test-objective parameters, float-rounded
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double initial_objective = 0.0;  // test objective before the first step
};

/// First and second moment estimates for Adam.
struct AdamState {
  std::vector<RealTensor> m;
  std::vector<RealTensor> v;
  std::size_t t = 0;
};

/// One bias-corrected Adam update; `lr` holds one step size per tensor.
void adam_step(std::span<RealTensor* const> params, std::span<const RealTensor> grads,
               std::span<const double> lr, AdamState& state, const TrainConfig& config);

/// RMS channel magnitude over a sample set, used as the input scale.
double channel_rms(std::span<const ChannelTensor> samples);

/// Adam on the (joint) negative mean sum-SE loss. Throws DivergenceError
/// naming the epoch and step on a non-finite loss.
TrainResult train(GnnModel model, std::span<const TaskData> data, const TrainConfig& config);

/// Per-sample sum SE of the model's precoder on `samples`.
std::vector<double> evaluate_sum_se(const InferenceEngine& engine, Task task,
                                    std::span<const ChannelTensor> samples,
                                    double noise_power, std::size_t workers = 1);

/// Mean single-worker wall-clock seconds per sample.
double time_inference(const InferenceEngine& engine, Task task,
                      std::span<const ChannelTensor> samples, std::size_t repeats = 1);

struct SweepResult {
  double tau = 0.0;
  double sparsity = 0.0;
  double retention = 0.0;
  double harmonic = 0.0;
  double mean_se = 0.0;
  double inference_seconds = 0.0;
};

/// 2SP / (S + P), 0 when S + P = 0. Rejects S or P outside [0, 1].
double harmonic_score(double sparsity, double retention);

struct SweepOutput {
  SweepResult dense;
  std::vector<SweepResult> rows;  // sorted by tau
};

/// Trains a dense (tau = 0) reference, then one fresh model per tau with that
/// threshold on every head. S is the pruned fraction of links, P the
/// clamped ratio of mean test SE (loss-weighted over heads) to the dense one.
SweepOutput sweep_threshold(const ModelConfig& model_template, std::span<const TaskData> data,
                            std::span<const double> taus, const TrainConfig& config,
                            std::size_t sweep_workers = 1);

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history);
void write_sweep_csv(const std::filesystem::path& path, const SweepOutput& sweep);

}  // namespace cfmimo

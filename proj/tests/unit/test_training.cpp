// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "cfmimo/error.hpp"
#include "cfmimo/training.hpp"
#include "test_support.hpp"

using namespace cfmimo;
using namespace cfmimo::testing;

namespace {

std::vector<ChannelTensor> make_set(std::size_t n, std::size_t L, std::size_t K, std::size_t N,
                                    std::uint64_t seed) {
  std::vector<ChannelTensor> out;
  CounterRng rng(seed);
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_channel(L, K, N, rng));
  return out;
}

TrainConfig quick_config() {
  TrainConfig c;
  c.batch_size = 8;
  c.epochs = 3;
  c.learning_rate = 1e-2;
  c.patience = 0;
  c.chunk_size = 4;
  return c;
}

}  // namespace

TEST(Harmonic, Examples) {
  EXPECT_DOUBLE_EQ(harmonic_score(1.0, 1.0), 1.0);
  EXPECT_NEAR(harmonic_score(0.55, 0.987), 0.7064, 1e-4);
  EXPECT_EQ(harmonic_score(0.0, 0.9), 0.0);
  EXPECT_DOUBLE_EQ(harmonic_score(0.5, 1.0), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(harmonic_score(0.4, 0.4), 0.4);
  EXPECT_EQ(harmonic_score(0.0, 0.0), 0.0);
  EXPECT_THROW(harmonic_score(1.2, 0.5), DomainError);
  EXPECT_THROW(harmonic_score(0.5, -0.1), DomainError);
}

TEST(Harmonic, BoundedByTwiceTheMinimum) {
  for (double s = 0.0; s <= 1.0; s += 0.1)
    for (double p = 0.0; p <= 1.0; p += 0.1) EXPECT_LE(harmonic_score(s, p), 2.0 * std::min(s, p) + 1e-15);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  RealTensor p = RealTensor::vector({1.0, -2.0});
  RealTensor* ps[] = {&p};
  std::vector<RealTensor> g{RealTensor({2})};
  std::vector<double> lr{0.1};
  AdamState st;
  for (int i = 0; i < 5; ++i) adam_step(ps, g, lr, st, TrainConfig{});
  EXPECT_EQ(p.values(), (std::vector<double>{1.0, -2.0}));
}

TEST(Adam, FirstStepMovesByLearningRate) {
  RealTensor p = RealTensor::vector({1.0});
  RealTensor* ps[] = {&p};
  std::vector<RealTensor> g{RealTensor::vector({3.0})};
  std::vector<double> lr{0.1};
  AdamState st;
  adam_step(ps, g, lr, st, TrainConfig{});
  EXPECT_NEAR(p[0], 0.9, 1e-7);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.beta1 = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.mask_penalty = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(TrainConfig, JsonRoundTrip) {
  TrainConfig c;
  c.learning_rate = 3e-3;
  c.seed = 77;
  c.mask_penalty = 1.0;
  Json j = c;
  auto back = j.get<TrainConfig>();
  EXPECT_EQ(back.learning_rate, 3e-3);
  EXPECT_EQ(back.seed, 77u);
  EXPECT_EQ(back.mask_penalty, 1.0);
}

TEST(Train, ZeroLearningRateKeepsParameters) {
  auto model = init_model(small_config(2, 2, 2, 0.6), 3);
  auto train_set = make_set(16, 2, 2, 2, 1);
  auto test_set = make_set(4, 2, 2, 2, 2);
  TaskData d{Task::kPowerControl, train_set, test_set};
  auto c = quick_config();
  c.learning_rate = 0.0;
  c.mask_learning_rate = 0.0;
  auto r = train(model, std::span<const TaskData>(&d, 1), c);
  auto before = model.parameters();
  auto after = r.model.parameters();
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(*before[i], *after[i]);
}

TEST(Train, TinyInstanceImproves) {
  // One fixed L = K = N = 2 channel, 200 full-batch steps.
  auto train_set = make_set(1, 2, 2, 2, 5);
  TaskData d{Task::kPowerControl, train_set, train_set};
  auto model = init_model(small_config(2, 2, 2, 0.0, 8, 3), 1);
  TrainConfig c;
  c.batch_size = 1;
  c.epochs = 200;
  c.patience = 0;
  c.learning_rate = 1e-2;
  auto r = train(model, std::span<const TaskData>(&d, 1), c);
  EXPECT_EQ(r.model.step, 200u);
  const double before = sum_se(train_set[0], tape_forward(model, Task::kPowerControl, train_set[0]), 0.5).sum_se;
  const double after = sum_se(train_set[0], tape_forward(r.model, Task::kPowerControl, train_set[0]), 0.5).sum_se;
  EXPECT_GT(after, before);
  EXPECT_GT(r.history[r.best_epoch - 1].test_objective, r.initial_objective);
}

TEST(Train, DeterministicAcrossRunsAndWorkers) {
  auto train_set = make_set(24, 2, 3, 2, 7);
  auto test_set = make_set(6, 2, 3, 2, 8);
  TaskData d{Task::kPowerControl, train_set, test_set};
  auto c = quick_config();
  c.mask_penalty = 0.5;
  auto model = init_model(small_config(2, 3, 2, 0.62), 4);
  auto a = train(model, std::span<const TaskData>(&d, 1), c);
  auto b = train(model, std::span<const TaskData>(&d, 1), c);
  c.workers = 3;
  auto m = train(model, std::span<const TaskData>(&d, 1), c);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].train_loss, b.history[i].train_loss);
    EXPECT_EQ(a.history[i].test_objective, b.history[i].test_objective);
    EXPECT_EQ(a.history[i].train_loss, m.history[i].train_loss);
  }
  EXPECT_EQ(*a.model.parameters()[0], *m.model.parameters()[0]);
}

TEST(Train, JointModelUsesBothHeads) {
  auto pc_train = make_set(16, 2, 2, 2, 1), pc_test = make_set(4, 2, 2, 2, 2);
  auto pr_train = make_set(16, 1, 2, 4, 3), pr_test = make_set(4, 1, 2, 4, 4);
  auto cfg = small_config(2, 2, 2, 0.0);
  BranchSpec prec;
  prec.task = Task::kPrecoding;
  prec.shape = {1, 2, 4};
  cfg.branches.push_back(prec);
  std::vector<TaskData> data{{Task::kPowerControl, pc_train, pc_test},
                             {Task::kPrecoding, pr_train, pr_test}};
  auto r = train(init_model(cfg, 2), data, quick_config());
  ASSERT_EQ(r.history.front().test_se.size(), 2u);
  EXPECT_GT(r.history.front().test_se[1], 0.0);
}

TEST(Train, MaskPenaltyFollowsBranchWeight) {
  // alpha = 1 gives the precoding head zero weight, penalty included, so its
  // W never moves while the power-control W does.
  auto pc_train = make_set(16, 2, 2, 2, 1), pc_test = make_set(4, 2, 2, 2, 2);
  auto pr_train = make_set(16, 1, 2, 4, 3), pr_test = make_set(4, 1, 2, 4, 4);
  auto cfg = small_config(2, 2, 2, 0.5);
  cfg.alpha = 1.0;
  BranchSpec prec;
  prec.task = Task::kPrecoding;
  prec.shape = {1, 2, 4};
  prec.tau = 0.5;
  cfg.branches.push_back(prec);
  std::vector<TaskData> data{{Task::kPowerControl, pc_train, pc_test},
                             {Task::kPrecoding, pr_train, pr_test}};
  auto tc = quick_config();
  tc.alpha = 1.0;
  tc.mask_penalty = 5.0;
  tc.patience = 0;
  const auto init = init_model(cfg, 2);
  const auto r = train(init, data, tc);
  auto same_w = [&](Task t) {
    return std::ranges::equal(r.model.branch(t).sparse.w.data(), init.branch(t).sparse.w.data());
  };
  EXPECT_TRUE(same_w(Task::kPrecoding));
  EXPECT_FALSE(same_w(Task::kPowerControl));
}

TEST(Train, MissingDataAndShapeErrors) {
  auto model = init_model(small_config(2, 2, 2, 0.0), 1);
  auto wrong = make_set(4, 2, 3, 2, 1);
  TaskData d{Task::kPowerControl, wrong, wrong};
  EXPECT_THROW(train(model, std::span<const TaskData>(&d, 1), quick_config()), ShapeError);
  TaskData other{Task::kPrecoding, wrong, wrong};
  EXPECT_THROW(train(model, std::span<const TaskData>(&other, 1), quick_config()), ConfigError);
}

TEST(Train, NonFiniteLossIsDivergence) {
  auto train_set = make_set(8, 2, 2, 2, 1);
  train_set[3](0, 1, 1) = {std::nan(""), 0.0};
  auto test_set = make_set(2, 2, 2, 2, 2);
  TaskData d{Task::kPowerControl, train_set, test_set};
  try {
    train(init_model(small_config(2, 2, 2, 0.0), 1), std::span<const TaskData>(&d, 1), quick_config());
    FAIL();
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("step"), std::string::npos);
  }
}

TEST(Sweep, RowsAndDenseReference) {
  auto train_set = make_set(16, 2, 2, 2, 1), test_set = make_set(4, 2, 2, 2, 2);
  TaskData d{Task::kPowerControl, train_set, test_set};
  auto c = quick_config();
  c.epochs = 1;
  std::vector<double> taus{0.7, 0.5, 0.0};
  auto s = sweep_threshold(small_config(2, 2, 2, 0.0), std::span<const TaskData>(&d, 1), taus, c);
  ASSERT_EQ(s.rows.size(), 3u);
  EXPECT_EQ(s.rows[0].tau, 0.0);
  EXPECT_EQ(s.rows[2].tau, 0.7);
  EXPECT_EQ(s.rows[0].sparsity, 0.0);
  EXPECT_EQ(s.rows[0].harmonic, 0.0);
  EXPECT_DOUBLE_EQ(s.dense.retention, 1.0);
  // fresh model per tau with the same seed: tau = 0 reproduces the dense run
  EXPECT_EQ(s.rows[0].mean_se, s.dense.mean_se);
  for (const auto& r : s.rows) {
    EXPECT_GE(r.retention, 0.0);
    EXPECT_LE(r.retention, 1.0);
    EXPECT_DOUBLE_EQ(r.harmonic, harmonic_score(r.sparsity, r.retention));
  }
  auto again = sweep_threshold(small_config(2, 2, 2, 0.0), std::span<const TaskData>(&d, 1), taus, c);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(again.rows[i].mean_se, s.rows[i].mean_se);
  std::vector<double> bad{1.5};
  EXPECT_THROW(sweep_threshold(small_config(2, 2, 2, 0.0), std::span<const TaskData>(&d, 1), bad, c),
               ConfigError);

  auto path = std::filesystem::temp_directory_path() / "cfmimo_test_sweep" / "sweep.csv";
  write_sweep_csv(path, s);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "tau,sparsity,retention,harmonic,mean_se,inference_seconds");
}

TEST(Evaluate, WorkerCountDoesNotChangeSe) {
  CounterRng rng(3);
  auto model = init_model(small_config(2, 3, 2, 0.6), 1);
  randomize_adjacency(model, rng);
  auto set = make_set(10, 2, 3, 2, 9);
  InferenceEngine e(model);
  EXPECT_EQ(evaluate_sum_se(e, Task::kPowerControl, set, 0.5, 1),
            evaluate_sum_se(e, Task::kPowerControl, set, 0.5, 4));
  EXPECT_GT(time_inference(e, Task::kPowerControl, set), 0.0);
}

TEST(ChannelRms, Value) {
  ChannelTensor h(1, 1, 2);
  h(0, 0, 0) = {3.0, 0.0};
  h(0, 0, 1) = {0.0, 4.0};
  std::vector<ChannelTensor> s{h};
  EXPECT_NEAR(channel_rms(s), std::sqrt(12.5), 1e-15);
}

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cfmimo/channel.hpp"
#include "cfmimo/json_io.hpp"
#include "cfmimo/mdgnn.hpp"
#include "cfmimo/training.hpp"
#include "cfmimo/wmmse.hpp"

namespace cfmimo::cli {

enum class TaskSel { kPowerControl, kPrecoding, kJoint };
TaskSel parse_task_sel(const std::string& s);
std::string task_sel_name(TaskSel t);

/// Fully resolved configuration of one command. Built from an optional JSON
/// config file, then overridden by flags; echoed into run.json.
struct RunConfig {
  std::string command;
  ScenarioConfig scenario;
  SVChannelConfig sv;
  TrainConfig train;
  WmmseOptions wmmse;
  std::size_t hidden = 32;
  std::size_t layers = 5;
  std::size_t attention_dim = 8;
  double w_init = 1.0;

  std::uint64_t seed = 1;
  std::size_t samples = 2000;
  std::size_t test_samples = 500;
  Method method = Method::kMdgnn;
  TaskSel task = TaskSel::kJoint;
  std::optional<double> tau;  // applies to every head when set
  std::vector<double> taus;   // sweep grid
  std::size_t workers = 1;
  std::filesystem::path data_dir = "data";
  std::filesystem::path out = "out";
  std::vector<std::string> checkpoints;  // bench: method=path entries
  std::filesystem::path checkpoint;      // eval
  std::size_t timing_repeats = 3;
};

void to_json(Json& j, const RunConfig& c);
/// Applies the keys present in `j` on top of `c`.
void apply_json(const Json& j, RunConfig& c);

/// Effective per-task thresholds: explicit --tau, else 0.63 / 0.62 for
/// sp-mdgnn, else 0 (dense).
double resolved_tau(const RunConfig& c, Task task);

ModelConfig model_config_for(const RunConfig& c, const std::vector<BranchSpec>& branches);

std::filesystem::path dataset_path(const std::filesystem::path& dir, Task task, bool train);

// Each command writes its outputs plus run.json under c.out and returns a
// short JSON summary (also printed by the front end).
Json cmd_gen(const RunConfig& c);
Json cmd_train(const RunConfig& c);
Json cmd_sweep(const RunConfig& c);
Json cmd_bench(const RunConfig& c);
Json cmd_wmmse(const RunConfig& c);
Json cmd_eval(const RunConfig& c);

/// Dispatches on c.command.
Json run_command(const RunConfig& c);

}  // namespace cfmimo::cli

// SPDX-License-Identifier: Apache-2.0
#include "cfmimo_cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "cfmimo/checkpoint.hpp"
#include "cfmimo/dataset.hpp"
#include "cfmimo/error.hpp"
#include "cfmimo/inference.hpp"
#include "cfmimo/metrics.hpp"
#include "cfmimo/parallel.hpp"
#include "cfmimo/rng.hpp"

namespace cfmimo::cli {

namespace fs = std::filesystem;

TaskSel parse_task_sel(const std::string& s) {
  if (s == "pc" || s == "power_control") return TaskSel::kPowerControl;
  if (s == "prec" || s == "precoding") return TaskSel::kPrecoding;
  if (s == "joint" || s == "both") return TaskSel::kJoint;
  throw ConfigError("unknown task '" + s + "' (pc, prec or joint)");
}

std::string task_sel_name(TaskSel t) {
  switch (t) {
    case TaskSel::kPowerControl: return "pc";
    case TaskSel::kPrecoding: return "prec";
    case TaskSel::kJoint: return "joint";
  }
  return "?";
}

namespace {

std::vector<Task> tasks_of(TaskSel t) {
  switch (t) {
    case TaskSel::kPowerControl: return {Task::kPowerControl};
    case TaskSel::kPrecoding: return {Task::kPrecoding};
    case TaskSel::kJoint: return {Task::kPowerControl, Task::kPrecoding};
  }
  return {};
}

std::string short_name(Task t) { return t == Task::kPowerControl ? "pc" : "prec"; }

Json wmmse_json(const WmmseOptions& o) {
  return Json{{"max_iters", o.max_iters},
              {"tolerance", o.tolerance},
              {"bisection_tolerance", o.bisection_tolerance},
              {"init", o.init == WmmseInit::kScaledConjugate ? "scaled_conjugate" : "random"},
              {"seed", seed_to_json(o.seed)}};
}

void wmmse_from(const Json& j, WmmseOptions& o) {
  if (j.contains("max_iters")) o.max_iters = j["max_iters"].get<std::size_t>();
  if (j.contains("tolerance")) o.tolerance = j["tolerance"].get<double>();
  if (j.contains("bisection_tolerance")) o.bisection_tolerance = j["bisection_tolerance"].get<double>();
  if (j.contains("init")) {
    const auto s = j["init"].get<std::string>();
    if (s == "scaled_conjugate") o.init = WmmseInit::kScaledConjugate;
    else if (s == "random") o.init = WmmseInit::kRandom;
    else throw ConfigError("unknown WMMSE init '" + s + "'");
  }
  if (j.contains("seed")) o.seed = seed_from_json(j["seed"]);
}

void write_run_manifest(const RunConfig& c, const Json& summary) {
  Json doc{{"kind", "cfmimo-run"}, {"config", c}, {"summary", summary}};
  write_json_file(c.out / "run.json", doc);
}

struct Loaded {
  Task task;
  Dataset train;
  Dataset test;
};

Loaded load_task(const fs::path& dir, Task task, bool need_train) {
  Loaded l{task, {}, dataset_read(dataset_path(dir, task, false))};
  if (need_train) l.train = dataset_read(dataset_path(dir, task, true));
  if (l.test.samples.empty()) throw ConfigError("test set for " + short_name(task) + " is empty");
  return l;
}

BranchSpec branch_for(const DatasetManifest& m, double tau) {
  BranchSpec b;
  b.task = m.task;
  b.shape = {m.num_aps(), m.num_ues(), m.num_antennas()};
  b.tau = tau;
  b.p_max = m.p_max();
  b.noise_power = m.noise_power();
  return b;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

Json summary_of(const std::vector<double>& v) {
  const auto s = summarize(v);
  return Json{{"count", s.count}, {"mean", s.mean}, {"median", s.median}, {"p5", s.p5}};
}

}  // namespace

void to_json(Json& j, const RunConfig& c) {
  Json cps = c.checkpoints;
  j = Json{{"command", c.command},
           {"scenario", c.scenario},
           {"sv", c.sv},
           {"train", c.train},
           {"wmmse", wmmse_json(c.wmmse)},
           {"model",
            {{"hidden", c.hidden},
             {"layers", c.layers},
             {"attention_dim", c.attention_dim},
             {"w_init", c.w_init}}},
           {"seed", seed_to_json(c.seed)},
           {"samples", c.samples},
           {"test_samples", c.test_samples},
           {"method", method_name(c.method)},
           {"task", task_sel_name(c.task)},
           {"tau", c.tau ? Json(*c.tau) : Json(nullptr)},
           {"taus", c.taus},
           {"workers", c.workers},
           {"data_dir", c.data_dir.string()},
           {"out", c.out.string()},
           {"checkpoints", cps},
           {"checkpoint", c.checkpoint.string()},
           {"timing_repeats", c.timing_repeats}};
}

void apply_json(const Json& doc, RunConfig& c) {
  const Json& j = doc.contains("config") && doc["config"].is_object() ? doc["config"] : doc;
  try {
    if (j.contains("command")) c.command = j["command"].get<std::string>();
    if (j.contains("scenario")) from_json(j["scenario"], c.scenario);
    if (j.contains("sv")) from_json(j["sv"], c.sv);
    if (j.contains("train")) from_json(j["train"], c.train);
    if (j.contains("wmmse")) wmmse_from(j["wmmse"], c.wmmse);
    if (j.contains("model")) {
      const auto& m = j["model"];
      c.hidden = m.value("hidden", c.hidden);
      c.layers = m.value("layers", c.layers);
      c.attention_dim = m.value("attention_dim", c.attention_dim);
      c.w_init = m.value("w_init", c.w_init);
    }
    if (j.contains("seed")) c.seed = seed_from_json(j["seed"]);
    c.samples = j.value("samples", c.samples);
    c.test_samples = j.value("test_samples", c.test_samples);
    if (j.contains("method")) c.method = parse_method(j["method"].get<std::string>());
    if (j.contains("task")) c.task = parse_task_sel(j["task"].get<std::string>());
    if (j.contains("tau")) {
      c.tau = j["tau"].is_null() ? std::nullopt : std::optional<double>(j["tau"].get<double>());
    }
    if (j.contains("taus")) c.taus = j["taus"].get<std::vector<double>>();
    c.workers = j.value("workers", c.workers);
    if (j.contains("data_dir")) c.data_dir = j["data_dir"].get<std::string>();
    if (j.contains("out")) c.out = j["out"].get<std::string>();
    if (j.contains("checkpoints")) c.checkpoints = j["checkpoints"].get<std::vector<std::string>>();
    if (j.contains("checkpoint")) c.checkpoint = j["checkpoint"].get<std::string>();
    c.timing_repeats = j.value("timing_repeats", c.timing_repeats);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

double resolved_tau(const RunConfig& c, Task task) {
  if (c.method != Method::kSpMdgnn) return 0.0;
  if (c.tau) return *c.tau;
  return task == Task::kPowerControl ? 0.63 : 0.62;
}

ModelConfig model_config_for(const RunConfig& c, const std::vector<BranchSpec>& branches) {
  ModelConfig m;
  m.branches = branches;
  m.hidden = c.hidden;
  m.layers = c.layers;
  m.alpha = c.train.alpha;
  m.attention = c.method == Method::kAMdgnn;
  m.attention_dim = c.attention_dim;
  m.w_init = c.w_init;
  return m;
}

fs::path dataset_path(const fs::path& dir, Task task, bool train) {
  return dir / (short_name(task) + (train ? "_train.json" : "_test.json"));
}

Json cmd_gen(const RunConfig& c) {
  if (c.samples == 0) throw ConfigError("--samples must be >= 1");
  if (c.test_samples == 0) throw ConfigError("--test-samples must be >= 1");
  Json summary = Json::object();
  for (Task t : tasks_of(c.task)) {
    const auto train_seed = derive_seed(c.seed, 1);
    const auto test_seed = derive_seed(c.seed, 2);
    Dataset tr, te;
    if (t == Task::kPowerControl) {
      const auto scenario_seed = derive_seed(c.seed, 0);
      tr = generate_power_control_dataset(c.scenario, scenario_seed, train_seed, c.samples, c.workers);
      te = generate_power_control_dataset(c.scenario, scenario_seed, test_seed, c.test_samples, c.workers);
    } else {
      tr = generate_precoding_dataset(c.sv, train_seed, c.samples, c.workers);
      te = generate_precoding_dataset(c.sv, test_seed, c.test_samples, c.workers);
    }
    dataset_write(dataset_path(c.out, t, true), tr);
    dataset_write(dataset_path(c.out, t, false), te);
    const auto& m = tr.manifest;
    summary[short_name(t)] = {{"dims", {m.num_aps(), m.num_ues(), m.num_antennas()}},
                              {"train_samples", tr.samples.size()},
                              {"test_samples", te.samples.size()}};
  }
  write_run_manifest(c, summary);
  return summary;
}

Json cmd_train(const RunConfig& c) {
  if (c.method == Method::kWmmse) throw ConfigError("wmmse is not trainable; use the wmmse command");
  std::vector<Loaded> data;
  std::vector<BranchSpec> branches;
  for (Task t : tasks_of(c.task)) {
    data.push_back(load_task(c.data_dir, t, true));
    if (data.back().train.samples.empty()) throw ConfigError("training set is empty");
    branches.push_back(branch_for(data.back().train.manifest, resolved_tau(c, t)));
  }
  std::vector<TaskData> views;
  for (const auto& d : data) views.push_back({d.task, d.train.samples, d.test.samples});
  TrainConfig tc = c.train;
  tc.seed = c.seed;
  tc.workers = c.workers;

  auto result = train(init_model(model_config_for(c, branches), c.seed), views, tc);
  checkpoint_write(c.out / "model.json", result.model);
  write_history_csv(c.out / "history.csv", result.history);

  Json summary{{"method", method_name(c.method)},
               {"best_epoch", result.best_epoch},
               {"epochs_run", result.history.size()},
               {"initial_objective", result.initial_objective},
               {"checkpoint", (c.out / "model.json").string()}};
  const InferenceEngine engine(result.model);
  for (const auto& b : result.model.branches) {
    const auto& d = *std::find_if(data.begin(), data.end(), [&](const Loaded& l) { return l.task == b.spec.task; });
    summary[short_name(b.spec.task)] = {
        {"tau", b.spec.tau},
        {"retained_links", b.sparse.retained()},
        {"total_links", b.spec.shape.links()},
        {"test_mean_se", mean_of(evaluate_sum_se(engine, b.spec.task, d.test.samples, b.spec.noise_power, c.workers))}};
  }
  write_run_manifest(c, summary);
  return summary;
}

Json cmd_sweep(const RunConfig& c) {
  std::vector<Loaded> data;
  std::vector<BranchSpec> branches;
  for (Task t : tasks_of(c.task)) {
    data.push_back(load_task(c.data_dir, t, true));
    branches.push_back(branch_for(data.back().train.manifest, 0.0));
  }
  std::vector<TaskData> views;
  for (const auto& d : data) views.push_back({d.task, d.train.samples, d.test.samples});
  std::vector<double> taus = c.taus;
  if (taus.empty())
    for (int i = 0; i <= 10; ++i) taus.push_back(0.5 + 0.02 * i);
  RunConfig rc = c;
  rc.method = Method::kSpMdgnn;
  TrainConfig tc = c.train;
  tc.seed = c.seed;
  tc.workers = 1;
  const auto out = sweep_threshold(model_config_for(rc, branches), views, taus, tc, c.workers);
  write_sweep_csv(c.out / "sweep.csv", out);

  std::size_t best = 0;
  for (std::size_t i = 1; i < out.rows.size(); ++i)
    if (out.rows[i].harmonic > out.rows[best].harmonic) best = i;
  Json rows = Json::array();
  for (const auto& r : out.rows) {
    rows.push_back({{"tau", r.tau}, {"sparsity", r.sparsity}, {"retention", r.retention},
                    {"harmonic", r.harmonic}, {"mean_se", r.mean_se},
                    {"inference_seconds", r.inference_seconds}});
  }
  Json summary{{"dense_mean_se", out.dense.mean_se},
               {"dense_inference_seconds", out.dense.inference_seconds},
               {"rows", rows},
               {"argmax_tau", out.rows.empty() ? Json(nullptr) : Json(out.rows[best].tau)},
               {"reference_tau", 0.63},
               {"interior_peak", !out.rows.empty() && best > 0 && best + 1 < out.rows.size()}};
  write_json_file(c.out / "sweep.json", summary);
  write_run_manifest(c, summary);
  return summary;
}

Json cmd_bench(const RunConfig& c) {
  std::vector<Loaded> data;
  for (Task t : tasks_of(c.task)) data.push_back(load_task(c.data_dir, t, false));

  Json methods = Json::object();
  // WMMSE reference: iterative, so its time grows with the iteration count.
  {
    Json m{{"iterative", true}};
    for (const auto& d : data) {
      const auto& samples = d.test.samples;
      std::vector<double> se(samples.size());
      std::vector<double> iters(samples.size());
      const double p_max = d.test.manifest.p_max(), noise = d.test.manifest.noise_power();
      const auto t0 = std::chrono::steady_clock::now();
      for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto r = wmmse_solve(samples[i], p_max, noise, c.wmmse);
        se[i] = r.trace.back();
        iters[i] = static_cast<double>(r.iterations);
      }
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() /
                          static_cast<double>(samples.size());
      write_cdf_csv(c.out / ("cdf_wmmse_" + short_name(d.task) + ".csv"), empirical_cdf(se));
      m[short_name(d.task)] = {{"se", summary_of(se)},
                               {"seconds_per_sample", secs},
                               {"mean_iterations", mean_of(iters)}};
    }
    methods["wmmse"] = m;
  }

  for (const auto& entry : c.checkpoints) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos) throw ConfigError("checkpoint entries look like method=path, got '" + entry + "'");
    const std::string name = entry.substr(0, eq);
    const fs::path path = entry.substr(eq + 1);
    if (!fs::exists(path)) throw IoError("missing checkpoint " + path.string());
    const auto model = checkpoint_read(path);
    const InferenceEngine engine(model);
    Json m{{"iterative", false}, {"checkpoint", path.string()}};
    for (const auto& d : data) {
      if (!engine.has(d.task)) continue;
      const auto& b = model.branch(d.task);
      const auto se = evaluate_sum_se(engine, d.task, d.test.samples, b.spec.noise_power, c.workers);
      write_cdf_csv(c.out / ("cdf_" + name + "_" + short_name(d.task) + ".csv"), empirical_cdf(se));
      m[short_name(d.task)] = {
          {"se", summary_of(se)},
          {"seconds_per_sample", time_inference(engine, d.task, d.test.samples, c.timing_repeats)},
          {"multiply_adds", engine.multiply_adds(d.task)},
          {"retained_links", engine.retained_links(d.task)},
          {"total_links", engine.total_links(d.task)}};
    }
    methods[name] = m;
  }

  Json relative = Json::object();
  if (methods.contains("mdgnn")) {
    const auto& ref = methods["mdgnn"];
    for (auto& [name, m] : methods.items()) {
      if (name == "mdgnn") continue;
      Json r = Json::object();
      for (const auto& d : data) {
        const auto t = short_name(d.task);
        if (!m.contains(t) || !ref.contains(t)) continue;
        r[t] = {{"se_ratio", m[t]["se"]["mean"].get<double>() / ref[t]["se"]["mean"].get<double>()},
                {"time_ratio", m[t]["seconds_per_sample"].get<double>() /
                                   ref[t]["seconds_per_sample"].get<double>()}};
      }
      relative[name] = r;
    }
  }
  Json summary{{"methods", methods}, {"relative_to_mdgnn", relative},
               {"timing_note", "single-worker wall clock; excluded from determinism checks"}};
  write_json_file(c.out / "bench.json", summary);
  write_run_manifest(c, summary);
  return summary;
}

Json cmd_wmmse(const RunConfig& c) {
  Json summary = Json::object();
  fs::create_directories(c.out);
  for (Task t : tasks_of(c.task)) {
    auto d = load_task(c.data_dir, t, false);
    const std::size_t n = std::min(c.samples, d.test.samples.size());
    const double p_max = d.test.manifest.p_max(), noise = d.test.manifest.noise_power();
    std::vector<WmmseResult> res(n);
    parallel_for(n, c.workers, [&](std::size_t i) { res[i] = wmmse_solve(d.test.samples[i], p_max, noise, c.wmmse); });
    std::ofstream trace(c.out / ("wmmse_trace_" + short_name(t) + ".csv"));
    if (!trace) throw IoError("cannot write WMMSE trace");
    trace.precision(17);
    trace << "sample,iteration,sum_se\n";
    std::vector<double> se;
    bool feasible = true;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < res[i].trace.size(); ++k) trace << i << ',' << k << ',' << res[i].trace[k] << '\n';
      se.push_back(res[i].trace.back());
      feasible = feasible && power_feasible(res[i].precoder, p_max);
    }
    summary[short_name(t)] = {{"se", summary_of(se)}, {"all_feasible", feasible}};
  }
  write_run_manifest(c, summary);
  return summary;
}

Json cmd_eval(const RunConfig& c) {
  const auto model = checkpoint_read(c.checkpoint);
  const InferenceEngine engine(model);
  Json summary = Json::object();
  for (const auto& b : model.branches) {
    auto d = load_task(c.data_dir, b.spec.task, false);
    const auto se = evaluate_sum_se(engine, b.spec.task, d.test.samples, b.spec.noise_power, c.workers);
    write_cdf_csv(c.out / ("cdf_eval_" + short_name(b.spec.task) + ".csv"), empirical_cdf(se));
    summary[short_name(b.spec.task)] = {{"se", summary_of(se)},
                                        {"retained_links", b.sparse.retained()},
                                        {"total_links", b.spec.shape.links()}};
  }
  write_json_file(c.out / "eval.json", summary);
  write_run_manifest(c, summary);
  return summary;
}

Json run_command(const RunConfig& c) {
  if (c.command == "gen") return cmd_gen(c);
  if (c.command == "train") return cmd_train(c);
  if (c.command == "sweep") return cmd_sweep(c);
  if (c.command == "bench") return cmd_bench(c);
  if (c.command == "wmmse") return cmd_wmmse(c);
  if (c.command == "eval") return cmd_eval(c);
  throw ConfigError("unknown command '" + c.command + "'");
}

}  // namespace cfmimo::cli

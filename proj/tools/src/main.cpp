// SPDX-License-Identifier: Apache-2.0
#include <CLI11.hpp>
#include <iostream>
#include <optional>

#include "cfmimo/error.hpp"
#include "cfmimo_cli/commands.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> method;
  std::optional<double> tau;
  std::optional<double> alpha;
  std::optional<std::size_t> samples;
  std::optional<std::size_t> test_samples;
  std::optional<std::string> out;
  std::optional<std::size_t> workers;
  std::optional<std::string> task;
  std::optional<std::string> data;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> hidden;
  std::optional<double> lr;
  std::optional<double> mask_penalty;
  std::vector<double> taus;
  std::vector<std::string> checkpoints;
  std::optional<std::string> checkpoint;
};

void print_error(const std::string& cls, const std::string& msg) {
  nlohmann::json e{{"error_class", cls}, {"message", msg}};
  std::cerr << e.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cell-free MIMO power control and precoding: datasets, WMMSE, sparse MDGNN"};
  app.require_subcommand(1);
  Flags f;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "JSON config file (a run.json also works)");
    sub->add_option("--seed", f.seed, "global seed");
    sub->add_option("--out", f.out, "output directory");
    sub->add_option("--workers", f.workers, "worker threads");
    sub->add_option("--task", f.task, "pc, prec or joint");
    sub->add_option("--data", f.data, "dataset directory");
  };
  auto* gen = app.add_subcommand("gen", "generate train/test datasets");
  auto* tr = app.add_subcommand("train", "train MDGNN / SP-MDGNN / A-MDGNN");
  auto* sw = app.add_subcommand("sweep", "threshold sweep with harmonic scoring");
  auto* be = app.add_subcommand("bench", "SE and single-worker timing for every method");
  auto* wm = app.add_subcommand("wmmse", "solve the test set with WMMSE");
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on the test set");
  for (auto* s : {gen, tr, sw, be, wm, ev}) add_common(s);

  gen->add_option("--samples", f.samples, "training samples");
  gen->add_option("--test-samples", f.test_samples, "test samples");
  wm->add_option("--samples", f.samples, "number of test samples to solve");
  for (auto* s : {tr, sw}) {
    s->add_option("--alpha", f.alpha, "joint loss weight of the power-control head");
    s->add_option("--epochs", f.epochs, "maximum epochs");
    s->add_option("--hidden", f.hidden, "hidden width");
    s->add_option("--lr", f.lr, "learning rate");
    s->add_option("--mask-penalty", f.mask_penalty, "adjacency penalty for sparse heads");
  }
  tr->add_option("--method", f.method, "mdgnn, sp-mdgnn or a-mdgnn");
  tr->add_option("--tau", f.tau, "threshold for every head (sp-mdgnn)");
  sw->add_option("--taus", f.taus, "threshold grid")->delimiter(',');
  be->add_option("--checkpoints", f.checkpoints, "method=path entries")->delimiter(',');
  ev->add_option("--checkpoint", f.checkpoint, "checkpoint manifest");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 64;
  }

  try {
    cfmimo::cli::RunConfig c;
    if (!f.config.empty()) cfmimo::cli::apply_json(cfmimo::read_json_file(f.config), c);
    c.command = app.get_subcommands().front()->get_name();
    if (f.seed) c.seed = *f.seed;
    if (f.method) c.method = cfmimo::parse_method(*f.method);
    if (f.tau) c.tau = *f.tau;
    if (f.alpha) c.train.alpha = *f.alpha;
    if (f.samples) c.samples = *f.samples;
    if (f.test_samples) c.test_samples = *f.test_samples;
    if (f.out) c.out = *f.out;
    if (f.workers) c.workers = *f.workers;
    if (f.task) c.task = cfmimo::cli::parse_task_sel(*f.task);
    if (f.data) c.data_dir = *f.data;
    if (f.epochs) c.train.epochs = *f.epochs;
    if (f.hidden) c.hidden = *f.hidden;
    if (f.lr) c.train.learning_rate = *f.lr;
    if (f.mask_penalty) c.train.mask_penalty = *f.mask_penalty;
    if (!f.taus.empty()) c.taus = f.taus;
    if (!f.checkpoints.empty()) c.checkpoints = f.checkpoints;
    if (f.checkpoint) c.checkpoint = *f.checkpoint;
    std::cout << cfmimo::cli::run_command(c).dump(2) << '\n';
  } catch (const cfmimo::Error& e) {
    print_error(e.error_class(), e.what());
    return 2;
  } catch (const std::exception& e) {
    print_error("internal_error", e.what());
    return 3;
  }
  return 0;
}

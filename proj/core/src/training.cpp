// SPDX-License-Identifier: Apache-2.0
#include "cfmimo/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "cfmimo/error.hpp"
#include "cfmimo/parallel.hpp"
#include "cfmimo/rng.hpp"

namespace cfmimo {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (!(learning_rate >= 0.0) || !(mask_learning_rate >= 0.0)) {
    throw ConfigError("learning rates must be non-negative");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam moments must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (!(tau_pc >= 0.0 && tau_pc <= 1.0) || !(tau_prec >= 0.0 && tau_prec <= 1.0)) {
    throw ConfigError("tau must lie in [0, 1]");
  }
  if (!(mask_penalty >= 0.0)) throw ConfigError("mask penalty must be non-negative");
  if (chunk_size < 1) throw ConfigError("chunk size must be >= 1");
}

namespace {
template <class T>
void get_if(const Json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}
}  // namespace

void to_json(Json& j, const TrainConfig& c) {
  j = Json{{"batch_size", c.batch_size},
           {"learning_rate", c.learning_rate},
           {"beta1", c.beta1},
           {"beta2", c.beta2},
           {"epsilon", c.epsilon},
           {"epochs", c.epochs},
           {"patience", c.patience},
           {"seed", seed_to_json(c.seed)},
           {"alpha", c.alpha},
           {"tau_pc", c.tau_pc},
           {"tau_prec", c.tau_prec},
           {"mask_learning_rate", c.mask_learning_rate},
           {"mask_penalty", c.mask_penalty},
           {"chunk_size", c.chunk_size},
           {"workers", c.workers}};
}

void from_json(const Json& j, TrainConfig& c) {
  get_if(j, "batch_size", c.batch_size);
  get_if(j, "learning_rate", c.learning_rate);
  get_if(j, "beta1", c.beta1);
  get_if(j, "beta2", c.beta2);
  get_if(j, "epsilon", c.epsilon);
  get_if(j, "epochs", c.epochs);
  get_if(j, "patience", c.patience);
  if (auto it = j.find("seed"); it != j.end()) c.seed = seed_from_json(*it);
  get_if(j, "alpha", c.alpha);
  get_if(j, "tau_pc", c.tau_pc);
  get_if(j, "tau_prec", c.tau_prec);
  get_if(j, "mask_learning_rate", c.mask_learning_rate);
  get_if(j, "mask_penalty", c.mask_penalty);
  get_if(j, "chunk_size", c.chunk_size);
  get_if(j, "workers", c.workers);
}

double channel_rms(std::span<const ChannelTensor> samples) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& h : samples) {
    for (auto z : h.gains()) s += std::norm(z);
    n += h.size();
  }
  if (n == 0 || !(s > 0.0)) return 1.0;
  return std::sqrt(s / static_cast<double>(n));
}

void adam_step(std::span<RealTensor* const> params, std::span<const RealTensor> grads,
               std::span<const double> lr, AdamState& state, const TrainConfig& config) {
  if (grads.size() != params.size() || lr.size() != params.size()) {
    throw ShapeError("adam_step: parameter, gradient and step-size counts differ");
  }
  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.emplace_back(p->shape());
      state.v.emplace_back(p->shape());
    }
  }
  ++state.t;
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    const auto& g = grads[i];
    if (g.shape() != p.shape()) throw ShapeError("adam_step: gradient shape mismatch");
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t e = 0; e < p.size(); ++e) {
      m[e] = config.beta1 * m[e] + (1.0 - config.beta1) * g[e];
      v[e] = config.beta2 * v[e] + (1.0 - config.beta2) * g[e] * g[e];
      if (m[e] == 0.0) continue;
      p[e] -= lr[i] * (m[e] / c1) / (std::sqrt(v[e] / c2) + config.epsilon);
    }
  }
}

std::vector<double> evaluate_sum_se(const InferenceEngine& engine, Task task,
                                    std::span<const ChannelTensor> samples, double noise_power,
                                    std::size_t workers) {
  std::vector<double> out(samples.size());
  parallel_for(samples.size(), workers, [&](std::size_t i) {
    out[i] = sum_se(samples[i], engine.run(task, samples[i]), noise_power).sum_se;
  });
  return out;
}

double time_inference(const InferenceEngine& engine, Task task,
                      std::span<const ChannelTensor> samples, std::size_t repeats) {
  if (samples.empty() || repeats == 0) return 0.0;
  double sink = 0.0;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t r = 0; r < repeats; ++r)
    for (const auto& h : samples) sink += std::real(engine.run(task, h).entries()[0]);
  const auto t1 = std::chrono::steady_clock::now();
  volatile double keep = sink;
  (void)keep;
  return std::chrono::duration<double>(t1 - t0).count() /
         static_cast<double>(samples.size() * repeats);
}

namespace {

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::vector<double> loss_weights(const GnnModel& model) {
  std::vector<double> w(model.branches.size(), 1.0);
  if (model.branches.size() == 2) {
    for (std::size_t b = 0; b < 2; ++b) {
      w[b] = model.branches[b].spec.task == Task::kPowerControl ? model.config.alpha
                                                                : 1.0 - model.config.alpha;
    }
  }
  return w;
}

struct Evaluation {
  double objective = 0.0;
  std::vector<double> se;
};

Evaluation evaluate(const GnnModel& model, const std::vector<const TaskData*>& data,
                    std::size_t workers) {
  const InferenceEngine engine(model);
  const auto w = loss_weights(model);
  Evaluation e;
  for (std::size_t b = 0; b < model.branches.size(); ++b) {
    const auto& spec = model.branches[b].spec;
    const double se = mean_of(evaluate_sum_se(engine, spec.task, data[b]->test, spec.noise_power, workers));
    e.se.push_back(se);
    e.objective += w[b] * se;
  }
  return e;
}

std::vector<std::size_t> shuffled(std::size_t n, std::uint64_t seed, std::uint64_t stream) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  CounterRng rng(seed, stream);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
    std::swap(p[i - 1], p[std::min(j, i - 1)]);
  }
  return p;
}

struct ChunkJob {
  std::size_t branch = 0;
  std::vector<const ChannelTensor*> samples;
  double weight = 0.0;   // multiplies the chunk's mean loss
  bool penalty = false;  // carries the branch's adjacency penalty
};

struct ChunkOutcome {
  double loss = 0.0;
  std::vector<RealTensor> grads;
};

}  // namespace

TrainResult train(GnnModel model, std::span<const TaskData> data, const TrainConfig& config) {
  config.validate();
  std::vector<const TaskData*> per_branch(model.branches.size(), nullptr);
  for (std::size_t b = 0; b < model.branches.size(); ++b) {
    for (const auto& d : data)
      if (d.task == model.branches[b].spec.task) per_branch[b] = &d;
    if (per_branch[b] == nullptr) {
      throw ConfigError("no data for the " + std::string(task_name(model.branches[b].spec.task)) + " head");
    }
    if (per_branch[b]->train.empty() || per_branch[b]->test.empty()) {
      throw ConfigError("train and test sets must be nonempty");
    }
    const auto& sh = model.branches[b].spec.shape;
    for (const auto* set : {&per_branch[b]->train, &per_branch[b]->test}) {
      const auto& h = set->front();
      if (h.num_aps() != sh.aps || h.num_ues() != sh.ues || h.num_antennas() != sh.antennas) {
        throw ShapeError("dataset samples do not match the " +
                         std::string(task_name(model.branches[b].spec.task)) + " head shape");
      }
    }
    model.branches[b].input_scale =
        static_cast<double>(static_cast<float>(channel_rms(per_branch[b]->train)));
  }

  const auto weights = loss_weights(model);
  const auto params = model.parameters();
  const std::size_t mask_off = model.mask_parameter_offset();
  std::vector<double> lr(params.size(), config.learning_rate);
  for (std::size_t i = mask_off; i < params.size(); ++i) lr[i] = config.mask_learning_rate;

  std::size_t longest = 0;
  for (const auto* d : per_branch) longest = std::max(longest, d->train.size());
  const std::size_t steps = (longest + config.batch_size - 1) / config.batch_size;

  TrainResult result;
  const auto initial = evaluate(model, per_branch, config.workers);
  result.initial_objective = initial.objective;
  double best = -INFINITY;
  GnnModel best_model = model;
  std::size_t since_best = 0;
  AdamState adam;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<std::vector<std::size_t>> perm;
    for (std::size_t b = 0; b < per_branch.size(); ++b) {
      perm.push_back(shuffled(per_branch[b]->train.size(), derive_seed(config.seed, epoch), b));
    }
    double epoch_loss = 0.0;
    for (std::size_t s = 0; s < steps; ++s) {
      const std::size_t lo = s * config.batch_size;
      const std::size_t hi = std::min(lo + config.batch_size, longest);
      std::vector<ChunkJob> jobs;
      for (std::size_t b = 0; b < per_branch.size(); ++b) {
        const auto& set = per_branch[b]->train;
        const bool penalize = config.mask_penalty > 0.0 && model.branches[b].sparse.tau > 0.0;
        for (std::size_t c = lo; c < hi; c += config.chunk_size) {
          ChunkJob job;
          job.branch = b;
          for (std::size_t i = c; i < std::min(c + config.chunk_size, hi); ++i) {
            job.samples.push_back(&set[perm[b][i % set.size()]]);
          }
          job.weight = weights[b] * static_cast<double>(job.samples.size()) /
                       static_cast<double>(hi - lo);
          job.penalty = penalize && c == lo;
          jobs.push_back(std::move(job));
        }
      }

      std::vector<ChunkOutcome> out(jobs.size());
      parallel_for(jobs.size(), config.workers, [&](std::size_t i) {
        const auto& job = jobs[i];
        Tape tape;
        const auto binding = bind_parameters(tape, model, true);
        const auto g = build_branch_graph(tape, model, binding, job.branch, job.samples);
        NodeId loss = tape.scale(g.loss, job.weight);
        if (job.penalty) {
          NodeId a = g.adjacency;
          for (int ax = 4; ax >= 0; --ax) a = tape.sum(a, ax);
          a = tape.reshape(a, tape.value(loss).shape());
          const double links = static_cast<double>(model.branches[job.branch].spec.shape.links());
          // Weighted like the branch's loss term, so a joint model pays each
          // head's penalty in proportion to that head's share of the objective.
          loss = tape.add(loss, tape.scale(a, weights[job.branch] * config.mask_penalty / links));
        }
        out[i].loss = tape.value(loss).item();
        auto grads = tape.backward(loss);
        for (auto id : binding.ids) out[i].grads.push_back(grads.take(id));
      });

      std::vector<RealTensor> total = std::move(out[0].grads);
      double step_loss = out[0].loss;
      for (std::size_t i = 1; i < out.size(); ++i) {
        step_loss += out[i].loss;
        for (std::size_t p = 0; p < total.size(); ++p)
          for (std::size_t e = 0; e < total[p].size(); ++e) total[p][e] += out[i].grads[p][e];
      }
      bool finite = std::isfinite(step_loss);
      for (const auto& g : total) finite = finite && g.all_finite();
      if (!finite) {
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ", step " +
                              std::to_string(s + 1) + " (loss " + std::to_string(step_loss) + ")");
      }
      adam_step(params, total, lr, adam, config);
      ++model.step;
      epoch_loss += step_loss;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / static_cast<double>(steps);
    const auto ev = evaluate(model, per_branch, config.workers);
    rec.test_objective = ev.objective;
    rec.test_se = ev.se;
    for (const auto& b : model.branches) rec.retained.push_back(b.sparse.retained());
    result.history.push_back(rec);

    if (ev.objective > best) {
      best = ev.objective;
      best_model = model;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (config.patience > 0 && ++since_best >= config.patience) {
      break;
    }
  }
  if (config.epochs == 0) best_model = model;
  round_parameters_to_float(best_model);
  result.model = std::move(best_model);
  return result;
}

double harmonic_score(double sparsity, double retention) {
  if (!(sparsity >= 0.0 && sparsity <= 1.0) || !(retention >= 0.0 && retention <= 1.0)) {
    throw DomainError("harmonic score needs S and P in [0, 1]");
  }
  const double d = sparsity + retention;
  return d > 0.0 ? 2.0 * sparsity * retention / d : 0.0;
}

namespace {

struct Trained {
  GnnModel model;
  double objective = 0.0;
};

ModelConfig with_tau(ModelConfig c, double tau) {
  for (auto& b : c.branches) b.tau = tau;
  return c;
}

double objective_of(const GnnModel& model, std::span<const TaskData> data) {
  std::vector<const TaskData*> per_branch;
  for (const auto& b : model.branches)
    for (const auto& d : data)
      if (d.task == b.spec.task) per_branch.push_back(&d);
  return evaluate(model, per_branch, 1).objective;
}

double time_model(const GnnModel& model, std::span<const TaskData> data) {
  const InferenceEngine engine(model);
  double t = 0.0;
  for (const auto& b : model.branches)
    for (const auto& d : data)
      if (d.task == b.spec.task) t += time_inference(engine, d.task, d.test);
  return t;
}

}  // namespace

SweepOutput sweep_threshold(const ModelConfig& model_template, std::span<const TaskData> data,
                            std::span<const double> taus, const TrainConfig& config,
                            std::size_t sweep_workers) {
  for (double t : taus)
    if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("sweep tau outside [0, 1]");
  std::vector<double> grid(taus.begin(), taus.end());
  std::sort(grid.begin(), grid.end());

  // index 0 is the dense reference
  std::vector<double> all{0.0};
  all.insert(all.end(), grid.begin(), grid.end());
  std::vector<Trained> trained(all.size());
  parallel_for(all.size(), sweep_workers, [&](std::size_t i) {
    auto model = init_model(with_tau(model_template, all[i]), config.seed);
    auto r = train(std::move(model), data, config);
    trained[i].objective = objective_of(r.model, data);
    trained[i].model = std::move(r.model);
  });

  SweepOutput out;
  const double dense_obj = trained[0].objective;
  auto row = [&](const Trained& t, double tau) {
    SweepResult r;
    r.tau = tau;
    std::size_t kept = 0, total = 0;
    for (const auto& b : t.model.branches) {
      kept += b.sparse.retained();
      total += b.spec.shape.links();
    }
    r.sparsity = 1.0 - static_cast<double>(kept) / static_cast<double>(total);
    r.retention = dense_obj > 0.0 ? std::clamp(t.objective / dense_obj, 0.0, 1.0) : 0.0;
    r.harmonic = harmonic_score(r.sparsity, r.retention);
    r.mean_se = t.objective;
    r.inference_seconds = time_model(t.model, data);  // sequential, single worker
    return r;
  };
  out.dense = row(trained[0], 0.0);
  for (std::size_t i = 1; i < all.size(); ++i) out.rows.push_back(row(trained[i], all[i]));
  return out;
}

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  out << "epoch,loss,test_se";
  const std::size_t nb = history.empty() ? 0 : history.front().test_se.size();
  for (std::size_t b = 0; b < nb; ++b) out << ",test_se_head" << b << ",retained_head" << b;
  out << '\n';
  for (const auto& r : history) {
    out << r.epoch << ',' << r.train_loss << ',' << r.test_objective;
    for (std::size_t b = 0; b < r.test_se.size(); ++b) out << ',' << r.test_se[b] << ',' << r.retained[b];
    out << '\n';
  }
}

void write_sweep_csv(const std::filesystem::path& path, const SweepOutput& sweep) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  out << "tau,sparsity,retention,harmonic,mean_se,inference_seconds\n";
  for (const auto& r : sweep.rows) {
    out << r.tau << ',' << r.sparsity << ',' << r.retention << ',' << r.harmonic << ','
        << r.mean_se << ',' << r.inference_seconds << '\n';
  }
}

}  // namespace cfmimo

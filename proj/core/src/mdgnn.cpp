// SPDX-License-Identifier: Apache-2.0
#include "cfmimo/mdgnn.hpp"

#include <cmath>
#include <string>

#include "cfmimo/error.hpp"
#include "cfmimo/rng.hpp"

namespace cfmimo {

namespace {

constexpr double kPowerFloor = 1e-20;
constexpr std::uint64_t kInitStream = 0x1417;

// Same expression as the tape's sigmoid so both paths agree bit-for-bit.
double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void expect_rank(const RealTensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(what) + " must have rank " + std::to_string(rank) + ", got " +
                     to_string(t.shape()));
  }
}

// 1 / count of retained links along `axis`, 0 where none are retained.
RealTensor inverse_counts(const RealTensor& mask, std::size_t axis) {
  Shape out = mask.shape();
  out[axis] = 1;
  RealTensor c(out);
  const auto st = strides_of(mask.shape());
  const auto so = strides_of(out);
  const Shape& s = mask.shape();
  for (std::size_t i = 0; i < mask.size(); ++i) {
    std::size_t rem = i, o = 0;
    for (std::size_t ax = 0; ax < s.size(); ++ax) {
      const std::size_t idx = rem / st[ax];
      rem %= st[ax];
      if (ax != axis) o += idx * so[ax];
    }
    c[o] += mask[i];
  }
  for (auto& v : c.data()) v = v > 0.0 ? 1.0 / v : 0.0;
  return c;
}

}  // namespace

RealTensor SparseLayerState::adjacency() const {
  RealTensor a(w.shape());
  for (std::size_t i = 0; i < w.size(); ++i) a[i] = sigmoid(w[i]);
  return a;
}

RealTensor SparseLayerState::mask() const {
  RealTensor m(w.shape());
  for (std::size_t i = 0; i < w.size(); ++i) m[i] = sigmoid(w[i]) > tau ? 1.0 : 0.0;
  return m;
}

std::size_t SparseLayerState::retained() const {
  std::size_t r = 0;
  for (double v : w.data()) r += sigmoid(v) > tau ? 1 : 0;
  return r;
}

SparseForward sparse_forward(const RealTensor& h_features, const SparseLayerState& state) {
  expect_rank(h_features, 4, "sparse layer input");
  const Shape lead(h_features.shape().begin(), h_features.shape().end() - 1);
  if (lead != state.w.shape() || h_features.shape().back() != 2) {
    throw ShapeError("sparse layer: W " + to_string(state.w.shape()) +
                     " does not match channel features " + to_string(h_features.shape()));
  }
  SparseForward out{RealTensor(h_features.shape()), state.adjacency(), state.mask()};
  for (std::size_t i = 0; i < out.m.size(); ++i) {
    out.h_sparse[2 * i] = h_features[2 * i] * out.m[i];
    out.h_sparse[2 * i + 1] = h_features[2 * i + 1] * out.m[i];
  }
  return out;
}

RealTensor channel_features(const ChannelTensor& h, double scale) {
  RealTensor x({h.num_aps(), h.num_ues(), h.num_antennas(), 2});
  const auto g = h.gains();
  for (std::size_t i = 0; i < g.size(); ++i) {
    x[2 * i] = g[i].real() / scale;
    x[2 * i + 1] = g[i].imag() / scale;
  }
  return x;
}

RealTensor mdgnn_layer(const RealTensor& x, const GnnLayerParams& params,
                       const RealTensor& a_masked) {
  expect_rank(x, 4, "layer input");
  expect_rank(a_masked, 3, "masked adjacency");
  const std::size_t L = x.dim(0), K = x.dim(1), N = x.dim(2), C = x.dim(3);
  if (a_masked.dim(0) != L || a_masked.dim(1) != K || a_masked.dim(2) != N) {
    throw ShapeError("layer: adjacency " + to_string(a_masked.shape()) + " vs features " +
                     to_string(x.shape()));
  }
  if (params.in_dim() != C) {
    throw ShapeError("layer expects " + std::to_string(params.in_dim()) + " channels, got " +
                     std::to_string(C));
  }
  const std::size_t D = params.out_dim();
  auto at = [&](std::size_t l, std::size_t k, std::size_t n) { return (l * K + k) * N + n; };

  std::vector<double> y(x.size());
  std::vector<double> c_ap(K * N, 0.0), c_ue(L * N, 0.0), c_ant(L * K, 0.0);
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t n = 0; n < N; ++n) {
        const double a = a_masked[at(l, k, n)];
        for (std::size_t c = 0; c < C; ++c) y[at(l, k, n) * C + c] = a * x[at(l, k, n) * C + c];
        if (a > 0.0) {
          c_ap[k * N + n] += 1;
          c_ue[l * N + n] += 1;
          c_ant[l * K + k] += 1;
        }
      }

  std::vector<double> m_ap(K * N * C, 0.0), m_ue(L * N * C, 0.0), m_ant(L * K * C, 0.0);
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t c = 0; c < C; ++c) {
          const double v = y[at(l, k, n) * C + c];
          m_ap[(k * N + n) * C + c] += v;
          m_ue[(l * N + n) * C + c] += v;
          m_ant[(l * K + k) * C + c] += v;
        }
  auto finish = [C](std::vector<double>& m, const std::vector<double>& cnt) {
    for (std::size_t g = 0; g < cnt.size(); ++g)
      for (std::size_t c = 0; c < C; ++c) m[g * C + c] = cnt[g] > 0 ? m[g * C + c] / cnt[g] : 0.0;
  };
  finish(m_ap, c_ap);
  finish(m_ue, c_ue);
  finish(m_ant, c_ant);

  RealTensor out({L, K, N, D});
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t d = 0; d < D; ++d) {
          double s = 0.0;
          for (std::size_t c = 0; c < C; ++c) {
            s += y[at(l, k, n) * C + c] * params.p[0][c * D + d];
            s += m_ap[(k * N + n) * C + c] * params.p[1][c * D + d];
            s += m_ue[(l * N + n) * C + c] * params.p[2][c * D + d];
            s += m_ant[(l * K + k) * C + c] * params.p[3][c * D + d];
          }
          if (params.activation == Activation::kRelu && s < 0.0) s = 0.0;
          out[at(l, k, n) * D + d] = s;
        }
  return out;
}

PrecoderTensor power_head(const RealTensor& x_last, double p_max) {
  expect_rank(x_last, 4, "power head input");
  if (x_last.dim(3) != 2) throw ShapeError("power head expects 2 output channels");
  const std::size_t L = x_last.dim(0), K = x_last.dim(1), N = x_last.dim(2);
  PrecoderTensor f(L, K, N, p_max);
  const std::size_t chunk = K * N * 2;
  for (std::size_t j = 0; j < L; ++j) {
    const double* px = x_last.data().data() + j * chunk;
    double p = 0.0;
    for (std::size_t i = 0; i < chunk; ++i) p += px[i] * px[i];
    if (p < kPowerFloor) continue;
    const double s = std::sqrt(p_max / p);
    auto e = f.entries();
    for (std::size_t i = 0; i < K * N; ++i) e[j * K * N + i] = {px[2 * i] * s, px[2 * i + 1] * s};
  }
  return f;
}

ComplexMatrix precoding_head(const RealTensor& x_last, double p_max) {
  expect_rank(x_last, 3, "precoding head input");
  if (x_last.dim(2) != 2) throw ShapeError("precoding head expects 2 output channels");
  const std::size_t K = x_last.dim(0), Nt = x_last.dim(1);
  double p = 0.0;
  for (double v : x_last.data()) p += v * v;
  ComplexMatrix f(Nt, K);
  if (p < kPowerFloor) return f;
  const double s = std::sqrt(p_max / p);
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t n = 0; n < Nt; ++n)
      f(n, k) = {x_last[(k * Nt + n) * 2] * s, x_last[(k * Nt + n) * 2 + 1] * s};
  return f;
}

double joint_loss(double l_power, double l_prec, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in [0, 1]");
  if (alpha == 1.0) return l_power;
  if (alpha == 0.0) return l_prec;
  return alpha * l_power + (1.0 - alpha) * l_prec;
}

RealTensor attention_scores(const RealTensor& h_features, const AttentionParams& params) {
  expect_rank(h_features, 4, "attention input");
  const std::size_t C = h_features.dim(3);
  if (params.wq.rank() != 2 || params.wq.dim(0) != C || params.wk.shape() != params.wq.shape()) {
    throw ShapeError("attention parameters do not match " + std::to_string(C) + " channels");
  }
  const std::size_t d = params.wq.dim(1);
  const double inv = 1.0 / std::sqrt(static_cast<double>(d));
  const std::size_t links = h_features.size() / C;
  RealTensor s({h_features.dim(0), h_features.dim(1), h_features.dim(2)});
  for (std::size_t i = 0; i < links; ++i) {
    double dot = 0.0;
    for (std::size_t e = 0; e < d; ++e) {
      double q = 0.0, k = 0.0;
      for (std::size_t c = 0; c < C; ++c) {
        q += h_features[i * C + c] * params.wq[c * d + e];
        k += h_features[i * C + c] * params.wk[c * d + e];
      }
      dot += q * k;
    }
    s[i] = sigmoid(dot * inv);
  }
  return s;
}

RealTensor normalize_scores(const RealTensor& scores, const RealTensor& mask, int axis) {
  expect_rank(scores, 3, "scores");
  if (mask.shape() != scores.shape()) throw ShapeError("score mask shape mismatch");
  if (axis < 0 || axis > 2) throw ShapeError("score axis must be 0, 1 or 2");
  RealTensor sm(scores.shape());
  for (std::size_t i = 0; i < sm.size(); ++i) sm[i] = scores[i] * mask[i];
  const auto ax = static_cast<std::size_t>(axis);
  const auto st = strides_of(sm.shape());
  Shape red = sm.shape();
  red[ax] = 1;
  const auto sr = strides_of(red);
  std::vector<double> tot(element_count(red), 0.0);
  auto reduced = [&](std::size_t i) {
    std::size_t rem = i, o = 0;
    for (std::size_t a = 0; a < 3; ++a) {
      const std::size_t idx = rem / st[a];
      rem %= st[a];
      if (a != ax) o += idx * sr[a];
    }
    return o;
  };
  for (std::size_t i = 0; i < sm.size(); ++i) tot[reduced(i)] += sm[i];
  RealTensor out(sm.shape());
  for (std::size_t i = 0; i < sm.size(); ++i) {
    const double t = tot[reduced(i)];
    out[i] = t > 0.0 ? sm[i] / t : 0.0;
  }
  return out;
}

std::string_view method_name(Method m) {
  switch (m) {
    case Method::kWmmse: return "wmmse";
    case Method::kMdgnn: return "mdgnn";
    case Method::kAMdgnn: return "a-mdgnn";
    case Method::kSpMdgnn: return "sp-mdgnn";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  if (name == "wmmse") return Method::kWmmse;
  if (name == "mdgnn") return Method::kMdgnn;
  if (name == "a-mdgnn") return Method::kAMdgnn;
  if (name == "sp-mdgnn") return Method::kSpMdgnn;
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

void ModelConfig::validate() const {
  if (branches.empty()) throw ConfigError("model needs at least one output head");
  if (branches.size() > 2) throw ConfigError("model supports at most two heads");
  if (branches.size() == 2 && branches[0].task == branches[1].task) {
    throw ConfigError("two heads for the same task");
  }
  if (hidden < 1 || layers < 1) throw ConfigError("model needs hidden >= 1 and layers >= 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (attention && attention_dim < 1) throw ConfigError("attention dimension must be >= 1");
  for (const auto& b : branches) {
    if (b.shape.aps < 1 || b.shape.ues < 1 || b.shape.antennas < 1) {
      throw ConfigError("branch shape needs L, K, N >= 1");
    }
    if (b.task == Task::kPrecoding && b.shape.aps != 1) {
      throw ConfigError("precoding branch is single-transmitter (L = 1)");
    }
    if (!(b.tau >= 0.0 && b.tau <= 1.0)) throw ConfigError("tau must lie in [0, 1]");
    if (!(b.p_max > 0.0) || !(b.noise_power > 0.0)) {
      throw ConfigError("branch P_max and noise power must be positive");
    }
  }
}

std::size_t GnnModel::branch_index(Task task) const {
  for (std::size_t i = 0; i < branches.size(); ++i)
    if (branches[i].spec.task == task) return i;
  throw ConfigError("model has no " + std::string(task_name(task)) + " head");
}

std::vector<RealTensor*> GnnModel::parameters() {
  std::vector<RealTensor*> out;
  for (auto& l : layers)
    for (auto& p : l.p) out.push_back(&p);
  if (!attention.empty()) {
    out.push_back(&attention.wq);
    out.push_back(&attention.wk);
  }
  for (auto& b : branches) out.push_back(&b.sparse.w);
  return out;
}

std::vector<const RealTensor*> GnnModel::parameters() const {
  auto v = const_cast<GnnModel*>(this)->parameters();
  return {v.begin(), v.end()};
}

std::size_t GnnModel::mask_parameter_offset() const {
  return layers.size() * 4 + (attention.empty() ? 0 : 2);
}

std::size_t GnnModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += p->size();
  return n;
}

GnnModel init_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  GnnModel m;
  m.config = config;
  m.seed = seed;
  CounterRng rng(derive_seed(seed, kInitStream), 0);
  auto uniform = [&](std::size_t rows, std::size_t cols) {
    RealTensor t({rows, cols});
    const double bound = std::sqrt(1.0 / static_cast<double>(rows));
    for (auto& v : t.data()) v = (2.0 * rng.uniform() - 1.0) * bound;
    return t;
  };
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::size_t in = l == 0 ? 2 : config.hidden;
    const std::size_t out = l + 1 == config.layers ? 2 : config.hidden;
    GnnLayerParams p;
    for (auto& mat : p.p) mat = uniform(in, out);
    p.activation = l + 1 == config.layers ? Activation::kIdentity : Activation::kRelu;
    m.layers.push_back(std::move(p));
  }
  if (config.attention) {
    m.attention.wq = uniform(2, config.attention_dim);
    m.attention.wk = uniform(2, config.attention_dim);
  }
  for (const auto& spec : config.branches) {
    TaskBranch b;
    b.spec = spec;
    b.sparse.tau = spec.tau;
    b.sparse.w = RealTensor({spec.shape.aps, spec.shape.ues, spec.shape.antennas}, config.w_init);
    m.branches.push_back(std::move(b));
  }
  // start on the float grid so checkpoints and zero-step training are exact
  round_parameters_to_float(m);
  return m;
}

void round_parameters_to_float(GnnModel& model) {
  for (auto* p : model.parameters())
    for (auto& v : p->data()) v = static_cast<double>(static_cast<float>(v));
  for (auto& b : model.branches) b.input_scale = static_cast<double>(static_cast<float>(b.input_scale));
}

TapeBinding bind_parameters(Tape& tape, const GnnModel& model, bool trainable) {
  TapeBinding b;
  for (const auto* p : model.parameters()) b.ids.push_back(tape.leaf(*p, trainable));
  return b;
}

BranchGraph build_branch_graph(Tape& tape, const GnnModel& model, const TapeBinding& binding,
                               std::size_t branch, std::span<const ChannelTensor* const> batch) {
  const auto& br = model.branches.at(branch);
  const auto& sh = br.spec.shape;
  const std::size_t B = batch.size(), L = sh.aps, K = sh.ues, N = sh.antennas;
  if (B == 0) throw DomainError("empty batch");

  RealTensor feat({B, L, K, N, 2});
  RealTensor hr({B, L, K, 1, N}), hi({B, L, K, 1, N});
  for (std::size_t b = 0; b < B; ++b) {
    const auto& h = *batch[b];
    if (h.num_aps() != L || h.num_ues() != K || h.num_antennas() != N) {
      throw ShapeError("sample is " + std::to_string(h.num_aps()) + "x" +
                       std::to_string(h.num_ues()) + "x" + std::to_string(h.num_antennas()) +
                       ", model branch expects " + std::to_string(L) + "x" + std::to_string(K) +
                       "x" + std::to_string(N));
    }
    const auto g = h.gains();
    const std::size_t off = b * L * K * N;
    for (std::size_t i = 0; i < L * K * N; ++i) {
      feat[2 * (off + i)] = g[i].real() / br.input_scale;
      feat[2 * (off + i) + 1] = g[i].imag() / br.input_scale;
      hr[off + i] = g[i].real();
      hi[off + i] = g[i].imag();
    }
  }

  const std::size_t w_id = model.mask_parameter_offset() + branch;
  const NodeId w = tape.reshape(binding.ids.at(w_id), {1, L, K, N, 1});
  const NodeId a = tape.sigmoid(w);
  const NodeId m = tape.threshold_ste(a, br.sparse.tau);
  const NodeId am = tape.mul(a, m);

  const RealTensor mask_value = tape.value(m);
  std::array<NodeId, 3> inv{};
  for (std::size_t ax = 0; ax < 3; ++ax) inv[ax] = tape.constant(inverse_counts(mask_value, ax + 1));

  const NodeId x0 = tape.mul(tape.constant(std::move(feat)), m);

  // Attention weights replace the plain means when the variant is enabled.
  std::array<NodeId, 3> att{};
  const bool use_att = !model.attention.empty();
  if (use_att) {
    const std::size_t d = model.attention.wq.dim(1);
    const NodeId q = tape.matmul(x0, binding.ids[model.layers.size() * 4]);
    const NodeId k = tape.matmul(x0, binding.ids[model.layers.size() * 4 + 1]);
    NodeId s = tape.sum(tape.mul(q, k), 4);
    s = tape.sigmoid(tape.scale(s, 1.0 / std::sqrt(static_cast<double>(d))));
    const NodeId sm = tape.mul(s, m);
    const NodeId tiny = tape.constant(RealTensor({1, 1, 1, 1, 1}, 1e-300));
    for (std::size_t ax = 0; ax < 3; ++ax) {
      att[ax] = tape.div(sm, tape.add(tape.sum(sm, static_cast<int>(ax + 1)), tiny));
    }
  }

  NodeId x = x0;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& lp = model.layers[l];
    const NodeId* p = &binding.ids[l * 4];
    NodeId out;
    if (!use_att) {
      const NodeId y = tape.mul(x, am);
      out = tape.matmul(y, p[0]);
      for (std::size_t ax = 0; ax < 3; ++ax) {
        const NodeId mean = tape.mul(tape.sum(y, static_cast<int>(ax + 1)), inv[ax]);
        out = tape.add(out, tape.matmul(mean, p[ax + 1]));
      }
    } else {
      out = tape.matmul(tape.mul(x, m), p[0]);
      for (std::size_t ax = 0; ax < 3; ++ax) {
        const NodeId agg = tape.sum(tape.mul(x, att[ax]), static_cast<int>(ax + 1));
        out = tape.add(out, tape.matmul(agg, p[ax + 1]));
      }
    }
    x = lp.activation == Activation::kRelu ? tape.relu(out) : out;
  }

  const NodeId f = tape.power_normalize(tape.mul(x, m), 2, br.spec.p_max);

  // SE of the batch. g(k, i) = sum_{j,n} conj(h_{j,k,n}) f_{j,i,n}.
  const NodeId fr = tape.reshape(tape.matmul(f, tape.constant(RealTensor({2, 1}, {1.0, 0.0}))),
                                 {B, L, 1, K, N});
  const NodeId fi = tape.reshape(tape.matmul(f, tape.constant(RealTensor({2, 1}, {0.0, 1.0}))),
                                 {B, L, 1, K, N});
  const NodeId hrn = tape.constant(std::move(hr));
  const NodeId hin = tape.constant(std::move(hi));
  auto reduce_ln = [&](NodeId t) { return tape.sum(tape.sum(t, 4), 1); };
  const NodeId re = reduce_ln(tape.add(tape.mul(hrn, fr), tape.mul(hin, fi)));
  const NodeId im = reduce_ln(tape.sub(tape.mul(hrn, fi), tape.mul(hin, fr)));
  const NodeId g2 = tape.reshape(tape.add(tape.square(re), tape.square(im)), {B, K, K});

  RealTensor eye({1, K, K}), off({1, K, K}, 1.0);
  for (std::size_t k = 0; k < K; ++k) {
    eye[k * K + k] = 1.0;
    off[k * K + k] = 0.0;
  }
  const NodeId signal = tape.sum(tape.mul(g2, tape.constant(std::move(eye))), 2);
  const NodeId interf = tape.add(tape.sum(tape.mul(g2, tape.constant(std::move(off))), 2),
                                 tape.constant(RealTensor({1, 1, 1}, br.spec.noise_power)));
  const NodeId se = tape.log2p1(tape.div(signal, interf));
  const NodeId total = tape.sum(tape.sum(se, 1), 0);
  const NodeId loss = tape.scale(total, -1.0 / static_cast<double>(B));
  return {f, loss, a};
}

PrecoderTensor tape_forward(const GnnModel& model, Task task, const ChannelTensor& h) {
  Tape tape;
  const auto binding = bind_parameters(tape, model, false);
  const ChannelTensor* one[] = {&h};
  const auto g = build_branch_graph(tape, model, binding, model.branch_index(task), one);
  const auto& v = tape.value(g.output);
  const auto& spec = model.branch(task).spec;
  PrecoderTensor f(spec.shape.aps, spec.shape.ues, spec.shape.antennas, spec.p_max);
  auto e = f.entries();
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = {v[2 * i], v[2 * i + 1]};
  return f;
}

}  // namespace cfmimo

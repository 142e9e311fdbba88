// SPDX-License-Identifier: Apache-2.0
#include "cfmimo/autodiff.hpp"

#include <Eigen/Core>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>

#include "cfmimo/error.hpp"

namespace cfmimo {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

constexpr double kPowerFloor = 1e-20;

// Strides of `in` viewed inside a broadcast result: zero along stretched axes.
std::vector<std::size_t> broadcast_strides(const Shape& in) {
  auto s = strides_of(in);
  for (std::size_t i = 0; i < in.size(); ++i)
    if (in[i] == 1) s[i] = 0;
  return s;
}

// Calls f(out_offset, a_offset, b_offset) for every element of `out`.
template <class F>
void broadcast_loop(const Shape& out, const std::vector<std::size_t>& sa,
                    const std::vector<std::size_t>& sb, F&& f) {
  const std::size_t r = out.size();
  const std::size_t total = element_count(out);
  if (total == 0) return;
  if (r == 0) {
    f(0, 0, 0);
    return;
  }
  const std::size_t inner = out[r - 1];
  const std::size_t ia_step = sa[r - 1];
  const std::size_t ib_step = sb[r - 1];
  std::vector<std::size_t> idx(r, 0);
  std::size_t o = 0, ia = 0, ib = 0;
  const std::size_t outer = total / inner;
  for (std::size_t t = 0; t < outer; ++t) {
    for (std::size_t i = 0; i < inner; ++i) f(o + i, ia + i * ia_step, ib + i * ib_step);
    o += inner;
    for (std::size_t ax = r - 1; ax-- > 0;) {
      ++idx[ax];
      ia += sa[ax];
      ib += sb[ax];
      if (idx[ax] < out[ax]) break;
      ia -= sa[ax] * out[ax];
      ib -= sb[ax] * out[ax];
      idx[ax] = 0;
    }
  }
}

std::size_t checked_axis(int axis, std::size_t rank, OpKind kind) {
  const int r = static_cast<int>(rank);
  if (axis < -r || axis >= r) {
    throw ShapeError(std::string(op_name(kind)) + ": axis " + std::to_string(axis) +
                     " out of range for rank " + std::to_string(rank));
  }
  return static_cast<std::size_t>(axis < 0 ? axis + r : axis);
}

struct AxisSplit {
  std::size_t outer = 1, n = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit a;
  for (std::size_t i = 0; i < axis; ++i) a.outer *= s[i];
  a.n = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) a.inner *= s[i];
  return a;
}

void expect_arity(OpKind kind, std::size_t got, std::size_t want) {
  if (got != want) {
    throw DomainError(std::string(op_name(kind)) + " expects " + std::to_string(want) +
                      " inputs, got " + std::to_string(got));
  }
}

template <class F>
RealTensor unary(const RealTensor& x, F&& f) {
  RealTensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return y;
}

template <class F>
RealTensor binary(const RealTensor& a, const RealTensor& b, F&& f) {
  Shape out = broadcast_shapes(a.shape(), b.shape());
  RealTensor y(out);
  if (a.shape() == b.shape()) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(a[i], b[i]);
    return y;
  }
  broadcast_loop(out, broadcast_strides(a.shape()), broadcast_strides(b.shape()),
                 [&](std::size_t o, std::size_t ia, std::size_t ib) { y[o] = f(a[ia], b[ib]); });
  return y;
}

// acc (shaped like an operand) += sign * g reduced over stretched axes.
void accumulate_reduced(RealTensor& acc, const RealTensor& g, double sign) {
  if (acc.shape() == g.shape()) {
    for (std::size_t i = 0; i < g.size(); ++i) acc[i] += sign * g[i];
    return;
  }
  const auto sa = broadcast_strides(acc.shape());
  broadcast_loop(g.shape(), sa, sa,
                 [&](std::size_t o, std::size_t ia, std::size_t) { acc[ia] += sign * g[o]; });
}

RealTensor power_normalize_forward(const RealTensor& x, std::size_t groups, double budget) {
  RealTensor y(x.shape());
  const std::size_t chunk = groups ? x.size() / groups : 0;
  for (std::size_t gi = 0; gi < groups; ++gi) {
    const double* px = x.data().data() + gi * chunk;
    double* py = y.data().data() + gi * chunk;
    double p = 0.0;
    for (std::size_t i = 0; i < chunk; ++i) p += px[i] * px[i];
    if (p < kPowerFloor) continue;
    const double s = std::sqrt(budget / p);
    for (std::size_t i = 0; i < chunk; ++i) py[i] = px[i] * s;
  }
  return y;
}

std::size_t group_count(const Shape& s, int group_rank) {
  if (group_rank < 0 || static_cast<std::size_t>(group_rank) > s.size()) {
    throw ShapeError("power_normalize: group rank " + std::to_string(group_rank) +
                     " invalid for shape " + to_string(s));
  }
  std::size_t g = 1;
  for (int i = 0; i < group_rank; ++i) g *= s[static_cast<std::size_t>(i)];
  return g;
}

}  // namespace

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kConstant: return "constant";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kDiv: return "div";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kSum: return "sum";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kRelu: return "relu";
    case OpKind::kSquare: return "square";
    case OpKind::kSqrt: return "sqrt";
    case OpKind::kLog2P1: return "log2p1";
    case OpKind::kExp: return "exp";
    case OpKind::kBroadcast: return "broadcast";
    case OpKind::kConcat: return "concat";
    case OpKind::kScale: return "scale";
    case OpKind::kReshape: return "reshape";
    case OpKind::kThresholdSte: return "threshold_ste";
    case OpKind::kPowerNormalize: return "power_normalize";
  }
  return "unknown";
}

Shape broadcast_shapes(const Shape& a, const Shape& b) {
  if (a.size() != b.size()) {
    throw ShapeError("cannot broadcast " + to_string(a) + " with " + to_string(b) +
                     " (rank differs)");
  }
  Shape out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == b[i] || b[i] == 1) {
      out[i] = a[i];
    } else if (a[i] == 1) {
      out[i] = b[i];
    } else {
      throw ShapeError("cannot broadcast " + to_string(a) + " with " + to_string(b));
    }
  }
  return out;
}

const RealTensor& Gradients::at(NodeId id) const {
  if (id.index >= grads_.size() || !grads_[id.index]) {
    throw DomainError("no gradient recorded for node " + std::to_string(id.index) +
                      " (not a trainable leaf)");
  }
  return *grads_[id.index];
}

RealTensor Gradients::take(NodeId id) {
  at(id);
  return std::move(*grads_[id.index]);
}

NodeId Tape::push(TapeNode node) {
  nodes_.push_back(std::move(node));
  return NodeId{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

NodeId Tape::leaf(RealTensor value, bool trainable) {
  TapeNode n;
  n.kind = OpKind::kLeaf;
  n.value = std::move(value);
  n.trainable = trainable;
  n.requires_grad = trainable;
  return push(std::move(n));
}

NodeId Tape::constant(RealTensor value) {
  TapeNode n;
  n.kind = OpKind::kConstant;
  n.value = std::move(value);
  return push(std::move(n));
}

NodeId Tape::apply(OpKind kind, std::span<const NodeId> inputs, OpAttrs attrs) {
  for (auto id : inputs) {
    if (id.index >= nodes_.size()) {
      throw DomainError(std::string(op_name(kind)) + ": input node " +
                        std::to_string(id.index) + " is not on this tape");
    }
  }
  auto in = [&](std::size_t i) -> const RealTensor& { return nodes_[inputs[i].index].value; };

  TapeNode n;
  n.kind = kind;
  n.inputs.assign(inputs.begin(), inputs.end());
  for (auto id : inputs) n.requires_grad = n.requires_grad || nodes_[id.index].requires_grad;

  switch (kind) {
    case OpKind::kLeaf:
    case OpKind::kConstant:
      throw DomainError("use Tape::leaf / Tape::constant to create input nodes");
    case OpKind::kAdd:
      expect_arity(kind, inputs.size(), 2);
      n.value = binary(in(0), in(1), [](double a, double b) { return a + b; });
      break;
    case OpKind::kSub:
      expect_arity(kind, inputs.size(), 2);
      n.value = binary(in(0), in(1), [](double a, double b) { return a - b; });
      break;
    case OpKind::kMul:
      expect_arity(kind, inputs.size(), 2);
      n.value = binary(in(0), in(1), [](double a, double b) { return a * b; });
      break;
    case OpKind::kDiv:
      expect_arity(kind, inputs.size(), 2);
      n.value = binary(in(0), in(1), [](double a, double b) { return a / b; });
      break;
    case OpKind::kMatMul: {
      expect_arity(kind, inputs.size(), 2);
      const auto& a = in(0);
      const auto& b = in(1);
      if (a.rank() < 1 || b.rank() != 2 || a.shape().back() != b.dim(0)) {
        throw ShapeError("matmul: cannot contract " + to_string(a.shape()) + " with " +
                         to_string(b.shape()));
      }
      const std::size_t m = b.dim(0), k = b.dim(1), rows = a.size() / m;
      Shape out = a.shape();
      out.back() = k;
      RealTensor y(out);
      MutMap(y.data().data(), rows, k).noalias() =
          ConstMap(a.data().data(), rows, m) * ConstMap(b.data().data(), m, k);
      n.value = std::move(y);
      break;
    }
    case OpKind::kSum: {
      expect_arity(kind, inputs.size(), 1);
      const auto& a = in(0);
      const std::size_t ax = checked_axis(attrs.axis, a.rank(), kind);
      attrs.axis = static_cast<int>(ax);
      const auto sp = split_at(a.shape(), ax);
      Shape out = a.shape();
      out[ax] = 1;
      RealTensor y(out);
      for (std::size_t o = 0; o < sp.outer; ++o)
        for (std::size_t j = 0; j < sp.n; ++j) {
          const double* src = a.data().data() + (o * sp.n + j) * sp.inner;
          double* dst = y.data().data() + o * sp.inner;
          for (std::size_t i = 0; i < sp.inner; ++i) dst[i] += src[i];
        }
      n.value = std::move(y);
      break;
    }
    case OpKind::kSigmoid:
      expect_arity(kind, inputs.size(), 1);
      n.value = unary(in(0), [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      });
      break;
    case OpKind::kRelu:
      expect_arity(kind, inputs.size(), 1);
      n.value = unary(in(0), [](double x) { return x > 0.0 ? x : 0.0; });
      break;
    case OpKind::kSquare:
      expect_arity(kind, inputs.size(), 1);
      n.value = unary(in(0), [](double x) { return x * x; });
      break;
    case OpKind::kSqrt:
      expect_arity(kind, inputs.size(), 1);
      for (double v : in(0).data())
        if (v < 0.0) throw DomainError("sqrt of negative value " + std::to_string(v));
      n.value = unary(in(0), [](double x) { return std::sqrt(x); });
      break;
    case OpKind::kLog2P1:
      expect_arity(kind, inputs.size(), 1);
      for (double v : in(0).data())
        if (v < 0.0) throw DomainError("log2(1+x) requires x >= 0, got " + std::to_string(v));
      n.value = unary(in(0), [](double x) { return std::log2(1.0 + x); });
      break;
    case OpKind::kExp:
      expect_arity(kind, inputs.size(), 1);
      n.value = unary(in(0), [](double x) { return std::exp(x); });
      break;
    case OpKind::kBroadcast: {
      expect_arity(kind, inputs.size(), 1);
      const auto& a = in(0);
      if (broadcast_shapes(a.shape(), attrs.shape) != attrs.shape) {
        throw ShapeError("cannot broadcast " + to_string(a.shape()) + " to " +
                         to_string(attrs.shape));
      }
      RealTensor y(attrs.shape);
      const auto sa = broadcast_strides(a.shape());
      broadcast_loop(attrs.shape, sa, sa,
                     [&](std::size_t o, std::size_t ia, std::size_t) { y[o] = a[ia]; });
      n.value = std::move(y);
      break;
    }
    case OpKind::kConcat: {
      if (inputs.empty()) throw DomainError("concat of zero tensors");
      const auto& first = in(0);
      const std::size_t ax = checked_axis(attrs.axis, first.rank(), kind);
      attrs.axis = static_cast<int>(ax);
      Shape out = first.shape();
      out[ax] = 0;
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        const auto& s = in(i).shape();
        bool ok = s.size() == out.size();
        for (std::size_t d = 0; ok && d < s.size(); ++d)
          if (d != ax && s[d] != first.dim(d)) ok = false;
        if (!ok) {
          throw ShapeError("concat: " + to_string(s) + " does not match " +
                           to_string(first.shape()) + " off axis " + std::to_string(ax));
        }
        out[ax] += s[ax];
      }
      RealTensor y(out);
      const auto so = split_at(out, ax);
      std::size_t offset = 0;
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        const auto& p = in(i);
        const std::size_t width = p.dim(ax) * so.inner;
        for (std::size_t o = 0; o < so.outer; ++o) {
          const double* src = p.data().data() + o * width;
          double* dst = y.data().data() + o * so.n * so.inner + offset;
          std::copy(src, src + width, dst);
        }
        offset += width;
      }
      n.value = std::move(y);
      break;
    }
    case OpKind::kScale: {
      expect_arity(kind, inputs.size(), 1);
      const double c = attrs.scalar;
      n.value = unary(in(0), [c](double x) { return c * x; });
      break;
    }
    case OpKind::kReshape:
      expect_arity(kind, inputs.size(), 1);
      if (element_count(attrs.shape) != in(0).size()) {
        throw ShapeError("reshape: " + to_string(in(0).shape()) + " -> " +
                         to_string(attrs.shape) + " changes element count");
      }
      n.value = in(0).reshaped(attrs.shape);
      break;
    case OpKind::kThresholdSte: {
      expect_arity(kind, inputs.size(), 1);
      const double t = attrs.scalar;
      n.value = unary(in(0), [t](double x) { return x > t ? 1.0 : 0.0; });
      break;
    }
    case OpKind::kPowerNormalize:
      expect_arity(kind, inputs.size(), 1);
      if (!(attrs.scalar > 0.0)) throw DomainError("power_normalize: budget must be positive");
      n.value = power_normalize_forward(in(0), group_count(in(0).shape(), attrs.axis),
                                        attrs.scalar);
      break;
  }
  n.attrs = std::move(attrs);
  return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) { return apply(OpKind::kAdd, std::array{a, b}); }
NodeId Tape::sub(NodeId a, NodeId b) { return apply(OpKind::kSub, std::array{a, b}); }
NodeId Tape::mul(NodeId a, NodeId b) { return apply(OpKind::kMul, std::array{a, b}); }
NodeId Tape::div(NodeId a, NodeId b) { return apply(OpKind::kDiv, std::array{a, b}); }
NodeId Tape::matmul(NodeId a, NodeId b) { return apply(OpKind::kMatMul, std::array{a, b}); }
NodeId Tape::sum(NodeId a, int axis) {
  return apply(OpKind::kSum, std::array{a}, OpAttrs{.axis = axis, .scalar = 0.0, .shape = {}});
}
NodeId Tape::sigmoid(NodeId a) { return apply(OpKind::kSigmoid, std::array{a}); }
NodeId Tape::relu(NodeId a) { return apply(OpKind::kRelu, std::array{a}); }
NodeId Tape::square(NodeId a) { return apply(OpKind::kSquare, std::array{a}); }
NodeId Tape::sqrt(NodeId a) { return apply(OpKind::kSqrt, std::array{a}); }
NodeId Tape::log2p1(NodeId a) { return apply(OpKind::kLog2P1, std::array{a}); }
NodeId Tape::exp(NodeId a) { return apply(OpKind::kExp, std::array{a}); }
NodeId Tape::broadcast(NodeId a, Shape shape) {
  return apply(OpKind::kBroadcast, std::array{a}, OpAttrs{.shape = std::move(shape)});
}
NodeId Tape::concat(std::span<const NodeId> parts, int axis) {
  return apply(OpKind::kConcat, parts, OpAttrs{.axis = axis, .scalar = 0.0, .shape = {}});
}
NodeId Tape::scale(NodeId a, double factor) {
  return apply(OpKind::kScale, std::array{a}, OpAttrs{.axis = 0, .scalar = factor, .shape = {}});
}
NodeId Tape::reshape(NodeId a, Shape shape) {
  return apply(OpKind::kReshape, std::array{a}, OpAttrs{.shape = std::move(shape)});
}
NodeId Tape::threshold_ste(NodeId a, double threshold) {
  return apply(OpKind::kThresholdSte, std::array{a}, OpAttrs{.axis = 0, .scalar = threshold, .shape = {}});
}
NodeId Tape::power_normalize(NodeId a, int group_rank, double budget) {
  return apply(OpKind::kPowerNormalize, std::array{a},
               OpAttrs{.axis = group_rank, .scalar = budget, .shape = {}});
}

Gradients Tape::backward(NodeId output) const {
  const auto& out = nodes_.at(output.index);
  if (out.value.size() != 1) {
    throw ShapeError("backward needs a scalar output, got shape " + to_string(out.value.shape()));
  }
  std::vector<RealTensor> grads(nodes_.size());
  std::vector<char> has(nodes_.size(), 0);
  auto acc = [&](NodeId id) -> RealTensor* {
    const auto& src = nodes_[id.index];
    if (!src.requires_grad) return nullptr;
    if (!has[id.index]) {
      grads[id.index] = RealTensor(src.value.shape());
      has[id.index] = 1;
    }
    return &grads[id.index];
  };
  grads[output.index] = RealTensor(out.value.shape(), 1.0);
  has[output.index] = 1;

  for (std::size_t idx = output.index + 1; idx-- > 0;) {
    const auto& n = nodes_[idx];
    if (!n.requires_grad || n.kind == OpKind::kLeaf) continue;
    if (!has[idx]) continue;
    const RealTensor& g = grads[idx];
    auto val = [&](std::size_t i) -> const RealTensor& { return nodes_[n.inputs[i].index].value; };
    const auto& y = n.value;

    switch (n.kind) {
      case OpKind::kLeaf:
      case OpKind::kConstant:
        break;
      case OpKind::kAdd:
      case OpKind::kSub: {
        if (auto* ga = acc(n.inputs[0])) accumulate_reduced(*ga, g, 1.0);
        if (auto* gb = acc(n.inputs[1]))
          accumulate_reduced(*gb, g, n.kind == OpKind::kAdd ? 1.0 : -1.0);
        break;
      }
      case OpKind::kMul:
      case OpKind::kDiv: {
        const auto& a = val(0);
        const auto& b = val(1);
        auto* ga = acc(n.inputs[0]);
        auto* gb = acc(n.inputs[1]);
        const auto sa = broadcast_strides(a.shape());
        const auto sb = broadcast_strides(b.shape());
        if (n.kind == OpKind::kMul) {
          broadcast_loop(y.shape(), sa, sb, [&](std::size_t o, std::size_t ia, std::size_t ib) {
            if (ga) (*ga)[ia] += g[o] * b[ib];
            if (gb) (*gb)[ib] += g[o] * a[ia];
          });
        } else {
          broadcast_loop(y.shape(), sa, sb, [&](std::size_t o, std::size_t ia, std::size_t ib) {
            if (ga) (*ga)[ia] += g[o] / b[ib];
            if (gb) (*gb)[ib] -= g[o] * a[ia] / (b[ib] * b[ib]);
          });
        }
        break;
      }
      case OpKind::kMatMul: {
        const auto& a = val(0);
        const auto& b = val(1);
        const std::size_t m = b.dim(0), k = b.dim(1), rows = a.size() / m;
        ConstMap G(g.data().data(), rows, k);
        if (auto* ga = acc(n.inputs[0]))
          MutMap(ga->data().data(), rows, m).noalias() +=
              G * ConstMap(b.data().data(), m, k).transpose();
        if (auto* gb = acc(n.inputs[1]))
          MutMap(gb->data().data(), m, k).noalias() +=
              ConstMap(a.data().data(), rows, m).transpose() * G;
        break;
      }
      case OpKind::kSum: {
        if (auto* ga = acc(n.inputs[0])) {
          const auto sp = split_at(ga->shape(), static_cast<std::size_t>(n.attrs.axis));
          for (std::size_t o = 0; o < sp.outer; ++o)
            for (std::size_t j = 0; j < sp.n; ++j) {
              double* dst = ga->data().data() + (o * sp.n + j) * sp.inner;
              const double* src = g.data().data() + o * sp.inner;
              for (std::size_t i = 0; i < sp.inner; ++i) dst[i] += src[i];
            }
        }
        break;
      }
      case OpKind::kSigmoid:
        if (auto* ga = acc(n.inputs[0]))
          for (std::size_t i = 0; i < y.size(); ++i) (*ga)[i] += g[i] * y[i] * (1.0 - y[i]);
        break;
      case OpKind::kRelu:
        if (auto* ga = acc(n.inputs[0])) {
          const auto& x = val(0);
          for (std::size_t i = 0; i < y.size(); ++i)
            if (x[i] > 0.0) (*ga)[i] += g[i];
        }
        break;
      case OpKind::kSquare:
        if (auto* ga = acc(n.inputs[0])) {
          const auto& x = val(0);
          for (std::size_t i = 0; i < y.size(); ++i) (*ga)[i] += 2.0 * x[i] * g[i];
        }
        break;
      case OpKind::kSqrt:
        if (auto* ga = acc(n.inputs[0]))
          for (std::size_t i = 0; i < y.size(); ++i) (*ga)[i] += g[i] / (2.0 * y[i]);
        break;
      case OpKind::kLog2P1:
        if (auto* ga = acc(n.inputs[0])) {
          const auto& x = val(0);
          for (std::size_t i = 0; i < y.size(); ++i)
            (*ga)[i] += g[i] / ((1.0 + x[i]) * std::numbers::ln2);
        }
        break;
      case OpKind::kExp:
        if (auto* ga = acc(n.inputs[0]))
          for (std::size_t i = 0; i < y.size(); ++i) (*ga)[i] += g[i] * y[i];
        break;
      case OpKind::kBroadcast:
        if (auto* ga = acc(n.inputs[0])) accumulate_reduced(*ga, g, 1.0);
        break;
      case OpKind::kConcat: {
        const auto ax = static_cast<std::size_t>(n.attrs.axis);
        const auto so = split_at(y.shape(), ax);
        std::size_t offset = 0;
        for (std::size_t i = 0; i < n.inputs.size(); ++i) {
          const std::size_t width = val(i).dim(ax) * so.inner;
          if (auto* gi = acc(n.inputs[i])) {
            for (std::size_t o = 0; o < so.outer; ++o) {
              const double* src = g.data().data() + o * so.n * so.inner + offset;
              double* dst = gi->data().data() + o * width;
              for (std::size_t t = 0; t < width; ++t) dst[t] += src[t];
            }
          }
          offset += width;
        }
        break;
      }
      case OpKind::kScale:
        if (auto* ga = acc(n.inputs[0]))
          for (std::size_t i = 0; i < y.size(); ++i) (*ga)[i] += n.attrs.scalar * g[i];
        break;
      case OpKind::kReshape:
      case OpKind::kThresholdSte:
        if (auto* ga = acc(n.inputs[0]))
          for (std::size_t i = 0; i < y.size(); ++i) (*ga)[i] += g[i];
        break;
      case OpKind::kPowerNormalize:
        if (auto* ga = acc(n.inputs[0])) {
          const auto& x = val(0);
          const std::size_t groups = group_count(x.shape(), n.attrs.axis);
          const std::size_t chunk = groups ? x.size() / groups : 0;
          for (std::size_t gi = 0; gi < groups; ++gi) {
            const std::size_t base = gi * chunk;
            double p = 0.0, dot = 0.0;
            for (std::size_t i = 0; i < chunk; ++i) {
              p += x[base + i] * x[base + i];
              dot += g[base + i] * x[base + i];
            }
            if (p < kPowerFloor) continue;
            const double s = std::sqrt(n.attrs.scalar / p);
            for (std::size_t i = 0; i < chunk; ++i)
              (*ga)[base + i] += s * g[base + i] - s * x[base + i] * dot / p;
          }
        }
        break;
    }
  }

  std::vector<std::optional<RealTensor>> result(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    if (n.kind != OpKind::kLeaf || !n.trainable) continue;
    result[i] = has[i] ? std::move(grads[i]) : RealTensor(n.value.shape());
  }
  return Gradients(std::move(result));
}

}  // namespace cfmimo

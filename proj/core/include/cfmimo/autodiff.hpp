// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cfmimo/tensor.hpp"

namespace cfmimo {

/// Operation tags recorded on the tape.
enum class OpKind : std::uint8_t {
  kLeaf,
  kConstant,
  kAdd,
  kSub,
  kMul,  // Hadamard product with broadcasting
  kDiv,
  kMatMul,  // [..., m] x [m, n] -> [..., n]
  kSum,     // reduce one axis, kept with size 1
  kSigmoid,
  kRelu,
  kSquare,
  kSqrt,
  kLog2P1,  // log2(1 + x), x >= 0
  kExp,
  kBroadcast,
  kConcat,
  kScale,
  kReshape,
  kThresholdSte,    // forward 1[x > t], backward identity
  kPowerNormalize,  // per-group rescale to a fixed sum of squares
};

std::string_view op_name(OpKind kind);

/// Handle to a node on a Tape. Ids grow strictly in creation order, which
/// is also a valid topological order.
struct NodeId {
  std::uint32_t index = 0;
  friend bool operator==(NodeId, NodeId) = default;
};

struct OpAttrs {
  int axis = 0;
  double scalar = 0.0;
  Shape shape;
};

struct TapeNode {
  OpKind kind = OpKind::kLeaf;
  std::vector<NodeId> inputs;
  OpAttrs attrs;
  RealTensor value;
  bool trainable = false;
  bool requires_grad = false;
};

/// Gradient of a scalar output with respect to every trainable leaf.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(std::vector<std::optional<RealTensor>> per_node)
      : grads_(std::move(per_node)) {}

  /// Gradient for a trainable leaf; throws DomainError for any other node.
  const RealTensor& at(NodeId id) const;
  RealTensor take(NodeId id);

 private:
  std::vector<std::optional<RealTensor>> grads_;
};

/// Reverse-mode tape. One tape per worker; not thread-safe.
class Tape {
 public:
  NodeId leaf(RealTensor value, bool trainable = true);
  NodeId constant(RealTensor value);

  /// Generic entry point; the named helpers below all route here.
  NodeId apply(OpKind kind, std::span<const NodeId> inputs, OpAttrs attrs = {});

  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId div(NodeId a, NodeId b);
  NodeId matmul(NodeId a, NodeId b);
  NodeId sum(NodeId a, int axis);
  NodeId sigmoid(NodeId a);
  NodeId relu(NodeId a);
  NodeId square(NodeId a);
  NodeId sqrt(NodeId a);
  NodeId log2p1(NodeId a);
  NodeId exp(NodeId a);
  NodeId broadcast(NodeId a, Shape shape);
  NodeId concat(std::span<const NodeId> parts, int axis);
  NodeId scale(NodeId a, double factor);
  NodeId reshape(NodeId a, Shape shape);
  NodeId threshold_ste(NodeId a, double threshold);
  /// Rescales each group (the leading `group_rank` axes index groups) so its
  /// sum of squares equals `budget`; groups below 1e-20 become zero.
  NodeId power_normalize(NodeId a, int group_rank, double budget);

  const RealTensor& value(NodeId id) const { return nodes_.at(id.index).value; }
  const TapeNode& node(NodeId id) const { return nodes_.at(id.index); }
  std::size_t size() const { return nodes_.size(); }

  /// Reverse sweep from a single-element output node.
  Gradients backward(NodeId output) const;

 private:
  NodeId push(TapeNode node);
  std::vector<TapeNode> nodes_;
};

/// Broadcast shape of two equal-rank shapes (size-1 axes stretch).
Shape broadcast_shapes(const Shape& a, const Shape& b);

}  // namespace cfmimo

// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "cfmimo/autodiff.hpp"
#include "cfmimo/error.hpp"
#include "test_support.hpp"

using namespace cfmimo;
using cfmimo::testing::check_gradients;
using cfmimo::testing::random_tensor;

namespace {

// Reduces any node to a scalar through a fixed random weighting so every
// output element contributes a distinct gradient.
NodeId weighted_total(Tape& t, NodeId x, std::uint64_t seed) {
  CounterRng rng(seed, 99);
  const auto& shape = t.value(x).shape();
  NodeId w = t.constant(random_tensor(shape, rng));
  NodeId y = t.mul(x, w);
  for (std::size_t ax = 0; ax < shape.size(); ++ax) y = t.sum(y, static_cast<int>(ax));
  return y;
}

}  // namespace

TEST(Autodiff, SigmoidAtZero) {
  Tape t;
  auto x = t.leaf(RealTensor::scalar(0.0));
  auto y = t.sigmoid(x);
  EXPECT_DOUBLE_EQ(t.value(y).item(), 0.5);
  EXPECT_DOUBLE_EQ(t.backward(y).at(x).item(), 0.25);
}

TEST(Autodiff, HadamardProduct) {
  Tape t;
  auto a = t.leaf(RealTensor::vector({1, 2, 3}));
  auto b = t.leaf(RealTensor::vector({4, 5, 6}));
  auto y = t.mul(a, b);
  EXPECT_EQ(t.value(y).values(), (std::vector<double>{4, 10, 18}));
  auto g = t.backward(t.sum(y, 0));
  EXPECT_EQ(g.at(a).values(), (std::vector<double>{4, 5, 6}));
  EXPECT_EQ(g.at(b).values(), (std::vector<double>{1, 2, 3}));
}

TEST(Autodiff, Log2OnePlus) {
  Tape t;
  auto x = t.leaf(RealTensor::scalar(1.0));
  auto y = t.log2p1(x);
  EXPECT_DOUBLE_EQ(t.value(y).item(), 1.0);
  EXPECT_NEAR(t.backward(y).at(x).item(), 1.0 / (2.0 * std::log(2.0)), 1e-15);
}

TEST(Autodiff, Log2OnePlusRejectsNegative) {
  Tape t;
  auto x = t.leaf(RealTensor::scalar(-0.5));
  EXPECT_THROW(t.log2p1(x), DomainError);
}

TEST(Autodiff, ShapeMismatchNamesBothShapes) {
  Tape t;
  auto a = t.leaf(RealTensor({2, 3}));
  auto b = t.leaf(RealTensor({3, 2}));
  try {
    t.add(a, b);
    FAIL();
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2,3]"), std::string::npos);
    EXPECT_NE(msg.find("[3,2]"), std::string::npos);
  }
}

TEST(Autodiff, MaskGradient) {
  // d/dx sum(x * m) with a 0/1 constant mask is the mask itself.
  Tape t;
  auto x = t.leaf(RealTensor::vector({3.0, -2.0}));
  auto m = t.constant(RealTensor::vector({0.0, 1.0}));
  auto g = t.backward(t.sum(t.mul(x, m), 0));
  EXPECT_EQ(g.at(x).values(), (std::vector<double>{0.0, 1.0}));
}

TEST(Autodiff, UnusedLeafGetsZeroGradient) {
  Tape t;
  auto x = t.leaf(RealTensor::vector({1, 2}));
  auto unused = t.leaf(RealTensor::vector({5, 6, 7}));
  auto g = t.backward(t.sum(t.square(x), 0));
  EXPECT_EQ(g.at(unused).values(), (std::vector<double>{0, 0, 0}));
}

TEST(Autodiff, ConstantsHaveNoGradient) {
  Tape t;
  auto x = t.leaf(RealTensor::scalar(1.0));
  auto c = t.constant(RealTensor::scalar(2.0));
  auto g = t.backward(t.mul(x, c));
  EXPECT_THROW(g.at(c), DomainError);
}

TEST(Autodiff, BackwardNeedsScalar) {
  Tape t;
  auto x = t.leaf(RealTensor::vector({1, 2}));
  EXPECT_THROW(t.backward(t.square(x)), ShapeError);
}

TEST(Autodiff, BroadcastingAddSumsGradient) {
  Tape t;
  auto a = t.leaf(RealTensor({2, 3}, 1.0));
  auto b = t.leaf(RealTensor({1, 3}, 2.0));
  auto y = t.add(a, b);
  EXPECT_EQ(t.value(y).shape(), (Shape{2, 3}));
  auto g = t.backward(t.sum(t.sum(y, 0), 1));
  EXPECT_EQ(g.at(b).values(), (std::vector<double>{2, 2, 2}));
}

TEST(Autodiff, SumKeepsAxis) {
  Tape t;
  auto x = t.leaf(RealTensor({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6}));
  auto s = t.sum(x, 1);
  EXPECT_EQ(t.value(s).shape(), (Shape{2, 1}));
  EXPECT_EQ(t.value(s).values(), (std::vector<double>{6, 15}));
  EXPECT_THROW(t.sum(x, 2), ShapeError);
}

TEST(Autodiff, MatmulValues) {
  Tape t;
  auto a = t.leaf(RealTensor({2, 2}, std::vector<double>{1, 2, 3, 4}));
  auto b = t.leaf(RealTensor({2, 1}, std::vector<double>{1, 1}));
  EXPECT_EQ(t.value(t.matmul(a, b)).values(), (std::vector<double>{3, 7}));
  auto c = t.leaf(RealTensor({3, 1}));
  EXPECT_THROW(t.matmul(a, c), ShapeError);
}

TEST(Autodiff, ThresholdSteForwardAndBackward) {
  Tape t;
  auto x = t.leaf(RealTensor::vector({0.2, 0.7, 0.5}));
  auto y = t.threshold_ste(x, 0.5);
  EXPECT_EQ(t.value(y).values(), (std::vector<double>{0, 1, 0}));
  auto g = t.backward(t.sum(y, 0));
  EXPECT_EQ(g.at(x).values(), (std::vector<double>{1, 1, 1}));
}

TEST(Autodiff, PowerNormalizeGroups) {
  Tape t;
  auto x = t.leaf(RealTensor({2, 2}, std::vector<double>{3, 4, 0, 0}));
  auto y = t.power_normalize(x, 1, 25.0);
  EXPECT_EQ(t.value(y).values(), (std::vector<double>{3, 4, 0, 0}));
  auto z = t.power_normalize(x, 1, 1.0);
  EXPECT_NEAR(t.value(z)[0], 0.6, 1e-15);
  EXPECT_NEAR(t.value(z)[1], 0.8, 1e-15);
  EXPECT_EQ(t.value(z)[2], 0.0);
  EXPECT_THROW(t.power_normalize(x, 1, 0.0), DomainError);
}

TEST(Autodiff, ConcatAndReshape) {
  Tape t;
  auto a = t.leaf(RealTensor({1, 2}, std::vector<double>{1, 2}));
  auto b = t.leaf(RealTensor({1, 2}, std::vector<double>{3, 4}));
  NodeId parts[] = {a, b};
  auto c = t.concat(parts, 0);
  EXPECT_EQ(t.value(c).shape(), (Shape{2, 2}));
  auto r = t.reshape(c, {4});
  EXPECT_EQ(t.value(r).values(), (std::vector<double>{1, 2, 3, 4}));
  EXPECT_THROW(t.reshape(c, {3}), ShapeError);
}

TEST(Autodiff, TapeIsDeterministic) {
  auto run = [] {
    CounterRng rng(5);
    Tape t;
    auto x = t.leaf(random_tensor({4, 3}, rng));
    auto w = t.leaf(random_tensor({3, 2}, rng));
    auto y = t.sigmoid(t.matmul(x, w));
    auto out = weighted_total(t, y, 3);
    auto g = t.backward(out);
    return std::make_pair(t.value(out).item(), g.at(w).values());
  };
  EXPECT_EQ(run(), run());
}

// Central-difference checks of every differentiable op (h = 1e-5, relative
// error below 1e-4) over a handful of seeds; the acceptance binary runs the
// 100-seed version.
class OpGradient : public ::testing::TestWithParam<int> {};

TEST_P(OpGradient, MatchesFiniteDifferences) {
  const auto seed = static_cast<std::uint64_t>(GetParam());
  CounterRng rng(seed);
  using Build = std::function<NodeId(Tape&, const std::vector<NodeId>&)>;
  struct Case {
    const char* name;
    std::vector<RealTensor> inputs;
    Build build;
  };
  auto pos = [&](Shape s) { return random_tensor(s, rng, 0.5, 2.0); };
  auto any = [&](Shape s) { return random_tensor(s, rng); };
  std::vector<Case> cases = {
      {"add", {any({2, 3}), any({1, 3})}, [&](Tape& t, auto& v) { return weighted_total(t, t.add(v[0], v[1]), seed); }},
      {"sub", {any({2, 3}), any({2, 1})}, [&](Tape& t, auto& v) { return weighted_total(t, t.sub(v[0], v[1]), seed); }},
      {"mul", {any({2, 3}), any({2, 3})}, [&](Tape& t, auto& v) { return weighted_total(t, t.mul(v[0], v[1]), seed); }},
      {"div", {any({2, 3}), pos({1, 3})}, [&](Tape& t, auto& v) { return weighted_total(t, t.div(v[0], v[1]), seed); }},
      {"matmul", {any({2, 2, 3}), any({3, 4})}, [&](Tape& t, auto& v) { return weighted_total(t, t.matmul(v[0], v[1]), seed); }},
      {"sum", {any({2, 3, 2})}, [&](Tape& t, auto& v) { return weighted_total(t, t.sum(v[0], 1), seed); }},
      {"sigmoid", {any({5})}, [&](Tape& t, auto& v) { return weighted_total(t, t.sigmoid(v[0]), seed); }},
      {"relu", {pos({5})}, [&](Tape& t, auto& v) { return weighted_total(t, t.relu(t.sub(v[0], t.constant(RealTensor({5}, 1.2)))), seed); }},
      {"square", {any({5})}, [&](Tape& t, auto& v) { return weighted_total(t, t.square(v[0]), seed); }},
      {"sqrt", {pos({5})}, [&](Tape& t, auto& v) { return weighted_total(t, t.sqrt(v[0]), seed); }},
      {"log2p1", {pos({5})}, [&](Tape& t, auto& v) { return weighted_total(t, t.log2p1(v[0]), seed); }},
      {"exp", {any({5})}, [&](Tape& t, auto& v) { return weighted_total(t, t.exp(v[0]), seed); }},
      {"broadcast", {any({1, 3})}, [&](Tape& t, auto& v) { return weighted_total(t, t.broadcast(v[0], {4, 3}), seed); }},
      {"concat", {any({2, 1}), any({2, 2})}, [&](Tape& t, auto& v) { NodeId p[] = {v[0], v[1]}; return weighted_total(t, t.concat(p, 1), seed); }},
      {"scale", {any({3})}, [&](Tape& t, auto& v) { return weighted_total(t, t.scale(v[0], -2.5), seed); }},
      {"reshape", {any({2, 3})}, [&](Tape& t, auto& v) { return weighted_total(t, t.reshape(v[0], {3, 2}), seed); }},
      {"power_normalize", {any({3, 4})}, [&](Tape& t, auto& v) { return weighted_total(t, t.power_normalize(v[0], 1, 2.0), seed); }},
  };
  for (const auto& c : cases) {
    auto r = check_gradients(c.inputs, c.build);
    EXPECT_TRUE(r.ok) << c.name << " max relative error " << r.max_rel_error;
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, OpGradient, ::testing::Range(0, 5));

// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "cfmimo/checkpoint.hpp"
#include "cfmimo/error.hpp"
#include "cfmimo/inference.hpp"
#include "test_support.hpp"

using namespace cfmimo;
using namespace cfmimo::testing;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("cfmimo_test_ckpt_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

GnnModel sample_model(bool attention) {
  auto cfg = small_config(2, 3, 2, 0.63, 5, 3);
  cfg.attention = attention;
  cfg.attention_dim = 3;
  BranchSpec prec;
  prec.task = Task::kPrecoding;
  prec.shape = {1, 3, 4};
  prec.tau = 0.62;
  cfg.branches.push_back(prec);
  auto m = init_model(cfg, 99);
  CounterRng rng(1);
  randomize_adjacency(m, rng);
  m.branches[0].input_scale = 1.25e-4;
  m.step = 321;
  round_parameters_to_float(m);
  return m;
}

}  // namespace

TEST(Checkpoint, RoundTripIsExact) {
  for (bool att : {false, true}) {
    auto dir = scratch(att ? "rt_att" : "rt");
    auto m = sample_model(att);
    checkpoint_write(dir / "model.json", m);
    auto back = checkpoint_read(dir / "model.json");
    EXPECT_EQ(back.config, m.config);
    EXPECT_EQ(back.seed, m.seed);
    EXPECT_EQ(back.step, m.step);
    auto pa = m.parameters();
    auto pb = back.parameters();
    ASSERT_EQ(pa.size(), pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(*pa[i], *pb[i]);
    for (std::size_t b = 0; b < 2; ++b) {
      EXPECT_EQ(back.branches[b].input_scale, m.branches[b].input_scale);
      EXPECT_EQ(back.branches[b].sparse.tau, m.branches[b].sparse.tau);
    }
    CounterRng rng(2);
    auto h = random_channel(2, 3, 2, rng);
    auto fa = InferenceEngine(m).run(Task::kPowerControl, h);
    auto fb = InferenceEngine(back).run(Task::kPowerControl, h);
    for (std::size_t i = 0; i < fa.entries().size(); ++i) EXPECT_EQ(fa.entries()[i], fb.entries()[i]);
  }
}

TEST(Checkpoint, CorruptPayload) {
  auto dir = scratch("corrupt");
  checkpoint_write(dir / "model.json", sample_model(false));
  {
    std::fstream f(dir / "model.bin", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(10);
    f.put('\x7f');
  }
  EXPECT_THROW(checkpoint_read(dir / "model.json"), ChecksumError);
}

TEST(Checkpoint, TruncatedPayload) {
  auto dir = scratch("trunc");
  checkpoint_write(dir / "model.json", sample_model(false));
  fs::resize_file(dir / "model.bin", 12);
  EXPECT_THROW(checkpoint_read(dir / "model.json"), TruncatedPayloadError);
}

TEST(Checkpoint, VersionMismatch) {
  auto dir = scratch("version");
  checkpoint_write(dir / "model.json", sample_model(false));
  auto doc = read_json_file(dir / "model.json");
  doc["format_version"] = 7;
  write_json_file(dir / "model.json", doc);
  EXPECT_THROW(checkpoint_read(dir / "model.json"), FormatVersionError);
}

TEST(Checkpoint, WrongKindAndMissingFile) {
  auto dir = scratch("kind");
  write_json_file(dir / "x.json", Json{{"kind", "cfmimo-dataset"}});
  EXPECT_THROW(checkpoint_read(dir / "x.json"), ParseError);
  EXPECT_THROW(checkpoint_read(dir / "missing.json"), IoError);
}

TEST(Checkpoint, ManifestEchoesArchitecture) {
  auto dir = scratch("manifest");
  checkpoint_write(dir / "model.json", sample_model(false));
  auto doc = read_json_file(dir / "model.json");
  EXPECT_EQ(doc.at("kind"), "cfmimo-checkpoint");
  EXPECT_EQ(doc.at("config").at("hidden"), 5);
  EXPECT_EQ(doc.at("step"), 321);
  EXPECT_TRUE(doc.contains("checksum"));
}

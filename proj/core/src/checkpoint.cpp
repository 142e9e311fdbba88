// SPDX-License-Identifier: Apache-2.0
#include "cfmimo/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "cfmimo/crc32.hpp"
#include "cfmimo/error.hpp"

namespace cfmimo {

void to_json(Json& j, const TaskShape& s) { j = Json::array({s.aps, s.ues, s.antennas}); }
void from_json(const Json& j, TaskShape& s) {
  s.aps = j.at(0).get<std::size_t>();
  s.ues = j.at(1).get<std::size_t>();
  s.antennas = j.at(2).get<std::size_t>();
}

void to_json(Json& j, const BranchSpec& b) {
  j = Json{{"task", task_name(b.task)},
           {"shape", b.shape},
           {"tau", b.tau},
           {"p_max", b.p_max},
           {"noise_power", b.noise_power}};
}
void from_json(const Json& j, BranchSpec& b) {
  b.task = parse_task(j.at("task").get<std::string>());
  b.shape = j.at("shape").get<TaskShape>();
  b.tau = j.at("tau").get<double>();
  b.p_max = j.at("p_max").get<double>();
  b.noise_power = j.at("noise_power").get<double>();
}

void to_json(Json& j, const ModelConfig& c) {
  j = Json{{"branches", c.branches},   {"hidden", c.hidden},
           {"layers", c.layers},       {"alpha", c.alpha},
           {"attention", c.attention}, {"attention_dim", c.attention_dim},
           {"w_init", c.w_init}};
}
void from_json(const Json& j, ModelConfig& c) {
  c.branches = j.at("branches").get<std::vector<BranchSpec>>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.layers = j.at("layers").get<std::size_t>();
  c.alpha = j.at("alpha").get<double>();
  c.attention = j.value("attention", false);
  c.attention_dim = j.value("attention_dim", std::size_t{8});
  c.w_init = j.value("w_init", 1.0);
}

void checkpoint_write(const std::filesystem::path& manifest_path, const GnnModel& model) {
  std::vector<std::byte> blob;
  Json shapes = Json::array();
  for (const auto* p : model.parameters()) {
    shapes.push_back(p->shape());
    for (double v : p->data()) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      for (int s = 0; s < 32; s += 8) blob.push_back(static_cast<std::byte>((bits >> s) & 0xFFU));
    }
  }
  Json scales = Json::array();
  for (const auto& b : model.branches) scales.push_back(b.input_scale);

  auto payload = manifest_path;
  payload.replace_extension(".bin");
  if (payload.has_parent_path()) std::filesystem::create_directories(payload.parent_path());
  {
    std::ofstream out(payload, std::ios::binary);
    if (!out) throw IoError("cannot write " + payload.string());
    out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
    if (!out) throw IoError("write failed for " + payload.string());
  }
  Json doc{{"kind", "cfmimo-checkpoint"},
           {"format_version", kCheckpointFormatVersion},
           {"config", model.config},
           {"seed", seed_to_json(model.seed)},
           {"step", model.step},
           {"input_scales", scales},
           {"parameter_shapes", shapes},
           {"parameter_count", model.parameter_count()},
           {"payload", payload.filename().string()},
           {"payload_bytes", blob.size()},
           {"checksum", crc32(blob)}};
  write_json_file(manifest_path, doc);
}

GnnModel checkpoint_read(const std::filesystem::path& manifest_path) {
  const Json doc = read_json_file(manifest_path);
  if (doc.value("kind", std::string()) != "cfmimo-checkpoint") {
    throw ParseError(manifest_path.string() + " is not a cfmimo checkpoint");
  }
  const int version = doc.at("format_version").get<int>();
  if (version != kCheckpointFormatVersion) {
    throw FormatVersionError("checkpoint format version " + std::to_string(version) +
                             " is not supported");
  }
  GnnModel model;
  std::vector<double> scales;
  std::uint32_t checksum = 0;
  try {
    model = init_model(doc.at("config").get<ModelConfig>(), seed_from_json(doc.at("seed")));
    model.step = doc.at("step").get<std::size_t>();
    scales = doc.at("input_scales").get<std::vector<double>>();
    checksum = doc.at("checksum").get<std::uint32_t>();
  } catch (const Json::exception& e) {
    throw ParseError(manifest_path.string() + ": " + e.what());
  }
  if (scales.size() != model.branches.size()) throw ParseError("input_scales does not match heads");
  for (std::size_t i = 0; i < scales.size(); ++i) model.branches[i].input_scale = scales[i];

  const auto payload = manifest_path.parent_path() /
                       doc.value("payload", manifest_path.stem().string() + ".bin");
  std::ifstream in(payload, std::ios::binary);
  if (!in) throw IoError("cannot open payload " + payload.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::byte> blob(raw.size());
  std::memcpy(blob.data(), raw.data(), raw.size());

  const std::size_t expected = model.parameter_count() * 4;
  if (blob.size() < expected) {
    throw TruncatedPayloadError("checkpoint payload holds " + std::to_string(blob.size()) +
                                " bytes, expected " + std::to_string(expected));
  }
  if (blob.size() > expected) throw ParseError("checkpoint payload has trailing bytes");
  if (crc32(blob) != checksum) throw ChecksumError("checkpoint payload fails its CRC-32 check");

  const std::byte* p = blob.data();
  for (auto* t : model.parameters()) {
    for (auto& v : t->data()) {
      std::uint32_t bits = 0;
      for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
      v = static_cast<double>(std::bit_cast<float>(bits));
      p += 4;
    }
  }
  return model;
}

}  // namespace cfmimo

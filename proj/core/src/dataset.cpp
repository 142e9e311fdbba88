// SPDX-License-Identifier: Apache-2.0
#include "cfmimo/dataset.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "cfmimo/crc32.hpp"
#include "cfmimo/error.hpp"
#include "cfmimo/json_io.hpp"
#include "cfmimo/parallel.hpp"

namespace cfmimo {

std::string_view task_name(Task task) {
  return task == Task::kPowerControl ? "power_control" : "precoding";
}

Task parse_task(std::string_view name) {
  if (name == "power_control" || name == "pc") return Task::kPowerControl;
  if (name == "precoding" || name == "prec") return Task::kPrecoding;
  throw ConfigError("unknown task '" + std::string(name) + "'");
}

std::size_t DatasetManifest::num_aps() const {
  return task == Task::kPowerControl ? scenario_config.num_aps : 1;
}
std::size_t DatasetManifest::num_ues() const {
  return task == Task::kPowerControl ? scenario_config.num_ues : sv_config.num_ues;
}
std::size_t DatasetManifest::num_antennas() const {
  return task == Task::kPowerControl ? scenario_config.num_antennas : sv_config.num_antennas;
}
double DatasetManifest::p_max() const {
  return task == Task::kPowerControl ? scenario_config.p_max_mw : sv_config.p_max;
}
double DatasetManifest::noise_power() const {
  return task == Task::kPowerControl ? scenario_config.noise_power_mw : sv_config.noise_power;
}

Dataset generate_power_control_dataset(const ScenarioConfig& config, std::uint64_t scenario_seed,
                                       std::uint64_t seed, std::size_t count,
                                       std::size_t workers) {
  config.validate();
  Dataset ds;
  ds.manifest.task = Task::kPowerControl;
  ds.manifest.scenario_config = config;
  ds.manifest.scenario_seed = scenario_seed;
  ds.manifest.seed = seed;
  ds.manifest.sample_count = count;
  ds.manifest.scenario = generate_scenario(config, scenario_seed);
  const auto corr = build_correlation(*ds.manifest.scenario, config);
  ds.samples.resize(count);
  parallel_for(count, workers, [&](std::size_t i) {
    auto h = sample_rayleigh(*ds.manifest.scenario, config, corr, seed, i);
    h.round_to_float();
    ds.samples[i] = std::move(h);
  });
  return ds;
}

Dataset generate_precoding_dataset(const SVChannelConfig& config, std::uint64_t seed,
                                   std::size_t count, std::size_t workers) {
  config.validate();
  Dataset ds;
  ds.manifest.task = Task::kPrecoding;
  ds.manifest.sv_config = config;
  ds.manifest.seed = seed;
  ds.manifest.sample_count = count;
  ds.samples.resize(count);
  parallel_for(count, workers, [&](std::size_t i) {
    auto h = to_channel_tensor(sample_sv(config, seed, i));
    h.round_to_float();
    ds.samples[i] = std::move(h);
  });
  return ds;
}

std::filesystem::path payload_path_for(const std::filesystem::path& manifest_path) {
  auto p = manifest_path;
  p.replace_extension(".bin");
  return p;
}

namespace {

void put_f32(std::vector<std::byte>& out, double v) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::byte>((bits >> s) & 0xFFU));
}

double get_f32(const std::byte* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return static_cast<double>(std::bit_cast<float>(bits));
}

}  // namespace

void dataset_write(const std::filesystem::path& manifest_path, const Dataset& dataset) {
  DatasetManifest m = dataset.manifest;
  m.sample_count = dataset.samples.size();
  const std::size_t per = m.num_aps() * m.num_ues() * m.num_antennas();

  std::vector<std::byte> blob;
  blob.reserve(m.sample_count * per * 8);
  for (const auto& h : dataset.samples) {
    if (h.size() != per) {
      throw ShapeError("dataset sample has " + std::to_string(h.size()) + " gains, manifest implies " +
                       std::to_string(per));
    }
    for (auto z : h.gains()) {
      put_f32(blob, z.real());
      put_f32(blob, z.imag());
    }
  }
  m.checksum = crc32(blob);

  const auto payload = payload_path_for(manifest_path);
  if (payload.has_parent_path()) std::filesystem::create_directories(payload.parent_path());
  {
    std::ofstream out(payload, std::ios::binary);
    if (!out) throw IoError("cannot write " + payload.string());
    out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
    if (!out) throw IoError("write failed for " + payload.string());
  }
  Json doc = m;
  doc["payload"] = payload.filename().string();
  doc["payload_bytes"] = blob.size();
  write_json_file(manifest_path, doc);
}

Dataset dataset_read(const std::filesystem::path& manifest_path) {
  const Json doc = read_json_file(manifest_path);
  if (doc.value("kind", std::string()) != "cfmimo-dataset") {
    throw ParseError(manifest_path.string() + " is not a cfmimo dataset manifest");
  }
  const int version = doc.at("format_version").get<int>();
  if (version != kDatasetFormatVersion) {
    throw FormatVersionError("dataset format version " + std::to_string(version) +
                             " is not supported (expected " +
                             std::to_string(kDatasetFormatVersion) + ")");
  }
  Dataset ds;
  try {
    ds.manifest = doc.get<DatasetManifest>();
  } catch (const Json::exception& e) {
    throw ParseError(manifest_path.string() + ": " + e.what());
  }
  const auto& m = ds.manifest;
  const std::size_t per = m.num_aps() * m.num_ues() * m.num_antennas();
  const std::size_t expected = m.sample_count * per * 8;

  auto payload = manifest_path.parent_path() / doc.value("payload", payload_path_for(manifest_path).filename().string());
  std::ifstream in(payload, std::ios::binary);
  if (!in) throw IoError("cannot open payload " + payload.string());
  std::vector<std::byte> blob;
  {
    std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    blob.resize(raw.size());
    std::memcpy(blob.data(), raw.data(), raw.size());
  }
  if (blob.size() < expected) {
    throw TruncatedPayloadError("payload " + payload.string() + " holds " +
                                std::to_string(blob.size()) + " bytes, expected " +
                                std::to_string(expected));
  }
  if (blob.size() > expected) {
    throw ParseError("payload " + payload.string() + " has " +
                     std::to_string(blob.size() - expected) + " trailing bytes");
  }
  if (crc32(blob) != m.checksum) {
    throw ChecksumError("payload " + payload.string() + " fails its CRC-32 check");
  }
  ds.samples.reserve(m.sample_count);
  const std::byte* p = blob.data();
  for (std::size_t s = 0; s < m.sample_count; ++s) {
    std::vector<cdouble> g(per);
    for (auto& z : g) {
      z = {get_f32(p), get_f32(p + 4)};
      p += 8;
    }
    ds.samples.emplace_back(m.num_aps(), m.num_ues(), m.num_antennas(), std::move(g));
  }
  return ds;
}

}  // namespace cfmimo

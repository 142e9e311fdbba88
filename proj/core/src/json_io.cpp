// SPDX-License-Identifier: Apache-2.0
#include "cfmimo/json_io.hpp"

#include <fstream>

#include "cfmimo/error.hpp"

namespace cfmimo {

namespace {

template <class T>
void get_if(const Json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

std::string_view correlation_name(Correlation c) {
  return c == Correlation::kIdentity ? "identity" : "local_scattering";
}

Correlation parse_correlation(const std::string& s) {
  if (s == "identity") return Correlation::kIdentity;
  if (s == "local_scattering") return Correlation::kLocalScattering;
  throw ConfigError("unknown correlation model '" + s + "'");
}

}  // namespace

void to_json(Json& j, const ScenarioConfig& c) {
  j = Json{{"num_aps", c.num_aps},
           {"num_ues", c.num_ues},
           {"num_antennas", c.num_antennas},
           {"side_m", c.side_m},
           {"p_max_mw", c.p_max_mw},
           {"noise_power_mw", c.noise_power_mw},
           {"ap_height_offset_m", c.ap_height_offset_m},
           {"correlation", correlation_name(c.correlation)},
           {"scattering_spread_deg", c.scattering_spread_deg}};
}

void from_json(const Json& j, ScenarioConfig& c) {
  get_if(j, "num_aps", c.num_aps);
  get_if(j, "num_ues", c.num_ues);
  get_if(j, "num_antennas", c.num_antennas);
  get_if(j, "side_m", c.side_m);
  get_if(j, "p_max_mw", c.p_max_mw);
  get_if(j, "noise_power_mw", c.noise_power_mw);
  if (auto it = j.find("noise_power_dbm"); it != j.end()) c.noise_power_mw = dbm_to_mw(it->get<double>());
  get_if(j, "ap_height_offset_m", c.ap_height_offset_m);
  if (auto it = j.find("correlation"); it != j.end()) c.correlation = parse_correlation(it->get<std::string>());
  get_if(j, "scattering_spread_deg", c.scattering_spread_deg);
}

void to_json(Json& j, const SVChannelConfig& c) {
  j = Json{{"num_ues", c.num_ues},
           {"num_antennas", c.num_antennas},
           {"n_clusters", c.n_clusters},
           {"n_rays", c.n_rays},
           {"angular_spread_deg", c.angular_spread_deg},
           {"array", "ula_half_wavelength"},
           {"p_max", c.p_max},
           {"noise_power", c.noise_power}};
}

void from_json(const Json& j, SVChannelConfig& c) {
  get_if(j, "num_ues", c.num_ues);
  get_if(j, "num_antennas", c.num_antennas);
  get_if(j, "n_clusters", c.n_clusters);
  get_if(j, "n_rays", c.n_rays);
  get_if(j, "angular_spread_deg", c.angular_spread_deg);
  get_if(j, "p_max", c.p_max);
  get_if(j, "noise_power", c.noise_power);
  if (auto it = j.find("array"); it != j.end() && it->get<std::string>() != "ula_half_wavelength") {
    throw ConfigError("only the half-wavelength ULA is supported");
  }
}

void to_json(Json& j, const Scenario& s) {
  Json aps = Json::array(), ues = Json::array();
  for (auto p : s.ap_positions) aps.push_back({p.x, p.y});
  for (auto p : s.ue_positions) ues.push_back({p.x, p.y});
  j = Json{{"ap_positions", aps}, {"ue_positions", ues}, {"beta", s.beta}};
}

void from_json(const Json& j, Scenario& s) {
  s.ap_positions.clear();
  s.ue_positions.clear();
  for (const auto& p : j.at("ap_positions")) s.ap_positions.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  for (const auto& p : j.at("ue_positions")) s.ue_positions.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  s.beta = j.at("beta").get<std::vector<double>>();
  if (s.beta.size() != s.ap_positions.size() * s.ue_positions.size()) {
    throw ParseError("scenario beta table does not match AP/UE counts");
  }
}

void to_json(Json& j, const DatasetManifest& m) {
  j = Json{{"kind", "cfmimo-dataset"},
           {"format_version", m.format_version},
           {"task", task_name(m.task)},
           {"seed", seed_to_json(m.seed)},
           {"sample_count", m.sample_count},
           {"dims", {m.num_aps(), m.num_ues(), m.num_antennas()}},
           {"checksum", m.checksum}};
  if (m.task == Task::kPowerControl) {
    j["config"] = m.scenario_config;
    j["scenario_seed"] = seed_to_json(m.scenario_seed);
    if (m.scenario) j["scenario"] = *m.scenario;
  } else {
    j["config"] = m.sv_config;
  }
}

void from_json(const Json& j, DatasetManifest& m) {
  m.format_version = j.at("format_version").get<int>();
  m.task = parse_task(j.at("task").get<std::string>());
  m.seed = seed_from_json(j.at("seed"));
  m.sample_count = j.at("sample_count").get<std::size_t>();
  m.checksum = j.at("checksum").get<std::uint32_t>();
  if (m.task == Task::kPowerControl) {
    m.scenario_config = j.at("config").get<ScenarioConfig>();
    m.scenario_seed = seed_from_json(j.at("scenario_seed"));
    if (auto it = j.find("scenario"); it != j.end()) m.scenario = it->get<Scenario>();
  } else {
    m.sv_config = j.at("config").get<SVChannelConfig>();
  }
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& doc) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

Json seed_to_json(std::uint64_t seed) { return std::to_string(seed); }

std::uint64_t seed_from_json(const Json& j) {
  if (j.is_string()) return std::stoull(j.get<std::string>());
  return j.get<std::uint64_t>();
}

}  // namespace cfmimo

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include "cfmimo/third_party/json.hpp"

#include "cfmimo/channel.hpp"
#include "cfmimo/dataset.hpp"

namespace cfmimo {

using Json = nlohmann::json;

// Unknown keys are ignored and missing keys keep their defaults, so partial
// config documents are valid.
void to_json(Json& j, const ScenarioConfig& c);
void from_json(const Json& j, ScenarioConfig& c);
void to_json(Json& j, const SVChannelConfig& c);
void from_json(const Json& j, SVChannelConfig& c);
void to_json(Json& j, const Scenario& s);
void from_json(const Json& j, Scenario& s);
void to_json(Json& j, const DatasetManifest& m);
void from_json(const Json& j, DatasetManifest& m);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& doc);

/// 64-bit seeds are stored as decimal strings so JSON readers that use
/// doubles do not round them.
Json seed_to_json(std::uint64_t seed);
std::uint64_t seed_from_json(const Json& j);

}  // namespace cfmimo

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include "cfmimo/json_io.hpp"
#include "cfmimo/mdgnn.hpp"

namespace cfmimo {

inline constexpr int kCheckpointFormatVersion = 1;

void to_json(Json& j, const TaskShape& s);
void from_json(const Json& j, TaskShape& s);
void to_json(Json& j, const BranchSpec& b);
void from_json(const Json& j, BranchSpec& b);
void to_json(Json& j, const ModelConfig& c);
void from_json(const Json& j, ModelConfig& c);

/// JSON manifest (architecture, taus, alpha, seed, step, input scales) plus
/// a CRC-32 checked float32 parameter blob next to it. Parameters are
/// stored at float precision, so call round_parameters_to_float first if an
/// exact round trip matters.
void checkpoint_write(const std::filesystem::path& manifest_path, const GnnModel& model);
GnnModel checkpoint_read(const std::filesystem::path& manifest_path);

}  // namespace cfmimo

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cfmimo/channel.hpp"

namespace cfmimo {

enum class Task { kPowerControl, kPrecoding };

std::string_view task_name(Task task);
Task parse_task(std::string_view name);

inline constexpr int kDatasetFormatVersion = 1;

/// Everything needed to regenerate a dataset: task, physics, seeds, and (for
/// the cell-free task) the fixed deployment geometry the samples share.
struct DatasetManifest {
  int format_version = kDatasetFormatVersion;
  Task task = Task::kPowerControl;
  ScenarioConfig scenario_config;
  SVChannelConfig sv_config;
  std::uint64_t scenario_seed = 0;
  std::uint64_t seed = 0;
  std::size_t sample_count = 0;
  std::optional<Scenario> scenario;
  std::uint32_t checksum = 0;

  std::size_t num_aps() const;
  std::size_t num_ues() const;
  std::size_t num_antennas() const;
  double p_max() const;
  double noise_power() const;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<ChannelTensor> samples;
};

/// Cell-free samples over one deployment drawn from `scenario_seed`; sample i
/// uses fading stream (seed, i). Gains are rounded to float32 precision so
/// the stored form is exact.
Dataset generate_power_control_dataset(const ScenarioConfig& config, std::uint64_t scenario_seed,
                                       std::uint64_t seed, std::size_t count,
                                       std::size_t workers = 1);

/// Saleh-Valenzuela single-transmitter samples viewed as 1 x K x Nt tensors.
Dataset generate_precoding_dataset(const SVChannelConfig& config, std::uint64_t seed,
                                   std::size_t count, std::size_t workers = 1);

/// Payload file written next to a manifest: same stem, ".bin".
std::filesystem::path payload_path_for(const std::filesystem::path& manifest_path);

/// Writes `<path>` (JSON manifest) and its payload: little-endian float32,
/// interleaved real/imag, sample-major then (j, k, n) row-major, CRC-32
/// recorded in the manifest.
void dataset_write(const std::filesystem::path& manifest_path, const Dataset& dataset);

/// Throws FormatVersionError, TruncatedPayloadError or ChecksumError for the
/// corresponding defects, ParseError for a malformed manifest.
Dataset dataset_read(const std::filesystem::path& manifest_path);

}  // namespace cfmimo

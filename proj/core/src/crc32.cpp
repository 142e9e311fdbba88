// SPDX-License-Identifier: Apache-2.0
#include "cfmimo/crc32.hpp"

#include <array>

namespace cfmimo {

namespace {

constexpr std::array<std::uint32_t, 256> make_table() {
  std::array<std::uint32_t, 256> t{};
  for (std::uint32_t i = 0; i < 256; ++i) {
    std::uint32_t c = i;
    for (int k = 0; k < 8; ++k) c = (c & 1U) ? 0xEDB88320U ^ (c >> 1) : c >> 1;
    t[i] = c;
  }
  return t;
}

constexpr auto kTable = make_table();

}  // namespace

std::uint32_t crc32(std::span<const std::byte> bytes, std::uint32_t seed) {
  std::uint32_t c = ~seed;
  for (auto b : bytes) c = kTable[(c ^ static_cast<std::uint32_t>(b)) & 0xFFU] ^ (c >> 8);
  return ~c;
}

}  // namespace cfmimo

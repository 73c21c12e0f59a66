#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace sf {

std::uint32_t crc32(std::span<const unsigned char> bytes, std::uint32_t seed = 0);
std::uint32_t crc32(std::string_view text, std::uint32_t seed = 0);

}  // namespace sf

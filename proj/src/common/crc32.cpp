#include "common/crc32.hpp"

#include <algorithm>

#include <zlib.h>

namespace sf {

std::uint32_t crc32(std::span<const unsigned char> bytes, std::uint32_t seed) {
  uLong crc = seed;
  // zlib takes uInt lengths; feed in chunks for large buffers
  std::size_t offset = 0;
  while (offset < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - offset, 1u << 30);
    crc = ::crc32(crc, bytes.data() + offset, static_cast<uInt>(n));
    offset += n;
  }
  return static_cast<std::uint32_t>(crc);
}

std::uint32_t crc32(std::string_view text, std::uint32_t seed) {
  return crc32(std::span<const unsigned char>(
                   reinterpret_cast<const unsigned char*>(text.data()), text.size()),
               seed);
}

}  // namespace sf

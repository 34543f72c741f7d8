#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace progviz::png {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
};

/// Encodes a width x height image filled with one color as an 8-bit RGB PNG.
std::vector<std::uint8_t> encode_solid(std::uint32_t width, std::uint32_t height, Rgb color);

struct Header {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
};

/// Checks the signature and a CRC-valid IHDR chunk. Does not inflate IDAT.
bool looks_valid(std::span<const std::uint8_t> bytes, Header* header = nullptr);

}  // namespace progviz::png

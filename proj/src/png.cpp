#include "progviz/png.hpp"

#include <zlib.h>

#include <array>
#include <stdexcept>
#include <string_view>

namespace progviz::png {

namespace {

constexpr std::array<std::uint8_t, 8> kSignature = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
         (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

void put_chunk(std::vector<std::uint8_t>& out, std::string_view type,
               std::span<const std::uint8_t> data) {
  put_u32(out, static_cast<std::uint32_t>(data.size()));
  const std::size_t type_at = out.size();
  out.insert(out.end(), type.begin(), type.end());
  out.insert(out.end(), data.begin(), data.end());
  const uLong crc = crc32(0L, out.data() + type_at, static_cast<uInt>(4 + data.size()));
  put_u32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

std::vector<std::uint8_t> encode_solid(std::uint32_t width, std::uint32_t height, Rgb color) {
  if (width == 0 || height == 0) throw std::invalid_argument("png: empty image");

  std::vector<std::uint8_t> raw;
  const std::size_t stride = 1 + 3 * std::size_t{width};
  raw.reserve(stride * height);
  for (std::uint32_t y = 0; y < height; ++y) {
    raw.push_back(0);  // filter: none
    for (std::uint32_t x = 0; x < width; ++x) {
      raw.push_back(color.r);
      raw.push_back(color.g);
      raw.push_back(color.b);
    }
  }
  uLongf packed_size = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> packed(packed_size);
  if (compress2(packed.data(), &packed_size, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK) {
    throw std::runtime_error("png: deflate failed");
  }
  packed.resize(packed_size);

  std::vector<std::uint8_t> out(kSignature.begin(), kSignature.end());
  std::vector<std::uint8_t> ihdr;
  put_u32(ihdr, width);
  put_u32(ihdr, height);
  ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0});  // 8-bit, truecolor, deflate, no filter, no interlace
  put_chunk(out, "IHDR", ihdr);
  put_chunk(out, "IDAT", packed);
  put_chunk(out, "IEND", {});
  return out;
}

bool looks_valid(std::span<const std::uint8_t> bytes, Header* header) {
  if (bytes.size() < kSignature.size() + 25) return false;
  if (!std::equal(kSignature.begin(), kSignature.end(), bytes.begin())) return false;
  const std::size_t at = kSignature.size();
  if (get_u32(bytes, at) != 13) return false;
  if (std::string_view(reinterpret_cast<const char*>(bytes.data() + at + 4), 4) != "IHDR") return false;
  const uLong crc = crc32(0L, bytes.data() + at + 4, 4 + 13);
  if (get_u32(bytes, at + 8 + 13) != static_cast<std::uint32_t>(crc)) return false;
  if (header) {
    header->width = get_u32(bytes, at + 8);
    header->height = get_u32(bytes, at + 12);
  }
  return true;
}

}  // namespace progviz::png

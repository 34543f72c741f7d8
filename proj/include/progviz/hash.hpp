#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace progviz {

/// Lower-case hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view bytes);
std::string sha256_hex(std::span<const std::uint8_t> bytes);

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Returns false on malformed input.
bool base64_decode(std::string_view text, std::vector<std::uint8_t>& out);

}  // namespace progviz

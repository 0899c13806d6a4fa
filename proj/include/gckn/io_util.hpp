#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gckn {

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws CorruptModel on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// Little-endian IEEE-754 binary64 packing.
std::string encode_doubles(std::span<const double> values);
std::vector<double> decode_doubles(std::string_view text);

}  // namespace gckn

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace psr {

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
/// std::nullopt on malformed input.
std::optional<std::vector<std::uint8_t>> base64_decode(const std::string& text);

}  // namespace psr

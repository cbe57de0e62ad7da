#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace driftlab {

using Sha256Digest = std::array<std::uint8_t, 32>;

Sha256Digest sha256(std::string_view bytes);

// Lowercase hex of the SHA-256 of `bytes`.
std::string sha256_hex(std::string_view bytes);

}  // namespace driftlab

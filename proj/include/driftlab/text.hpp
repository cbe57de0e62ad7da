#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace driftlab {

// Lowercased tokens split on ASCII whitespace and punctuation. Bytes >= 0x80
// are kept inside tokens so UTF-8 words survive intact.
std::vector<std::string> tokenize(std::string_view text);

std::string_view trim(std::string_view text);

}  // namespace driftlab

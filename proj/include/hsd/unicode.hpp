#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hsd::uni {

// UTF-8 decode; malformed byte sequences become U+FFFD.
std::vector<uint32_t> decode_utf8(const std::string& s);
std::string encode_utf8(const std::vector<uint32_t>& cps);

// Canonical composition (NFC): full decomposition, canonical reordering,
// primary-composite recomposition. Hangul is handled algorithmically.
std::vector<uint32_t> nfc(const std::vector<uint32_t>& cps);
std::string nfc(const std::string& s);

std::vector<uint32_t> to_lower(const std::vector<uint32_t>& cps);
std::string to_lower(const std::string& s);

bool is_whitespace(uint32_t cp);

// NFC-normalized, optionally lowercased, split on Unicode whitespace.
std::vector<std::string> normalize_and_split(const std::string& text, bool lowercase);

}  // namespace hsd::uni

#include "hsd/unicode.hpp"

#include <algorithm>
#include <cstddef>

namespace hsd::uni {

namespace {

#include "unicode_data.inc"

constexpr uint32_t kReplacement = 0xFFFD;

// Hangul syllable composition constants (UAX #15).
constexpr uint32_t kSBase = 0xAC00, kLBase = 0x1100, kVBase = 0x1161, kTBase = 0x11A7;
constexpr uint32_t kLCount = 19, kVCount = 21, kTCount = 28;
constexpr uint32_t kNCount = kVCount * kTCount;
constexpr uint32_t kSCount = kLCount * kNCount;

const SeqEntry* find_seq(const SeqEntry* table, std::size_t n, uint32_t cp) {
  std::size_t lo = 0, hi = n;
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (table[mid].cp < cp) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  return (lo < n && table[lo].cp == cp) ? &table[lo] : nullptr;
}

uint8_t ccc(uint32_t cp) {
  std::size_t lo = 0, hi = std::size(kCcc);
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (kCcc[mid].cp < cp) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  return (lo < std::size(kCcc) && kCcc[lo].cp == cp) ? kCcc[lo].ccc : 0;
}

uint32_t compose_pair(uint32_t a, uint32_t b) {
  // Hangul LV / LVT composition.
  if (a >= kLBase && a < kLBase + kLCount && b >= kVBase && b < kVBase + kVCount) {
    return kSBase + ((a - kLBase) * kVCount + (b - kVBase)) * kTCount;
  }
  if (a >= kSBase && a < kSBase + kSCount && (a - kSBase) % kTCount == 0 &&
      b > kTBase && b < kTBase + kTCount) {
    return a + (b - kTBase);
  }
  std::size_t lo = 0, hi = std::size(kComp);
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (kComp[mid].first < a || (kComp[mid].first == a && kComp[mid].second < b)) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  if (lo < std::size(kComp) && kComp[lo].first == a && kComp[lo].second == b) {
    return kComp[lo].composed;
  }
  return 0;
}

void append_nfd(uint32_t cp, std::vector<uint32_t>& out) {
  if (cp >= kSBase && cp < kSBase + kSCount) {
    const uint32_t idx = cp - kSBase;
    out.push_back(kLBase + idx / kNCount);
    out.push_back(kVBase + (idx % kNCount) / kTCount);
    if (idx % kTCount != 0) out.push_back(kTBase + idx % kTCount);
    return;
  }
  if (const SeqEntry* e = find_seq(kNfd, std::size(kNfd), cp)) {
    for (uint8_t i = 0; i < e->len; ++i) out.push_back(kNfdPool[e->offset + i]);
    return;
  }
  out.push_back(cp);
}

// Canonical ordering: bubble adjacent nonzero-ccc pairs that are out of order.
void canonical_order(std::vector<uint32_t>& cps) {
  if (cps.size() < 2) return;
  bool swapped = true;
  while (swapped) {
    swapped = false;
    for (std::size_t i = 1; i < cps.size(); ++i) {
      const uint8_t a = ccc(cps[i - 1]);
      const uint8_t b = ccc(cps[i]);
      if (a > b && b != 0) {
        std::swap(cps[i - 1], cps[i]);
        swapped = true;
      }
    }
  }
}

}  // namespace

std::vector<uint32_t> decode_utf8(const std::string& s) {
  std::vector<uint32_t> out;
  out.reserve(s.size());
  std::size_t i = 0;
  const auto* b = reinterpret_cast<const unsigned char*>(s.data());
  while (i < s.size()) {
    const unsigned char c = b[i];
    uint32_t cp = 0;
    std::size_t len = 0;
    if (c < 0x80) {
      cp = c;
      len = 1;
    } else if ((c & 0xE0) == 0xC0) {
      cp = c & 0x1F;
      len = 2;
    } else if ((c & 0xF0) == 0xE0) {
      cp = c & 0x0F;
      len = 3;
    } else if ((c & 0xF8) == 0xF0) {
      cp = c & 0x07;
      len = 4;
    } else {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    if (i + len > s.size()) {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    bool ok = true;
    for (std::size_t k = 1; k < len; ++k) {
      if ((b[i + k] & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (b[i + k] & 0x3F);
    }
    if (!ok || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF) ||
        (len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000)) {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::string encode_utf8(const std::vector<uint32_t>& cps) {
  std::string out;
  out.reserve(cps.size());
  for (uint32_t cp : cps) {
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
  }
  return out;
}

std::vector<uint32_t> nfc(const std::vector<uint32_t>& cps) {
  std::vector<uint32_t> d;
  d.reserve(cps.size() + 8);
  for (uint32_t cp : cps) append_nfd(cp, d);
  canonical_order(d);

  // Composition pass. A character combines with the last starter unless a
  // character between them has ccc == 0 or ccc >= its own (blocked).
  std::vector<uint32_t> out;
  out.reserve(d.size());
  std::ptrdiff_t last_starter = -1;
  uint8_t prev_ccc = 0;
  for (uint32_t cp : d) {
    const uint8_t cc = ccc(cp);
    if (last_starter >= 0 &&
        (out.size() == static_cast<std::size_t>(last_starter) + 1 || prev_ccc < cc)) {
      if (const uint32_t comp = compose_pair(out[last_starter], cp)) {
        out[last_starter] = comp;
        continue;
      }
    }
    out.push_back(cp);
    if (cc == 0) {
      last_starter = static_cast<std::ptrdiff_t>(out.size()) - 1;
      prev_ccc = 0;
    } else {
      prev_ccc = cc;
    }
  }
  return out;
}

std::string nfc(const std::string& s) { return encode_utf8(nfc(decode_utf8(s))); }

std::vector<uint32_t> to_lower(const std::vector<uint32_t>& cps) {
  std::vector<uint32_t> out;
  out.reserve(cps.size());
  for (uint32_t cp : cps) {
    if (const SeqEntry* e = find_seq(kLower, std::size(kLower), cp)) {
      for (uint8_t i = 0; i < e->len; ++i) out.push_back(kLowerPool[e->offset + i]);
    } else {
      out.push_back(cp);
    }
  }
  return out;
}

std::string to_lower(const std::string& s) { return encode_utf8(to_lower(decode_utf8(s))); }

bool is_whitespace(uint32_t cp) {
  return std::binary_search(std::begin(kWhitespace), std::end(kWhitespace), cp);
}

std::vector<std::string> normalize_and_split(const std::string& text, bool lowercase) {
  std::vector<uint32_t> cps = nfc(decode_utf8(text));
  if (lowercase) cps = to_lower(cps);
  std::vector<std::string> words;
  std::vector<uint32_t> cur;
  for (uint32_t cp : cps) {
    if (is_whitespace(cp)) {
      if (!cur.empty()) {
        words.push_back(encode_utf8(cur));
        cur.clear();
      }
    } else {
      cur.push_back(cp);
    }
  }
  if (!cur.empty()) words.push_back(encode_utf8(cur));
  return words;
}

}  // namespace hsd::uni

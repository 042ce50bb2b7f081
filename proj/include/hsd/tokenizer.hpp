#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hsd/vocab.hpp"

namespace hsd::encoder {

// Real tokens always occupy a prefix: CLS + pieces + SEP, then PAD up to
// exactly max_len. mask[i] = 1 iff position i is a real token.
struct TokenSequence {
  std::vector<int> ids;              // subword path (empty on the character path)
  std::vector<std::string> tokens;   // surface strings, all paths
  std::vector<std::uint8_t> mask;
  std::size_t real_len = 0;

  std::size_t max_len() const { return mask.size(); }
};

struct TokenizerOptions {
  std::size_t max_len = 128;
  bool lowercase = true;                     // "uncased" mode
  std::size_t max_chars_per_word = 100;      // longer words collapse to UNK
};

// Greedy longest-match-first WordPiece with "##" continuation prefix.
// A word with any unmatchable remainder becomes a single UNK.
std::vector<std::string> wordpiece(const std::string& word, const Vocabulary& vocab);

TokenSequence tokenize_subword(const std::string& text, const Vocabulary& vocab,
                               const TokenizerOptions& opts);

// Character-path tokenization: whitespace words kept whole; CLS/SEP/PAD are
// the usual sentinel strings. No vocabulary involved.
TokenSequence tokenize_words(const std::string& text, const TokenizerOptions& opts);

}  // namespace hsd::encoder

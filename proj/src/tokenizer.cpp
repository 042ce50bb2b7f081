#include "hsd/tokenizer.hpp"

#include "hsd/unicode.hpp"

namespace hsd::encoder {

std::vector<std::string> wordpiece(const std::string& word, const Vocabulary& vocab) {
  const auto cps = uni::decode_utf8(word);
  std::vector<std::string> pieces;
  std::size_t start = 0;
  while (start < cps.size()) {
    std::size_t end = cps.size();
    std::string match;
    while (start < end) {
      std::string sub = uni::encode_utf8({cps.begin() + static_cast<std::ptrdiff_t>(start),
                                          cps.begin() + static_cast<std::ptrdiff_t>(end)});
      if (start > 0) sub = "##" + sub;
      if (vocab.contains(sub)) {
        match = std::move(sub);
        break;
      }
      --end;
    }
    if (match.empty()) {
      return {kUnk};
    }
    pieces.push_back(std::move(match));
    start = end;
  }
  return pieces;
}

namespace {

TokenSequence assemble(std::vector<std::string> pieces, const Vocabulary* vocab,
                       std::size_t max_len) {
  if (max_len < 2) {
    throw ConfigError("max_len must be at least 2 (CLS and SEP)");
  }
  if (pieces.size() > max_len - 2) pieces.resize(max_len - 2);

  TokenSequence seq;
  seq.tokens.reserve(max_len);
  seq.tokens.push_back(kCls);
  for (auto& p : pieces) seq.tokens.push_back(std::move(p));
  seq.tokens.push_back(kSep);
  seq.real_len = seq.tokens.size();
  seq.tokens.resize(max_len, kPad);

  seq.mask.assign(max_len, 0);
  for (std::size_t i = 0; i < seq.real_len; ++i) seq.mask[i] = 1;

  if (vocab != nullptr) {
    seq.ids.reserve(max_len);
    for (const auto& t : seq.tokens) {
      seq.ids.push_back(vocab->contains(t) ? vocab->id(t) : vocab->unk_id());
    }
  }
  return seq;
}

}  // namespace

TokenSequence tokenize_subword(const std::string& text, const Vocabulary& vocab,
                               const TokenizerOptions& opts) {
  std::vector<std::string> pieces;
  for (const auto& word : uni::normalize_and_split(text, opts.lowercase)) {
    if (uni::decode_utf8(word).size() > opts.max_chars_per_word) {
      pieces.push_back(kUnk);
      continue;
    }
    for (auto& p : wordpiece(word, vocab)) pieces.push_back(std::move(p));
  }
  return assemble(std::move(pieces), &vocab, opts.max_len);
}

TokenSequence tokenize_words(const std::string& text, const TokenizerOptions& opts) {
  std::vector<std::string> words = uni::normalize_and_split(text, opts.lowercase);
  return assemble(std::move(words), nullptr, opts.max_len);
}

}  // namespace hsd::encoder

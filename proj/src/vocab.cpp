#include "hsd/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "hsd/unicode.hpp"

namespace hsd::encoder {

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty()) {
      throw ConfigError("vocabulary contains an empty token");
    }
    if (!ids_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw ConfigError("vocabulary contains duplicate token '" + tokens_[i] + "'");
    }
  }
  auto find_special = [&](const char* tok) {
    auto it = ids_.find(tok);
    if (it == ids_.end()) {
      throw ConfigError(std::string("vocabulary is missing special token ") + tok);
    }
    return it->second;
  };
  pad_ = find_special(kPad);
  unk_ = find_special(kUnk);
  cls_ = find_special(kCls);
  sep_ = find_special(kSep);
}

int Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  if (it == ids_.end()) {
    throw ConfigError("token '" + token + "' not in vocabulary");
  }
  return it->second;
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open vocabulary file: " + path);
  }
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    tokens.push_back(line);
  }
  return Vocabulary(std::move(tokens));
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open vocabulary file for writing: " + path);
  }
  for (const auto& t : tokens_) out << t << '\n';
  if (!out) {
    throw IoError("write failure on " + path);
  }
}

Vocabulary build_vocabulary(const std::vector<std::string>& texts, const VocabBuildOptions& opts) {
  // Word frequencies over normalized text.
  std::map<std::string, std::size_t> word_freq;
  for (const auto& text : texts) {
    for (auto& w : uni::normalize_and_split(text, opts.lowercase)) ++word_freq[w];
  }

  // Each word becomes a symbol sequence: first character plain, the rest
  // with the continuation prefix.
  struct Entry {
    std::vector<std::string> symbols;
    std::size_t freq;
  };
  std::vector<Entry> entries;
  std::map<std::string, std::size_t> base_symbols;
  for (const auto& [word, freq] : word_freq) {
    const auto cps = uni::decode_utf8(word);
    Entry e;
    e.freq = freq;
    for (std::size_t i = 0; i < cps.size(); ++i) {
      std::string sym = uni::encode_utf8({cps[i]});
      if (i > 0) sym = "##" + sym;
      base_symbols[sym] += freq;
      e.symbols.push_back(std::move(sym));
    }
    if (!e.symbols.empty()) entries.push_back(std::move(e));
  }

  std::vector<std::string> vocab = {kPad, kUnk, kCls, kSep};
  {
    // Seed with base characters, most frequent first if the cap binds.
    std::vector<std::pair<std::string, std::size_t>> ranked(base_symbols.begin(),
                                                            base_symbols.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    for (const auto& [sym, freq] : ranked) {
      (void)freq;
      if (vocab.size() >= opts.target_size && opts.target_size > 4) break;
      vocab.push_back(sym);
    }
  }

  auto merged_symbol = [](const std::string& left, const std::string& right) {
    return left + (right.rfind("##", 0) == 0 ? right.substr(2) : right);
  };

  std::set<std::string> seen(vocab.begin(), vocab.end());
  while (vocab.size() < opts.target_size) {
    std::map<std::pair<std::string, std::string>, std::size_t> pair_freq;
    for (const auto& e : entries) {
      for (std::size_t i = 0; i + 1 < e.symbols.size(); ++i) {
        pair_freq[{e.symbols[i], e.symbols[i + 1]}] += e.freq;
      }
    }
    // Best pair: highest frequency, lexicographically smallest on ties.
    std::pair<std::string, std::string> best;
    std::size_t best_freq = 0;
    for (const auto& [pair, freq] : pair_freq) {
      if (freq > best_freq) {
        best = pair;
        best_freq = freq;
      }
    }
    if (best_freq < opts.min_pair_frequency) break;

    const std::string merged = merged_symbol(best.first, best.second);
    for (auto& e : entries) {
      std::vector<std::string> out;
      out.reserve(e.symbols.size());
      for (std::size_t i = 0; i < e.symbols.size(); ++i) {
        if (i + 1 < e.symbols.size() && e.symbols[i] == best.first &&
            e.symbols[i + 1] == best.second) {
          out.push_back(merged);
          ++i;
        } else {
          out.push_back(e.symbols[i]);
        }
      }
      e.symbols = std::move(out);
    }
    if (seen.insert(merged).second) vocab.push_back(merged);
  }

  return Vocabulary(std::move(vocab));
}

}  // namespace hsd::encoder

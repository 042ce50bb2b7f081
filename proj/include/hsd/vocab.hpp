#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "hsd/errors.hpp"

namespace hsd::encoder {

inline constexpr const char* kPad = "[PAD]";
inline constexpr const char* kUnk = "[UNK]";
inline constexpr const char* kCls = "[CLS]";
inline constexpr const char* kSep = "[SEP]";

// Subword vocabulary: dense ids, "##" continuation-prefix convention,
// PAD/UNK/CLS/SEP always present.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  bool contains(const std::string& token) const { return ids_.count(token) != 0; }
  int id(const std::string& token) const;  // throws if absent

  int pad_id() const { return pad_; }
  int unk_id() const { return unk_; }
  int cls_id() const { return cls_; }
  int sep_id() const { return sep_; }

  // One token per line, line index = id.
  static Vocabulary load(const std::string& path);
  void save(const std::string& path) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
  int pad_ = -1, unk_ = -1, cls_ = -1, sep_ = -1;
};

struct VocabBuildOptions {
  std::size_t target_size = 2048;
  std::size_t min_pair_frequency = 2;
  bool lowercase = true;
};

// Frequency-capped subword induction: start from characters (continuations
// carry the "##" prefix), repeatedly merge the most frequent adjacent pair
// until target_size is reached or no pair clears min_pair_frequency. Ties
// break lexicographically so induction is deterministic.
Vocabulary build_vocabulary(const std::vector<std::string>& texts, const VocabBuildOptions& opts);

}  // namespace hsd::encoder

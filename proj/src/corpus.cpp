#include "hsd/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "hsd/rng.hpp"

namespace hsd::corpus {

namespace {

std::string trim_trailing(const std::string& s) {
  std::size_t end = s.size();
  while (end > 0 && (s[end - 1] == ' ' || s[end - 1] == '\t' || s[end - 1] == '\r' ||
                     s[end - 1] == '\n')) {
    --end;
  }
  return s.substr(0, end);
}

bool is_blank(const std::string& s) {
  return s.find_first_not_of(" \t\r\n") == std::string::npos;
}

}  // namespace

const char* language_name(Language lang) {
  switch (lang) {
    case Language::English:
      return "english";
    case Language::Tamil:
      return "tamil";
    case Language::Malayalam:
      return "malayalam";
  }
  return "english";
}

Language parse_language(const std::string& name) {
  std::string low;
  for (char c : name) low.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (low == "english") return Language::English;
  if (low == "tamil") return Language::Tamil;
  if (low == "malayalam") return Language::Malayalam;
  throw ConfigError("unknown language '" + name + "' (expected english, tamil or malayalam)");
}

const char* canonical_label_name(Label label) {
  switch (label) {
    case Label::Hope:
      return "Hope";
    case Label::NotHope:
      return "NotHope";
    case Label::OtherLanguage:
      return "OtherLanguage";
  }
  return "Hope";
}

LabelSchema LabelSchema::defaults(Language lang) {
  LabelSchema s;
  s.language = lang;
  s.surface[0] = "Hope_speech";
  s.surface[1] = "Non_hope_speech";
  switch (lang) {
    case Language::English:
      s.surface[2] = "not-English";
      break;
    case Language::Tamil:
      s.surface[2] = "not-Tamil";
      break;
    case Language::Malayalam:
      s.surface[2] = "not-malayalam";
      break;
  }
  return s;
}

bool LabelSchema::canonical(const std::string& raw, Label* out) const {
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    if (raw == surface[i]) {
      *out = static_cast<Label>(i);
      return true;
    }
  }
  return false;
}

void LabelSchema::validate() const {
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    if (surface[i].empty()) {
      throw ConfigError(std::string("label schema: empty surface string for class ") +
                        canonical_label_name(static_cast<Label>(i)));
    }
    for (std::size_t j = i + 1; j < kNumClasses; ++j) {
      if (surface[i] == surface[j]) {
        throw ConfigError("label schema: surface string '" + surface[i] +
                          "' assigned to two classes");
      }
    }
  }
}

void SplitSpec::validate() const {
  for (double r : {train, dev, test}) {
    if (!(r > 0.0 && r < 1.0)) {
      throw ConfigError("split ratios must each lie in (0,1)");
    }
  }
  if (std::fabs(train + dev + test - 1.0) > 1e-9) {
    throw ConfigError("split ratios must sum to 1");
  }
}

LoadResult load_tsv(const std::string& path, Language language, const LabelSchema& schema,
                    bool skip_header) {
  schema.validate();
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open corpus file: " + path);
  }

  LoadResult result;
  result.corpus.language = language;
  result.corpus.schema = schema;

  std::map<std::string, std::size_t> unknown;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first && skip_header) {
      first = false;
      continue;
    }
    first = false;
    if (is_blank(line)) continue;
    ++result.report.lines_seen;

    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      ++result.report.rejected_malformed;
      continue;
    }
    std::string text = trim_trailing(line.substr(0, tab));
    std::string rest = line.substr(tab + 1);
    const std::size_t tab2 = rest.find('\t');
    std::string raw_label = trim_trailing(tab2 == std::string::npos ? rest : rest.substr(0, tab2));

    if (text.empty()) {
      ++result.report.rejected_malformed;
      continue;
    }
    Label label;
    if (!schema.canonical(raw_label, &label)) {
      ++result.report.rejected_unknown_label;
      ++unknown[raw_label];
      continue;
    }
    result.corpus.records.push_back({std::move(text), label});
    ++result.report.records_loaded;
  }
  if (in.bad()) {
    throw IoError("read failure on corpus file: " + path);
  }

  for (auto& [spelling, count] : unknown) {
    result.report.unknown_labels.emplace_back(spelling, count);
  }

  if (result.report.lines_seen > 0) {
    const double frac = static_cast<double>(result.report.rejected_unknown_label) /
                        static_cast<double>(result.report.lines_seen);
    if (frac > kUnknownLabelTolerance) {
      std::ostringstream msg;
      msg << "label schema mismatch in " << path << ": " << result.report.rejected_unknown_label
          << " of " << result.report.lines_seen << " lines carry unknown labels (";
      bool sep = false;
      for (const auto& [spelling, count] : result.report.unknown_labels) {
        if (sep) msg << ", ";
        msg << "'" << spelling << "' x" << count;
        sep = true;
      }
      msg << "); expected " << schema.surface_of(Label::Hope) << " / "
          << schema.surface_of(Label::NotHope) << " / "
          << schema.surface_of(Label::OtherLanguage);
      throw SchemaMismatchError(msg.str());
    }
  }
  return result;
}

void save_tsv(const LabeledCorpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open file for writing: " + path);
  }
  for (const auto& rec : corpus.records) {
    out << rec.text << '\t' << corpus.schema.surface_of(rec.label) << '\n';
  }
  if (!out) {
    throw IoError("write failure on " + path);
  }
}

namespace {

LabeledCorpus take(const LabeledCorpus& corpus, std::vector<std::size_t> idx) {
  std::sort(idx.begin(), idx.end());
  LabeledCorpus out;
  out.language = corpus.language;
  out.schema = corpus.schema;
  out.records.reserve(idx.size());
  for (std::size_t i : idx) out.records.push_back(corpus.records[i]);
  return out;
}

}  // namespace

std::tuple<LabeledCorpus, LabeledCorpus, LabeledCorpus> split_corpus(const LabeledCorpus& corpus,
                                                                     const SplitSpec& spec) {
  spec.validate();
  if (corpus.empty()) {
    throw DegenerateSplitError("cannot split an empty corpus");
  }

  Rng rng(spec.seed);
  std::vector<std::size_t> train_idx, dev_idx, test_idx;

  auto partition = [&](std::vector<std::size_t>& pool) {
    rng.shuffle(pool);
    const std::size_t n = pool.size();
    const std::size_t n_train =
        static_cast<std::size_t>(std::floor(static_cast<double>(n) * spec.train));
    const std::size_t n_dev =
        static_cast<std::size_t>(std::floor(static_cast<double>(n) * spec.dev));
    for (std::size_t i = 0; i < n; ++i) {
      if (i < n_train) {
        train_idx.push_back(pool[i]);
      } else if (i < n_train + n_dev) {
        dev_idx.push_back(pool[i]);
      } else {
        test_idx.push_back(pool[i]);
      }
    }
  };

  if (spec.stratified) {
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      std::vector<std::size_t> pool;
      for (std::size_t i = 0; i < corpus.size(); ++i) {
        if (static_cast<std::size_t>(corpus.records[i].label) == c) pool.push_back(i);
      }
      if (!pool.empty()) partition(pool);
    }
  } else {
    std::vector<std::size_t> pool(corpus.size());
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
    partition(pool);
  }

  if (train_idx.empty() || dev_idx.empty() || test_idx.empty()) {
    throw DegenerateSplitError("split produced an empty subset (corpus too small for ratios)");
  }
  return {take(corpus, std::move(train_idx)), take(corpus, std::move(dev_idx)),
          take(corpus, std::move(test_idx))};
}

DistributionTable class_distribution(const LabeledCorpus& corpus) {
  DistributionTable t;
  for (const auto& rec : corpus.records) {
    ++t.counts[static_cast<std::size_t>(rec.label)];
    ++t.total;
  }
  return t;
}

std::string render_distribution(const DistributionTable& table, bool machine_readable) {
  std::ostringstream out;
  if (machine_readable) {
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      out << canonical_label_name(static_cast<Label>(c)) << ',' << table.counts[c] << '\n';
    }
    out << "Total," << table.total << '\n';
    return out.str();
  }
  char buf[64];
  out << "Class           Count\n";
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::snprintf(buf, sizeof(buf), "%-14s %6llu\n", canonical_label_name(static_cast<Label>(c)),
                  static_cast<unsigned long long>(table.counts[c]));
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "%-14s %6llu\n", "Total",
                static_cast<unsigned long long>(table.total));
  out << buf;
  return out.str();
}

}  // namespace hsd::corpus

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "hsd/errors.hpp"

namespace hsd::corpus {

enum class Language { English, Tamil, Malayalam };
enum class Label { Hope = 0, NotHope = 1, OtherLanguage = 2 };

constexpr std::size_t kNumClasses = 3;

const char* language_name(Language lang);
Language parse_language(const std::string& name);
const char* canonical_label_name(Label label);

// Maps each canonical class to its raw-file surface spelling for one
// language. The released files are not self-describing, so the spellings
// are configurable; the defaults follow the shared-task release style
// ("Hope_speech", "Non_hope_speech", "not-<Language>").
struct LabelSchema {
  Language language = Language::English;
  std::array<std::string, kNumClasses> surface;  // indexed by Label

  static LabelSchema defaults(Language lang);

  // Surface string -> canonical label; false if unknown.
  bool canonical(const std::string& raw, Label* out) const;
  const std::string& surface_of(Label label) const {
    return surface[static_cast<std::size_t>(label)];
  }
  void validate() const;  // injective, non-empty
};

struct LabeledRecord {
  std::string text;
  Label label = Label::Hope;

  bool operator==(const LabeledRecord&) const = default;
};

struct LabeledCorpus {
  Language language = Language::English;
  LabelSchema schema;
  std::vector<LabeledRecord> records;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

struct DistributionTable {
  std::array<std::uint64_t, kNumClasses> counts{};
  std::uint64_t total = 0;
};

struct SplitSpec {
  double train = 0.8;
  double dev = 0.1;
  double test = 0.1;
  std::uint64_t seed = 0;
  bool stratified = false;

  void validate() const;  // each ratio in (0,1), sum == 1 within 1e-9
};

// Rejected-line bookkeeping surfaced by load_tsv. Unknown-label lines are
// never silently dropped; they are counted here and, past the tolerance
// threshold, turn into a SchemaMismatchError.
struct LoadReport {
  std::size_t lines_seen = 0;       // non-empty data lines
  std::size_t records_loaded = 0;
  std::size_t rejected_unknown_label = 0;
  std::size_t rejected_malformed = 0;  // fewer than 2 fields or empty text
  std::vector<std::pair<std::string, std::size_t>> unknown_labels;  // spelling -> count
};

struct LoadResult {
  LabeledCorpus corpus;
  LoadReport report;
};

// Fraction of unknown-label lines above which load_tsv raises
// SchemaMismatchError (wrong-language schema protection).
constexpr double kUnknownLabelTolerance = 0.05;

// TSV layout: text<TAB>label[<TAB>ignored...], UTF-8, LF or CRLF. No header
// unless skip_header is set. Text is kept as-is apart from trailing
// whitespace/CR trimming; classifier-side normalization happens later in the
// encoder so corpus statistics stay comparable across experiments.
LoadResult load_tsv(const std::string& path, Language language, const LabelSchema& schema,
                    bool skip_header = false);

void save_tsv(const LabeledCorpus& corpus, const std::string& path);

// Floor sizes for train and dev, remainder to test; shuffled-index partition
// (Fisher-Yates, seeded) or per-class stratified when spec.stratified. Each
// split preserves the original record order.
std::tuple<LabeledCorpus, LabeledCorpus, LabeledCorpus> split_corpus(const LabeledCorpus& corpus,
                                                                     const SplitSpec& spec);

DistributionTable class_distribution(const LabeledCorpus& corpus);

std::string render_distribution(const DistributionTable& table, bool machine_readable);

}  // namespace hsd::corpus

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hsd/corpus.hpp"

namespace hsd::metrics {

// Rows are gold classes, columns predicted.
struct ConfusionMatrix {
  std::size_t classes = 0;
  std::vector<std::uint64_t> counts;

  explicit ConfusionMatrix(std::size_t classes = 0)
      : classes(classes), counts(classes * classes, 0) {}

  std::uint64_t& at(std::size_t gold, std::size_t pred) { return counts[gold * classes + pred]; }
  std::uint64_t at(std::size_t gold, std::size_t pred) const {
    return counts[gold * classes + pred];
  }
  std::uint64_t total() const;
};

ConfusionMatrix confusion(const std::vector<std::size_t>& gold, const std::vector<std::size_t>& pred,
                          std::size_t classes);
ConfusionMatrix confusion(const std::vector<corpus::Label>& gold,
                          const std::vector<corpus::Label>& pred);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;
  // Set when a zero denominator forced any of the three values to 0.
  bool zero_division = false;
};

ClassMetrics per_class_prf(const ConfusionMatrix& cm, std::size_t c);

struct EvaluationReport {
  std::vector<ClassMetrics> per_class;
  ClassMetrics macro;
  ClassMetrics weighted;
  double accuracy = 0.0;
  std::uint64_t total = 0;
};

EvaluationReport aggregate_report(const ConfusionMatrix& cm);

// Aligned table: class rows, then macro and weighted averages, 4 decimals.
std::string render_report(const EvaluationReport& report,
                          const std::vector<std::string>& class_names);
// Machine rows: class,precision,recall,f1,support.
std::string render_report_rows(const EvaluationReport& report,
                               const std::vector<std::string>& class_names);

struct RunSummary {
  std::string architecture;
  std::string embedding;
  double dev_weighted_f1 = 0.0;
  double test_weighted_f1 = 0.0;
  bool has_test = false;
};

// Comparison layout, one line per run, sorted by test weighted F1 (dev F1
// breaks ties) descending.
std::string render_comparison(std::vector<RunSummary> runs, bool machine);

}  // namespace hsd::metrics

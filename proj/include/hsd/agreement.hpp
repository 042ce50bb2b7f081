#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hsd/errors.hpp"

namespace hsd::agreement {

constexpr int kMissing = -1;

// Items x annotators matrix of categorical codes; kMissing marks an empty
// cell. Codes are dense category indices into `categories`.
struct ReliabilityMatrix {
  std::vector<std::string> categories;
  std::vector<std::vector<int>> values;  // values[item][annotator]

  std::size_t items() const { return values.size(); }
  std::size_t annotators() const { return values.empty() ? 0 : values[0].size(); }
  void validate() const;  // >=2 annotators, >=1 item with >=2 codes, rectangular
};

struct CoincidenceResult {
  std::vector<std::vector<double>> o;  // o[c][k], symmetric
  std::vector<double> marginals;       // n_c = sum_k o[c][k]
  double n = 0.0;                      // sum_c n_c
};

// Each item with m >= 2 codes contributes 1/(m-1) per ordered pair of
// distinct annotator positions.
CoincidenceResult coincidence_matrix(const ReliabilityMatrix& m);

// Nominal-metric alpha: 1 - D_o/D_e with
//   D_o = sum_{c != k} o_ck / n
//   D_e = sum_{c != k} n_c n_k / (n (n-1)).
// Throws UndefinedAlphaError when D_e == 0 (single category observed).
double krippendorff_alpha(const ReliabilityMatrix& m);

// CSV reliability data: one row per item, one column per annotator, empty
// cell = missing. Cells are trimmed; category set is the sorted code set.
ReliabilityMatrix load_reliability_csv(const std::string& path);
ReliabilityMatrix parse_reliability_csv(const std::string& content);

}  // namespace hsd::agreement

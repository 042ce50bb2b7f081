#include "hsd/agreement.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace hsd::agreement {

void ReliabilityMatrix::validate() const {
  if (annotators() < 2) {
    throw InsufficientDataError("reliability matrix needs at least 2 annotators");
  }
  std::size_t pairable = 0;
  for (const auto& row : values) {
    if (row.size() != annotators()) {
      throw ConfigError("reliability matrix is not rectangular");
    }
    std::size_t coded = 0;
    for (int v : row) {
      if (v != kMissing) {
        if (v < 0 || static_cast<std::size_t>(v) >= categories.size()) {
          throw ConfigError("reliability matrix contains an out-of-range category code");
        }
        ++coded;
      }
    }
    if (coded >= 2) ++pairable;
  }
  if (pairable == 0) {
    throw InsufficientDataError(
        "no item carries two or more codes; agreement is not computable");
  }
}

CoincidenceResult coincidence_matrix(const ReliabilityMatrix& m) {
  m.validate();
  const std::size_t c = m.categories.size();
  CoincidenceResult r;
  r.o.assign(c, std::vector<double>(c, 0.0));
  r.marginals.assign(c, 0.0);

  for (const auto& row : m.values) {
    std::vector<int> codes;
    for (int v : row) {
      if (v != kMissing) codes.push_back(v);
    }
    const std::size_t mu = codes.size();
    if (mu < 2) continue;  // unpairable item contributes nothing
    const double w = 1.0 / static_cast<double>(mu - 1);
    for (std::size_t i = 0; i < mu; ++i) {
      for (std::size_t j = 0; j < mu; ++j) {
        if (i == j) continue;
        r.o[static_cast<std::size_t>(codes[i])][static_cast<std::size_t>(codes[j])] += w;
      }
    }
  }
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t k = 0; k < c; ++k) r.marginals[i] += r.o[i][k];
    r.n += r.marginals[i];
  }
  return r;
}

double krippendorff_alpha(const ReliabilityMatrix& m) {
  const CoincidenceResult r = coincidence_matrix(m);
  const std::size_t c = m.categories.size();

  double observed = 0.0;
  double expected = 0.0;
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t k = 0; k < c; ++k) {
      if (i == k) continue;
      observed += r.o[i][k];
      expected += r.marginals[i] * r.marginals[k];
    }
  }
  const double d_o = observed / r.n;
  const double d_e = expected / (r.n * (r.n - 1.0));
  if (d_e == 0.0) {
    throw UndefinedAlphaError(
        "alpha undefined: a single category is observed, expected disagreement is zero");
  }
  return 1.0 - d_o / d_e;
}

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

ReliabilityMatrix parse_reliability_csv(const std::string& content) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(content);
  std::string line;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    width = std::max(width, cells.size());
    rows.push_back(std::move(cells));
  }
  if (rows.empty()) {
    throw InsufficientDataError("reliability CSV contains no data rows");
  }

  std::map<std::string, int> codes;
  for (const auto& row : rows) {
    for (const auto& cell : row) {
      if (!cell.empty()) codes.emplace(cell, 0);
    }
  }
  ReliabilityMatrix m;
  for (auto& [name, id] : codes) {
    id = static_cast<int>(m.categories.size());
    m.categories.push_back(name);
  }
  for (const auto& row : rows) {
    std::vector<int> vals(width, kMissing);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (!row[j].empty()) vals[j] = codes.at(row[j]);
    }
    m.values.push_back(std::move(vals));
  }
  m.validate();
  return m;
}

ReliabilityMatrix load_reliability_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open reliability file: " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_reliability_csv(buf.str());
}

}  // namespace hsd::agreement

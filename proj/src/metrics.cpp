#include "hsd/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "hsd/errors.hpp"

namespace hsd::metrics {

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t n = 0;
  for (std::uint64_t c : counts) n += c;
  return n;
}

ConfusionMatrix confusion(const std::vector<std::size_t>& gold, const std::vector<std::size_t>& pred,
                          std::size_t classes) {
  if (gold.size() != pred.size())
    throw ConfigError("gold and predicted label lists differ in length");
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] >= classes || pred[i] >= classes)
      throw ConfigError("label index outside the schema");
    ++cm.at(gold[i], pred[i]);
  }
  return cm;
}

ConfusionMatrix confusion(const std::vector<corpus::Label>& gold,
                          const std::vector<corpus::Label>& pred) {
  std::vector<std::size_t> g(gold.size()), p(pred.size());
  for (std::size_t i = 0; i < gold.size(); ++i) g[i] = static_cast<std::size_t>(gold[i]);
  for (std::size_t i = 0; i < pred.size(); ++i) p[i] = static_cast<std::size_t>(pred[i]);
  return confusion(g, p, corpus::kNumClasses);
}

ClassMetrics per_class_prf(const ConfusionMatrix& cm, std::size_t c) {
  std::uint64_t tp = cm.at(c, c), fp = 0, fn = 0;
  for (std::size_t k = 0; k < cm.classes; ++k) {
    if (k == c) continue;
    fp += cm.at(k, c);
    fn += cm.at(c, k);
  }
  ClassMetrics m;
  m.support = tp + fn;
  if (tp + fp > 0) {
    m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  } else {
    m.zero_division = true;
  }
  if (tp + fn > 0) {
    m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  } else {
    m.zero_division = true;
  }
  if (m.precision + m.recall > 0.0) {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  } else {
    m.zero_division = true;
  }
  return m;
}

EvaluationReport aggregate_report(const ConfusionMatrix& cm) {
  EvaluationReport rep;
  rep.total = cm.total();
  std::uint64_t diag = 0;
  for (std::size_t c = 0; c < cm.classes; ++c) {
    rep.per_class.push_back(per_class_prf(cm, c));
    diag += cm.at(c, c);
  }
  const double classes = static_cast<double>(cm.classes);
  for (const ClassMetrics& m : rep.per_class) {
    rep.macro.precision += m.precision / classes;
    rep.macro.recall += m.recall / classes;
    rep.macro.f1 += m.f1 / classes;
    rep.macro.zero_division = rep.macro.zero_division || m.zero_division;
    if (rep.total > 0) {
      const double w = static_cast<double>(m.support) / static_cast<double>(rep.total);
      rep.weighted.precision += w * m.precision;
      rep.weighted.recall += w * m.recall;
      rep.weighted.f1 += w * m.f1;
    }
    rep.weighted.zero_division = rep.weighted.zero_division || m.zero_division;
  }
  rep.macro.support = rep.total;
  rep.weighted.support = rep.total;
  rep.accuracy = rep.total > 0 ? static_cast<double>(diag) / static_cast<double>(rep.total) : 0.0;
  return rep;
}

namespace {

std::string fmt4(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", x);
  return buf;
}

void append_row(std::ostringstream& out, const std::string& name, const ClassMetrics& m,
                std::size_t name_width) {
  out << name;
  for (std::size_t i = name.size(); i < name_width; ++i) out << ' ';
  out << "  " << fmt4(m.precision) << "  " << fmt4(m.recall) << "  " << fmt4(m.f1) << "  ";
  out << m.support;
  if (m.zero_division) out << "  (zero-division)";
  out << '\n';
}

}  // namespace

std::string render_report(const EvaluationReport& report,
                          const std::vector<std::string>& class_names) {
  std::size_t width = 12;  // fits "Weighted Avg"
  for (const std::string& n : class_names) width = std::max(width, n.size());
  std::ostringstream out;
  out << std::string(width, ' ') << "  Precision  Recall    F1-Score  Support\n";
  for (std::size_t c = 0; c < report.per_class.size(); ++c)
    append_row(out, class_names[c], report.per_class[c], width);
  append_row(out, "Macro Avg", report.macro, width);
  append_row(out, "Weighted Avg", report.weighted, width);
  out << "Accuracy: " << fmt4(report.accuracy) << " (" << report.total << " samples)\n";
  return out.str();
}

std::string render_report_rows(const EvaluationReport& report,
                               const std::vector<std::string>& class_names) {
  std::ostringstream out;
  out << "class,precision,recall,f1,support\n";
  auto row = [&](const std::string& name, const ClassMetrics& m) {
    out << name << ',' << fmt4(m.precision) << ',' << fmt4(m.recall) << ',' << fmt4(m.f1) << ','
        << m.support << '\n';
  };
  for (std::size_t c = 0; c < report.per_class.size(); ++c)
    row(class_names[c], report.per_class[c]);
  row("macro_avg", report.macro);
  row("weighted_avg", report.weighted);
  return out.str();
}

std::string render_comparison(std::vector<RunSummary> runs, bool machine) {
  std::stable_sort(runs.begin(), runs.end(), [](const RunSummary& a, const RunSummary& b) {
    const double at = a.has_test ? a.test_weighted_f1 : -1.0;
    const double bt = b.has_test ? b.test_weighted_f1 : -1.0;
    if (at != bt) return at > bt;
    return a.dev_weighted_f1 > b.dev_weighted_f1;
  });
  std::ostringstream out;
  if (machine) {
    out << "architecture,embedding,dev_weighted_f1,test_weighted_f1\n";
    for (const RunSummary& r : runs) {
      out << r.architecture << ',' << r.embedding << ',' << fmt4(r.dev_weighted_f1) << ',';
      out << (r.has_test ? fmt4(r.test_weighted_f1) : "-");
      out << '\n';
    }
    return out.str();
  }
  std::size_t aw = 12, ew = 9;
  for (const RunSummary& r : runs) {
    aw = std::max(aw, r.architecture.size());
    ew = std::max(ew, r.embedding.size());
  }
  auto pad = [&](const std::string& s, std::size_t w) {
    std::string t = s;
    t.resize(w, ' ');
    return t;
  };
  out << pad("Architecture", aw) << "  " << pad("Embedding", ew) << "  Dev W-F1  Test W-F1\n";
  for (const RunSummary& r : runs) {
    out << pad(r.architecture, aw) << "  " << pad(r.embedding, ew) << "  " << fmt4(r.dev_weighted_f1)
        << "    " << (r.has_test ? fmt4(r.test_weighted_f1) : "-") << '\n';
  }
  return out.str();
}

}  // namespace hsd::metrics

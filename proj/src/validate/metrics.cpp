#include "validate/metrics.hpp"

#include <fstream>
#include <sstream>

#include "support/error.hpp"

namespace pvm::validate {

namespace {

Category category_from(const std::string& name, const std::string& where) {
  if (name == "harmful") return Category::HarmfulContent;
  if (name == "privacy") return Category::PrivacyLeak;
  if (name == "range") return Category::RangeCheck;
  if (name == "consistency") return Category::ConsistencyCheck;
  fail(PVM_ERR_PARSE, where + ": unknown category '" + name + "'");
}

}  // namespace

std::vector<CorpusItem> load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(PVM_ERR_IO, "cannot open corpus: " + path);
  std::vector<CorpusItem> items;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    if (line.empty() || line[0] == '#') continue;
    std::string where = path + ":" + std::to_string(lineno);
    size_t tab1 = line.find('\t');
    size_t tab2 = tab1 == std::string::npos ? std::string::npos
                                            : line.find('\t', tab1 + 1);
    if (tab2 == std::string::npos)
      fail(PVM_ERR_PARSE, where + ": expected 'labels<TAB>context<TAB>text'");
    CorpusItem item;
    std::string labels = line.substr(0, tab1);
    item.context = line.substr(tab1 + 1, tab2 - tab1 - 1);
    if (item.context == "-") item.context.clear();
    item.text = line.substr(tab2 + 1);
    if (labels != "-") {
      std::istringstream ls(labels);
      std::string label;
      while (std::getline(ls, label, ','))
        item.labels.insert(category_from(label, where));
    }
    items.push_back(std::move(item));
  }
  return items;
}

std::vector<CategoryMetrics> evaluate_corpus(
    const std::vector<CorpusItem>& corpus,
    const std::vector<Validator>& validators) {
  if (corpus.empty()) fail(PVM_ERR_EMPTY_CORPUS, "corpus has no items");

  const Category all[] = {Category::HarmfulContent, Category::PrivacyLeak,
                          Category::RangeCheck, Category::ConsistencyCheck};
  std::vector<CategoryMetrics> metrics;
  for (Category c : all) {
    CategoryMetrics m;
    m.category = c;
    for (const CorpusItem& item : corpus) {
      bool positive = item.labels.count(c) > 0;
      bool detected = false;
      for (const Validator& v : validators) {
        if (v.category != c) continue;
        ChunkVerdict verdict = v.verdict(item.text, item.context);
        if (verdict.kind != VerdictKind::Pass) {
          detected = true;
          break;
        }
      }
      if (positive) {
        m.positives++;
        if (detected) m.true_positives++;
      } else {
        m.negatives++;
        if (detected) m.false_positives++;
      }
    }
    m.detection_rate = m.positives == 0 ? 0.0
                                        : static_cast<double>(m.true_positives) /
                                              static_cast<double>(m.positives);
    m.false_positive_rate =
        m.negatives == 0 ? 0.0
                         : static_cast<double>(m.false_positives) /
                               static_cast<double>(m.negatives);
    metrics.push_back(m);
  }
  return metrics;
}

std::string metrics_table(const std::vector<CategoryMetrics>& metrics) {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof line, "%-14s %9s %9s %11s %9s\n", "category",
                "positives", "negatives", "detection", "fp-rate");
  out << line;
  for (const CategoryMetrics& m : metrics) {
    std::snprintf(line, sizeof line, "%-14s %9zu %9zu %10.1f%% %8.1f%%\n",
                  category_name(m.category), m.positives, m.negatives,
                  m.detection_rate * 100.0, m.false_positive_rate * 100.0);
    out << line;
  }
  return out.str();
}

}  // namespace pvm::validate

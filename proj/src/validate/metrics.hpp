#ifndef PVM_VALIDATE_METRICS_HPP
#define PVM_VALIDATE_METRICS_HPP

#include "validate/rules.hpp"

namespace pvm::validate {

// Labeled corpus record: `labels TAB context TAB text`, labels comma
// separated ("-" for none), context "-" when absent.
struct CorpusItem {
  std::set<Category> labels;
  std::string context;
  std::string text;
};

std::vector<CorpusItem> load_corpus(const std::string& path);

struct CategoryMetrics {
  Category category;
  size_t positives = 0;
  size_t negatives = 0;
  size_t true_positives = 0;
  size_t false_positives = 0;
  double detection_rate = 0;
  double false_positive_rate = 0;
};

// An item counts as detected for a category when any validator of that
// category flags or blocks it. Throws EmptyCorpus.
std::vector<CategoryMetrics> evaluate_corpus(
    const std::vector<CorpusItem>& corpus,
    const std::vector<Validator>& validators);

std::string metrics_table(const std::vector<CategoryMetrics>& metrics);

}  // namespace pvm::validate

#endif

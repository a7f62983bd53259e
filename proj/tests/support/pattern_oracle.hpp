#ifndef PVM_TESTS_PATTERN_ORACLE_HPP
#define PVM_TESTS_PATTERN_ORACLE_HPP

#include <cctype>
#include <regex>
#include <string>

#include "validate/metrics.hpp"

// Out-of-pipeline oracle for corpus metrics: a direct re-implementation
// of the rule patterns, kept independent of the Validator plumbing so
// the metrics harness can be checked against it exactly.
namespace pvm::testsupport {

inline bool oracle_detects(pvm::validate::Category c,
                           const pvm::validate::CorpusItem& item) {
  using pvm::validate::Category;
  static const std::regex email(
      R"([A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,})");
  static const std::regex phone(R"(\+?[0-9]{3}[-. ][0-9]{3}[-. ][0-9]{4})");
  static const std::regex id_like(R"(\b[A-Z]{2}[0-9]{6,10}\b)");
  static const std::regex number(R"(-?[0-9]+(\.[0-9]+)?)");
  static const std::regex ref(R"(ref:([A-Za-z0-9_-]+))");

  auto lower = [](const std::string& s) {
    std::string out;
    for (char ch : s)
      out.push_back(
          static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    return out;
  };

  switch (c) {
    case Category::HarmfulContent: {
      std::string lowered = lower(item.text);
      for (const char* token : {"ricin", "detonator", "overdose-instructions",
                                "self-harm-method"}) {
        std::regex word(std::string("(^|[^a-z0-9_-])") + token +
                        "($|[^a-z0-9_-])");
        if (std::regex_search(lowered, word)) return true;
      }
      return false;
    }
    case Category::PrivacyLeak:
      return std::regex_search(item.text, email) ||
             std::regex_search(item.text, phone) ||
             std::regex_search(item.text, id_like);
    case Category::RangeCheck: {
      for (auto it = std::sregex_iterator(item.text.begin(), item.text.end(),
                                          number);
           it != std::sregex_iterator(); ++it) {
        double v = std::stod(it->str());
        if (v < -1e6 || v > 1e6) return true;
      }
      return false;
    }
    case Category::ConsistencyCheck: {
      std::string context = lower(item.context);
      for (auto it = std::sregex_iterator(item.text.begin(), item.text.end(), ref);
           it != std::sregex_iterator(); ++it) {
        if (context.find(lower((*it)[1].str())) == std::string::npos)
          return true;
      }
      return false;
    }
  }
  return false;
}

}  // namespace pvm::testsupport

#endif

#include "validate/rules.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <sstream>

#include "support/error.hpp"

namespace pvm::validate {

const char* category_name(Category c) {
  switch (c) {
    case Category::HarmfulContent: return "harmful";
    case Category::PrivacyLeak: return "privacy";
    case Category::RangeCheck: return "range";
    case Category::ConsistencyCheck: return "consistency";
  }
  return "?";
}

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::vector<std::string> words_of(const std::string& text) {
  std::vector<std::string> out;
  std::string word;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') {
      word.push_back(c);
    } else if (!word.empty()) {
      out.push_back(lower(word));
      word.clear();
    }
  }
  if (!word.empty()) out.push_back(lower(word));
  return out;
}

}  // namespace

Validator blocklist_validator(const std::string& name,
                              std::set<std::string> tokens) {
  std::set<std::string> lowered;
  for (const std::string& t : tokens) lowered.insert(lower(t));
  return {name, Category::HarmfulContent,
          [lowered = std::move(lowered)](const std::string& chunk,
                                         const std::string&) -> ChunkVerdict {
            for (const std::string& word : words_of(chunk))
              if (lowered.count(word))
                return {VerdictKind::Block, "blocklisted token '" + word + "'"};
            return {};
          }};
}

Validator privacy_pattern_validator(const std::string& name) {
  // Shared across calls; std::regex construction is expensive.
  static const std::regex email(
      R"([A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,})");
  static const std::regex phone(R"(\+?[0-9]{3}[-. ][0-9]{3}[-. ][0-9]{4})");
  static const std::regex id_like(R"(\b[A-Z]{2}[0-9]{6,10}\b)");
  return {name, Category::PrivacyLeak,
          [](const std::string& chunk, const std::string&) -> ChunkVerdict {
            if (std::regex_search(chunk, email))
              return {VerdictKind::Flag, "email-pattern"};
            if (std::regex_search(chunk, phone))
              return {VerdictKind::Flag, "phone-pattern"};
            if (std::regex_search(chunk, id_like))
              return {VerdictKind::Flag, "id-pattern"};
            return {};
          }};
}

Validator range_validator(const std::string& name, double min_value,
                          double max_value) {
  return {name, Category::RangeCheck,
          [min_value, max_value](const std::string& chunk,
                                 const std::string&) -> ChunkVerdict {
            static const std::regex number(R"(-?[0-9]+(\.[0-9]+)?)");
            auto begin = std::sregex_iterator(chunk.begin(), chunk.end(), number);
            for (auto it = begin; it != std::sregex_iterator(); ++it) {
              double v = std::stod(it->str());
              if (v < min_value || v > max_value)
                return {VerdictKind::Block,
                        "value " + it->str() + " outside range"};
            }
            return {};
          }};
}

Validator reference_consistency_validator(const std::string& name) {
  return {name, Category::ConsistencyCheck,
          [](const std::string& chunk, const std::string& context) -> ChunkVerdict {
            static const std::regex ref(R"(ref:([A-Za-z0-9_-]+))");
            auto begin = std::sregex_iterator(chunk.begin(), chunk.end(), ref);
            std::string haystack = lower(context);
            for (auto it = begin; it != std::sregex_iterator(); ++it) {
              std::string target = lower((*it)[1].str());
              if (haystack.find(target) == std::string::npos)
                return {VerdictKind::Block,
                        "unresolved reference '" + target + "'"};
            }
            return {};
          }};
}

std::vector<Validator> builtin_rules() {
  return {
      blocklist_validator("harm-blocklist",
                          {"ricin", "detonator", "overdose-instructions",
                           "self-harm-method"}),
      privacy_pattern_validator("privacy-patterns"),
      range_validator("dose-range", -1e6, 1e6),
      reference_consistency_validator("reference-check"),
  };
}

std::vector<Validator> load_rules(const std::string& rules_dir) {
  std::vector<Validator> out;
  {
    std::ifstream in(rules_dir + "/blocklist.txt");
    if (!in) fail(PVM_ERR_IO, "cannot open " + rules_dir + "/blocklist.txt");
    std::set<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      std::string token;
      if (ls >> token && token[0] != '#') tokens.insert(token);
    }
    out.push_back(blocklist_validator("harm-blocklist", std::move(tokens)));
  }
  out.push_back(privacy_pattern_validator("privacy-patterns"));
  {
    std::ifstream in(rules_dir + "/ranges.txt");
    if (!in) fail(PVM_ERR_IO, "cannot open " + rules_dir + "/ranges.txt");
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      lineno++;
      std::istringstream ls(line);
      std::string name;
      double lo, hi;
      if (!(ls >> name) || name[0] == '#') continue;
      if (!(ls >> lo >> hi))
        fail(PVM_ERR_PARSE, rules_dir + "/ranges.txt:" + std::to_string(lineno) +
                                ": expected '<name> <min> <max>'");
      out.push_back(range_validator(name, lo, hi));
    }
  }
  out.push_back(reference_consistency_validator("reference-check"));
  return out;
}

}  // namespace pvm::validate

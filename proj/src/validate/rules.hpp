#ifndef PVM_VALIDATE_RULES_HPP
#define PVM_VALIDATE_RULES_HPP

#include <functional>
#include <set>
#include <string>
#include <vector>

namespace pvm::validate {

enum class VerdictKind { Pass, Flag, Block };

struct ChunkVerdict {
  VerdictKind kind = VerdictKind::Pass;
  std::string reason;
};

enum class Category { HarmfulContent, PrivacyLeak, RangeCheck, ConsistencyCheck };
const char* category_name(Category c);

// Rule-based validator. The verdict function must be deterministic and
// side-effect-free; `context` is the task input plus all previously
// generated chunks.
struct Validator {
  std::string name;
  Category category;
  std::function<ChunkVerdict(const std::string& chunk,
                             const std::string& context)>
      verdict;
};

Validator blocklist_validator(const std::string& name,
                              std::set<std::string> tokens);
// Flags email / phone / id-like patterns.
Validator privacy_pattern_validator(const std::string& name);
Validator range_validator(const std::string& name, double min_value,
                          double max_value);
// Hallucination stand-in: every `ref:<token>` in the output must occur
// in the input context.
Validator reference_consistency_validator(const std::string& name);

// Loads blocklist.txt / ranges.txt from a rules directory and combines
// them with the pattern and consistency validators.
std::vector<Validator> load_rules(const std::string& rules_dir);
std::vector<Validator> builtin_rules();

}  // namespace pvm::validate

#endif

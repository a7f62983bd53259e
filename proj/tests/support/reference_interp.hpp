#ifndef PVM_TESTS_REFERENCE_INTERP_HPP
#define PVM_TESTS_REFERENCE_INTERP_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vm/module.hpp"

// Independent oracle interpreter. Deliberately written as a separate,
// straightforward evaluator with its own state layout: no policies, no
// fuel, no checkpoint machinery. Tests compare the production
// interpreter against this one; keep them from sharing code.
namespace pvm::testsupport {

struct RefResult {
  bool halted = false;           // false means the oracle trapped
  std::string trap;              // oracle trap description when !halted
  int64_t value = 0;             // halt value
  std::vector<uint8_t> memory;   // final linear memory
  uint64_t steps = 0;            // instructions retired
};

RefResult reference_run(const pvm::vm::Module& module,
                        uint64_t max_steps = 50'000'000);

}  // namespace pvm::testsupport

#endif

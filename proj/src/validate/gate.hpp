#ifndef PVM_VALIDATE_GATE_HPP
#define PVM_VALIDATE_GATE_HPP

#include "validate/rules.hpp"

namespace pvm::validate {

// Output gate: a generated chunk reaches downstream consumers only
// after every validator has returned a non-blocking verdict for it.
// Parallel mode runs the validators concurrently with one another and
// with generation of the next chunk; Serial mode is the sequential
// baseline. A validator that throws blocks the stream (fail-closed).

enum class GateMode { Parallel, Serial };

struct StreamSpec {
  std::vector<std::string> chunks;
  std::string input_context;
  double gen_delay_s = 0;  // synthetic generation cost per chunk
};

struct FlagRecord {
  size_t chunk = 0;
  std::string validator;
  std::string reason;
};

// Release audit: which verdicts covered each released chunk.
struct ReleaseRecord {
  size_t chunk = 0;
  size_t verdict_count = 0;
  bool any_block = false;
};

struct GatedOutput {
  std::vector<std::string> released;
  enum class Terminal { Completed, Blocked } terminal = Terminal::Completed;
  size_t blocked_chunk = 0;
  std::string blocked_validator;
  std::string blocked_reason;
  std::vector<FlagRecord> flags;
  std::vector<ReleaseRecord> release_log;
  double baseline_s = 0;   // ungated generation, measured
  double gated_s = 0;      // gated run, measured
  double overhead_s = 0;
  double overhead_fraction = 0;
};

// `per_validator_cost_s` adds a synthetic per-verdict cost; overhead
// comparisons need validators that take measurable time.
GatedOutput gate_stream(const StreamSpec& stream,
                        const std::vector<Validator>& validators, GateMode mode,
                        double per_validator_cost_s = 0);

}  // namespace pvm::validate

#endif

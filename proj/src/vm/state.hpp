#ifndef PVM_VM_STATE_HPP
#define PVM_VM_STATE_HPP

#include <vector>

#include "support/bytes.hpp"

namespace pvm::vm {

struct Position {
  uint32_t function = 0;
  uint32_t offset = 0;

  bool operator==(const Position&) const = default;
};

// Marks the entry frame's return position.
inline constexpr Position kNoReturn{0xffffffffu, 0xffffffffu};

struct Frame {
  uint32_t function = 0;
  Position return_position = kNoReturn;
  std::vector<int64_t> locals;
  std::vector<int64_t> operands;

  bool operator==(const Frame&) const = default;
};

// Complete serializable VM state, captured at a stable point.
struct ExecutionState {
  Digest32 module_measurement{};
  std::vector<Frame> frames;
  Bytes memory;  // length is a multiple of kPageSize
  Position position;
  uint64_t steps_executed = 0;

  bool operator==(const ExecutionState&) const = default;

  // Canonical little-endian encoding: non-memory section, then memory.
  Bytes serialize() const;
  // The non-memory prefix alone (used as the delta frames section).
  Bytes serialize_non_memory() const;
  static ExecutionState deserialize(ByteView bytes);

  // SHA-256 over serialize(); identifies the state for deltas and sync.
  Digest32 digest() const;
};

}  // namespace pvm::vm

#endif

#ifndef PVM_VM_INTERPRETER_HPP
#define PVM_VM_INTERPRETER_HPP

#include <limits>
#include <memory>
#include <vector>

#include "vm/module.hpp"
#include "vm/state.hpp"

namespace pvm::vm {

// Where execution may pause for capture.
//   Function: every function entry.
//   Loop:     function entries plus every backward-branch target.
//   Explicit: `checkpoint` opcodes only.
enum class PolicyMode { Function, Loop, Explicit };

enum class TrapReason { OutOfBoundsMemory, StackUnderflow, UnalignedAccess };
const char* trap_name(TrapReason reason);

struct RunOutcome {
  enum class Kind { Halted, CheckpointReached, FuelExhausted, Trap };
  Kind kind;
  int64_t value = 0;        // Halted
  Position position;        // CheckpointReached
  TrapReason trap = TrapReason::OutOfBoundsMemory;

  static RunOutcome halted(int64_t value) { return {Kind::Halted, value, {}, {}}; }
  static RunOutcome checkpoint(Position p) { return {Kind::CheckpointReached, 0, p, {}}; }
  static RunOutcome fuel() { return {Kind::FuelExhausted, 0, {}, {}}; }
  static RunOutcome trapped(TrapReason r) { return {Kind::Trap, 0, {}, r}; }
};

inline constexpr uint64_t kNoFuelLimit = std::numeric_limits<uint64_t>::max();

// A single-threaded VM instance. May move between threads only between
// calls; distinct instances are fully independent.
class Instance {
 public:
  Instance(std::shared_ptr<const Module> module, PolicyMode policy);

  // Resumes a captured state. Verifies the measurement and the state's
  // structural invariants. The restored instance is at a stable point.
  static Instance restore(std::shared_ptr<const Module> module,
                          const ExecutionState& state,
                          PolicyMode policy = PolicyMode::Loop);

  // Executes until halt, trap, fuel exhaustion, or — when requested —
  // the next stable point. Fuel counts every retired instruction,
  // checkpoint markers included.
  RunOutcome run(uint64_t fuel = kNoFuelLimit, bool stop_at_checkpoint = false);

  // Deep copy of the current state. Only legal at a stable point
  // (after instantiation or a CheckpointReached outcome).
  ExecutionState capture() const;

  bool runnable() const { return status_ == Status::Runnable; }
  bool halted() const { return status_ == Status::Halted; }
  bool trapped() const { return status_ == Status::Trapped; }
  bool migrated_away() const { return status_ == Status::MigratedAway; }
  bool at_stable_point() const { return at_stable_; }
  uint64_t steps_executed() const { return steps_executed_; }
  Position position() const { return position_; }
  const Module& module() const { return *module_; }
  PolicyMode policy() const { return policy_; }
  ByteView memory() const { return memory_; }
  const std::vector<Frame>& frames() const { return frames_; }

  // Successful migration hand-off; the instance stops being runnable.
  void mark_migrated_away() { status_ = Status::MigratedAway; }

  // Test hook: pretend the instance is mid-instruction.
  void debug_clear_stable() { at_stable_ = false; }

 private:
  enum class Status { Runnable, Halted, Trapped, MigratedAway };

  bool is_stable(Position p) const;
  RunOutcome trap(TrapReason reason);

  std::shared_ptr<const Module> module_;
  PolicyMode policy_;
  std::vector<std::vector<uint32_t>> back_targets_;  // per function, sorted
  std::vector<Frame> frames_;
  Bytes memory_;
  Position position_{};
  uint64_t steps_executed_ = 0;
  Status status_ = Status::Runnable;
  bool at_stable_ = true;
};

}  // namespace pvm::vm

#endif

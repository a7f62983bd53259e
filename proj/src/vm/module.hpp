#ifndef PVM_VM_MODULE_HPP
#define PVM_VM_MODULE_HPP

#include <string>
#include <vector>

#include "support/bytes.hpp"

namespace pvm::vm {

inline constexpr size_t kPageSize = 64 * 1024;

// 16-opcode stack machine. All values are signed 64-bit integers; memory
// addresses are byte offsets and loads/stores must be 8-byte aligned.
enum class Op : uint8_t {
  ConstI64 = 0,   // push imm
  LocalGet = 1,   // push locals[imm]
  LocalSet = 2,   // locals[imm] = pop
  I64Add = 3,     // push pop2 + pop1 (wrapping)
  I64Sub = 4,
  I64Mul = 5,
  I64Eq = 6,      // push (a == b) ? 1 : 0
  I64LtS = 7,     // push (a < b) ? 1 : 0, signed
  MemLoad64 = 8,  // addr = pop; push mem[addr..addr+8)
  MemStore64 = 9, // value = pop; addr = pop; mem[addr..addr+8) = value
  Br = 10,        // jump to instruction offset imm
  BrIf = 11,      // cond = pop; jump if cond != 0
  Call = 12,      // call function imm; pops that function's params
  Return = 13,    // pop result, pop frame, push result on caller stack
  Halt = 14,      // stop; result = top of entry frame's operand stack
  Checkpoint = 15 // explicit stable point; otherwise a no-op
};

bool op_has_imm(Op op);
const char* op_name(Op op);

struct Instruction {
  Op op;
  int64_t imm = 0;

  bool operator==(const Instruction&) const = default;
};

struct Function {
  std::string name;
  uint32_t param_count = 0;
  uint32_t local_count = 0;
  std::vector<Instruction> code;
};

struct Module {
  std::vector<Function> functions;
  uint32_t memory_pages_initial = 1;
  uint32_t entry_function = 0;

  // Deterministic little-endian encoding; function names are aliases and
  // do not contribute.
  Bytes canonical_bytes() const;
  Digest32 measurement() const;
};

// Enforces call-target, branch-target, local-index and entry invariants.
// Throws ValidationError.
void validate(const Module& module);

// Offsets in `function` that are targets of a backward br / br_if.
std::vector<uint32_t> back_edge_targets(const Function& function);

}  // namespace pvm::vm

#endif

#include "vm/module.hpp"

#include <algorithm>

#include "support/crypto.hpp"

namespace pvm::vm {

bool op_has_imm(Op op) {
  switch (op) {
    case Op::ConstI64:
    case Op::LocalGet:
    case Op::LocalSet:
    case Op::Br:
    case Op::BrIf:
    case Op::Call:
      return true;
    default:
      return false;
  }
}

const char* op_name(Op op) {
  switch (op) {
    case Op::ConstI64: return "const.i64";
    case Op::LocalGet: return "local.get";
    case Op::LocalSet: return "local.set";
    case Op::I64Add: return "i64.add";
    case Op::I64Sub: return "i64.sub";
    case Op::I64Mul: return "i64.mul";
    case Op::I64Eq: return "i64.eq";
    case Op::I64LtS: return "i64.lt_s";
    case Op::MemLoad64: return "mem.load64";
    case Op::MemStore64: return "mem.store64";
    case Op::Br: return "br";
    case Op::BrIf: return "br_if";
    case Op::Call: return "call";
    case Op::Return: return "return";
    case Op::Halt: return "halt";
    case Op::Checkpoint: return "checkpoint";
  }
  return "?";
}

Bytes Module::canonical_bytes() const {
  ByteWriter w;
  w.raw("PMOD", 4);
  w.u16(1);
  w.u32(memory_pages_initial);
  w.u32(entry_function);
  w.u32(static_cast<uint32_t>(functions.size()));
  for (const Function& f : functions) {
    w.u32(f.param_count);
    w.u32(f.local_count);
    w.u32(static_cast<uint32_t>(f.code.size()));
    for (const Instruction& insn : f.code) {
      w.u8(static_cast<uint8_t>(insn.op));
      if (op_has_imm(insn.op)) w.i64(insn.imm);
    }
  }
  return w.take();
}

Digest32 Module::measurement() const { return crypto::sha256(canonical_bytes()); }

void validate(const Module& module) {
  auto reject = [](const std::string& reason) {
    fail(PVM_ERR_VALIDATION, reason);
  };

  if (module.functions.empty()) reject("module has no functions");
  if (module.entry_function >= module.functions.size())
    reject("entry function index out of bounds");
  if (module.functions[module.entry_function].param_count != 0)
    reject("entry function must take zero parameters");

  for (size_t fi = 0; fi < module.functions.size(); fi++) {
    const Function& f = module.functions[fi];
    const std::string where = "function " + std::to_string(fi);
    if (f.code.empty()) reject(where + " has empty body");
    uint64_t slots = static_cast<uint64_t>(f.param_count) + f.local_count;
    for (size_t i = 0; i < f.code.size(); i++) {
      const Instruction& insn = f.code[i];
      switch (insn.op) {
        case Op::LocalGet:
        case Op::LocalSet:
          if (insn.imm < 0 || static_cast<uint64_t>(insn.imm) >= slots)
            reject(where + ": local index " + std::to_string(insn.imm) +
                   " out of bounds at offset " + std::to_string(i));
          break;
        case Op::Br:
        case Op::BrIf:
          if (insn.imm < 0 || static_cast<uint64_t>(insn.imm) >= f.code.size())
            reject(where + ": branch target " + std::to_string(insn.imm) +
                   " out of bounds at offset " + std::to_string(i));
          break;
        case Op::Call:
          if (insn.imm < 0 ||
              static_cast<uint64_t>(insn.imm) >= module.functions.size())
            reject(where + ": call target " + std::to_string(insn.imm) +
                   " out of bounds at offset " + std::to_string(i));
          break;
        default:
          break;
      }
    }
    Op last = f.code.back().op;
    if (last != Op::Return && last != Op::Halt)
      reject(where + " does not end with return or halt");
  }
}

std::vector<uint32_t> back_edge_targets(const Function& function) {
  std::vector<uint32_t> targets;
  for (size_t i = 0; i < function.code.size(); i++) {
    const Instruction& insn = function.code[i];
    if ((insn.op == Op::Br || insn.op == Op::BrIf) &&
        static_cast<uint64_t>(insn.imm) <= i) {
      targets.push_back(static_cast<uint32_t>(insn.imm));
    }
  }
  std::sort(targets.begin(), targets.end());
  targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
  return targets;
}

}  // namespace pvm::vm

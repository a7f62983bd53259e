#include "support/reference_interp.hpp"

#include <cstring>

namespace pvm::testsupport {

using pvm::vm::Function;
using pvm::vm::Module;
using pvm::vm::Op;

namespace {

// One call record on the oracle's own stack.
struct Activation {
  uint32_t func;
  uint32_t ip;
  std::vector<int64_t> slots;
  std::vector<int64_t> stack;
};

}  // namespace

RefResult reference_run(const Module& module, uint64_t max_steps) {
  RefResult result;
  result.memory.assign(
      static_cast<size_t>(module.memory_pages_initial) * pvm::vm::kPageSize, 0);

  std::vector<Activation> calls;
  {
    const Function& entry = module.functions[module.entry_function];
    calls.push_back({module.entry_function, 0,
                     std::vector<int64_t>(entry.param_count + entry.local_count, 0),
                     {}});
  }

  auto fault = [&](const char* what) {
    result.halted = false;
    result.trap = what;
    return result;
  };

  while (result.steps < max_steps) {
    Activation& top = calls.back();
    const Function& fn = module.functions[top.func];
    const auto& insn = fn.code[top.ip];
    result.steps++;

    switch (insn.op) {
      case Op::ConstI64:
        top.stack.push_back(insn.imm);
        top.ip++;
        break;
      case Op::LocalGet:
        top.stack.push_back(top.slots[static_cast<size_t>(insn.imm)]);
        top.ip++;
        break;
      case Op::LocalSet:
        if (top.stack.empty()) return fault("underflow");
        top.slots[static_cast<size_t>(insn.imm)] = top.stack.back();
        top.stack.pop_back();
        top.ip++;
        break;
      case Op::I64Add:
      case Op::I64Sub:
      case Op::I64Mul:
      case Op::I64Eq:
      case Op::I64LtS: {
        if (top.stack.size() < 2) return fault("underflow");
        int64_t b = top.stack.back();
        top.stack.pop_back();
        int64_t a = top.stack.back();
        top.stack.pop_back();
        int64_t r;
        if (insn.op == Op::I64Add)
          r = static_cast<int64_t>(static_cast<uint64_t>(a) +
                                   static_cast<uint64_t>(b));
        else if (insn.op == Op::I64Sub)
          r = static_cast<int64_t>(static_cast<uint64_t>(a) -
                                   static_cast<uint64_t>(b));
        else if (insn.op == Op::I64Mul)
          r = static_cast<int64_t>(static_cast<uint64_t>(a) *
                                   static_cast<uint64_t>(b));
        else if (insn.op == Op::I64Eq)
          r = a == b;
        else
          r = a < b;
        top.stack.push_back(r);
        top.ip++;
        break;
      }
      case Op::MemLoad64: {
        if (top.stack.empty()) return fault("underflow");
        int64_t addr = top.stack.back();
        top.stack.pop_back();
        if (addr % 8) return fault("unaligned");
        if (addr < 0 ||
            static_cast<uint64_t>(addr) + 8 > result.memory.size())
          return fault("oob");
        uint64_t v;
        std::memcpy(&v, result.memory.data() + addr, 8);  // oracle is LE-host only
        top.stack.push_back(static_cast<int64_t>(v));
        top.ip++;
        break;
      }
      case Op::MemStore64: {
        if (top.stack.size() < 2) return fault("underflow");
        int64_t value = top.stack.back();
        top.stack.pop_back();
        int64_t addr = top.stack.back();
        top.stack.pop_back();
        if (addr % 8) return fault("unaligned");
        if (addr < 0 ||
            static_cast<uint64_t>(addr) + 8 > result.memory.size())
          return fault("oob");
        std::memcpy(result.memory.data() + addr, &value, 8);
        top.ip++;
        break;
      }
      case Op::Br:
        top.ip = static_cast<uint32_t>(insn.imm);
        break;
      case Op::BrIf: {
        if (top.stack.empty()) return fault("underflow");
        int64_t c = top.stack.back();
        top.stack.pop_back();
        top.ip = c ? static_cast<uint32_t>(insn.imm) : top.ip + 1;
        break;
      }
      case Op::Call: {
        uint32_t target = static_cast<uint32_t>(insn.imm);
        const Function& callee = module.functions[target];
        if (top.stack.size() < callee.param_count) return fault("underflow");
        Activation next{target, 0,
                        std::vector<int64_t>(callee.param_count +
                                             callee.local_count, 0),
                        {}};
        for (uint32_t i = callee.param_count; i-- > 0;) {
          next.slots[i] = top.stack.back();
          top.stack.pop_back();
        }
        top.ip++;
        calls.push_back(std::move(next));
        break;
      }
      case Op::Return: {
        if (top.stack.empty()) return fault("underflow");
        int64_t v = top.stack.back();
        calls.pop_back();
        if (calls.empty()) {
          result.halted = true;
          result.value = v;
          return result;
        }
        calls.back().stack.push_back(v);
        break;
      }
      case Op::Halt: {
        const Activation& entry = calls.front();
        result.halted = true;
        result.value = entry.stack.empty() ? 0 : entry.stack.back();
        return result;
      }
      case Op::Checkpoint:
        top.ip++;
        break;
    }
  }
  return fault("step budget exhausted");
}

}  // namespace pvm::testsupport

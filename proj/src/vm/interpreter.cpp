#include "vm/interpreter.hpp"

#include <algorithm>
#include <cstring>

namespace pvm::vm {

const char* trap_name(TrapReason reason) {
  switch (reason) {
    case TrapReason::OutOfBoundsMemory: return "OutOfBoundsMemory";
    case TrapReason::StackUnderflow: return "StackUnderflow";
    case TrapReason::UnalignedAccess: return "UnalignedAccess";
  }
  return "?";
}

static std::vector<std::vector<uint32_t>> all_back_targets(const Module& m) {
  std::vector<std::vector<uint32_t>> out;
  out.reserve(m.functions.size());
  for (const Function& f : m.functions) out.push_back(back_edge_targets(f));
  return out;
}

Instance::Instance(std::shared_ptr<const Module> module, PolicyMode policy)
    : module_(std::move(module)),
      policy_(policy),
      back_targets_(all_back_targets(*module_)) {
  memory_.assign(static_cast<size_t>(module_->memory_pages_initial) * kPageSize,
                 0);
  Frame entry;
  entry.function = module_->entry_function;
  entry.return_position = kNoReturn;
  const Function& f = module_->functions[entry.function];
  entry.locals.assign(f.param_count + f.local_count, 0);
  frames_.push_back(std::move(entry));
  position_ = {module_->entry_function, 0};
}

Instance Instance::restore(std::shared_ptr<const Module> module,
                           const ExecutionState& state, PolicyMode policy) {
  if (module->measurement() != state.module_measurement)
    fail(PVM_ERR_MEASUREMENT_MISMATCH,
         "state was captured from a different module");

  auto malformed = [](const std::string& reason) {
    fail(PVM_ERR_MALFORMED_STATE, reason);
  };
  if (state.frames.empty()) malformed("state has no frames");
  if (state.memory.size() % kPageSize != 0)
    malformed("memory length not page aligned");
  const auto& funcs = module->functions;
  for (size_t i = 0; i < state.frames.size(); i++) {
    const Frame& fr = state.frames[i];
    if (fr.function >= funcs.size())
      malformed("frame references function " + std::to_string(fr.function));
    const Function& f = funcs[fr.function];
    if (fr.locals.size() != static_cast<size_t>(f.param_count) + f.local_count)
      malformed("frame locals length mismatch");
    bool is_entry = i == 0;
    if (is_entry) {
      if (!(fr.return_position == kNoReturn))
        malformed("entry frame has a return position");
    } else {
      const Position rp = fr.return_position;
      if (rp.function >= funcs.size() ||
          rp.offset > funcs[rp.function].code.size())
        malformed("frame return position out of bounds");
    }
  }
  if (state.position.function >= funcs.size() ||
      state.position.offset >= funcs[state.position.function].code.size())
    malformed("position out of bounds");
  if (state.position.function != state.frames.back().function)
    malformed("position does not match the active frame");

  Instance inst(module, policy);
  inst.frames_ = state.frames;
  inst.memory_ = state.memory;
  inst.position_ = state.position;
  inst.steps_executed_ = state.steps_executed;
  inst.at_stable_ = true;
  return inst;
}

bool Instance::is_stable(Position p) const {
  switch (policy_) {
    case PolicyMode::Function:
      return p.offset == 0;
    case PolicyMode::Loop: {
      if (p.offset == 0) return true;
      const auto& targets = back_targets_[p.function];
      return std::binary_search(targets.begin(), targets.end(), p.offset);
    }
    case PolicyMode::Explicit:
      return module_->functions[p.function].code[p.offset].op == Op::Checkpoint;
  }
  return false;
}

RunOutcome Instance::trap(TrapReason reason) {
  status_ = Status::Trapped;
  at_stable_ = false;
  return RunOutcome::trapped(reason);
}

RunOutcome Instance::run(uint64_t fuel, bool stop_at_checkpoint) {
  if (status_ != Status::Runnable)
    fail(PVM_ERR_NOT_RUNNABLE, "instance is halted, trapped, or migrated away");

  uint64_t steps_this_run = 0;
  for (;;) {
    if (stop_at_checkpoint && steps_this_run > 0 && is_stable(position_)) {
      at_stable_ = true;
      return RunOutcome::checkpoint(position_);
    }
    if (steps_this_run >= fuel) {
      at_stable_ = false;
      return RunOutcome::fuel();
    }

    Frame& frame = frames_.back();
    const Function& func = module_->functions[position_.function];
    const Instruction insn = func.code[position_.offset];
    Position next{position_.function, position_.offset + 1};

    auto pop = [&](int64_t& out) -> bool {
      if (frame.operands.empty()) return false;
      out = frame.operands.back();
      frame.operands.pop_back();
      return true;
    };

    switch (insn.op) {
      case Op::ConstI64:
        frame.operands.push_back(insn.imm);
        break;
      case Op::LocalGet:
        frame.operands.push_back(frame.locals[static_cast<size_t>(insn.imm)]);
        break;
      case Op::LocalSet: {
        int64_t v;
        if (!pop(v)) return trap(TrapReason::StackUnderflow);
        frame.locals[static_cast<size_t>(insn.imm)] = v;
        break;
      }
      case Op::I64Add:
      case Op::I64Sub:
      case Op::I64Mul:
      case Op::I64Eq:
      case Op::I64LtS: {
        int64_t b, a;
        if (!pop(b) || !pop(a)) return trap(TrapReason::StackUnderflow);
        uint64_t ua = static_cast<uint64_t>(a), ub = static_cast<uint64_t>(b);
        int64_t r = 0;
        switch (insn.op) {
          case Op::I64Add: r = static_cast<int64_t>(ua + ub); break;
          case Op::I64Sub: r = static_cast<int64_t>(ua - ub); break;
          case Op::I64Mul: r = static_cast<int64_t>(ua * ub); break;
          case Op::I64Eq: r = (a == b) ? 1 : 0; break;
          case Op::I64LtS: r = (a < b) ? 1 : 0; break;
          default: break;
        }
        frame.operands.push_back(r);
        break;
      }
      case Op::MemLoad64: {
        int64_t addr;
        if (!pop(addr)) return trap(TrapReason::StackUnderflow);
        if (addr % 8 != 0) return trap(TrapReason::UnalignedAccess);
        if (addr < 0 || static_cast<uint64_t>(addr) + 8 > memory_.size())
          return trap(TrapReason::OutOfBoundsMemory);
        uint64_t v = 0;
        for (int i = 0; i < 8; i++)
          v |= static_cast<uint64_t>(memory_[static_cast<size_t>(addr) + i])
               << (8 * i);
        frame.operands.push_back(static_cast<int64_t>(v));
        break;
      }
      case Op::MemStore64: {
        int64_t value, addr;
        if (!pop(value) || !pop(addr)) return trap(TrapReason::StackUnderflow);
        if (addr % 8 != 0) return trap(TrapReason::UnalignedAccess);
        if (addr < 0 || static_cast<uint64_t>(addr) + 8 > memory_.size())
          return trap(TrapReason::OutOfBoundsMemory);
        uint64_t v = static_cast<uint64_t>(value);
        for (int i = 0; i < 8; i++)
          memory_[static_cast<size_t>(addr) + i] =
              static_cast<uint8_t>(v >> (8 * i));
        break;
      }
      case Op::Br:
        next.offset = static_cast<uint32_t>(insn.imm);
        break;
      case Op::BrIf: {
        int64_t cond;
        if (!pop(cond)) return trap(TrapReason::StackUnderflow);
        if (cond != 0) next.offset = static_cast<uint32_t>(insn.imm);
        break;
      }
      case Op::Call: {
        uint32_t target = static_cast<uint32_t>(insn.imm);
        const Function& callee = module_->functions[target];
        if (frame.operands.size() < callee.param_count)
          return trap(TrapReason::StackUnderflow);
        Frame callee_frame;
        callee_frame.function = target;
        callee_frame.return_position = next;
        callee_frame.locals.assign(callee.param_count + callee.local_count, 0);
        for (uint32_t i = callee.param_count; i-- > 0;) {
          callee_frame.locals[i] = frame.operands.back();
          frame.operands.pop_back();
        }
        frames_.push_back(std::move(callee_frame));
        next = {target, 0};
        break;
      }
      case Op::Return: {
        int64_t result;
        if (!pop(result)) return trap(TrapReason::StackUnderflow);
        Position ret = frame.return_position;
        frames_.pop_back();
        steps_executed_++;
        steps_this_run++;
        if (frames_.empty()) {
          status_ = Status::Halted;
          at_stable_ = false;
          return RunOutcome::halted(result);
        }
        frames_.back().operands.push_back(result);
        position_ = ret;
        continue;
      }
      case Op::Halt: {
        steps_executed_++;
        status_ = Status::Halted;
        at_stable_ = false;
        const Frame& entry = frames_.front();
        int64_t result = entry.operands.empty() ? 0 : entry.operands.back();
        return RunOutcome::halted(result);
      }
      case Op::Checkpoint:
        break;
    }

    steps_executed_++;
    steps_this_run++;
    position_ = next;
  }
}

ExecutionState Instance::capture() const {
  if (status_ != Status::Runnable || !at_stable_)
    fail(PVM_ERR_NOT_AT_STABLE_POINT,
         "capture requires the instance to be paused at a stable point");
  ExecutionState s;
  s.module_measurement = module_->measurement();
  s.frames = frames_;
  s.memory = memory_;
  s.position = position_;
  s.steps_executed = steps_executed_;
  return s;
}

}  // namespace pvm::vm

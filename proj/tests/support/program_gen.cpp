#include "support/program_gen.hpp"

namespace pvm::testsupport {

using pvm::SplitMix64;
using pvm::vm::Function;
using pvm::vm::Module;
using pvm::vm::Op;

namespace {

constexpr uint32_t kScratchLocals = 3;  // general-purpose slots per function
constexpr uint32_t kLoopLocals = 3;     // reserved loop counters

class FunctionBuilder {
 public:
  FunctionBuilder(SplitMix64& rng, uint32_t self_index, uint32_t param_count)
      : rng_(rng), self_(self_index) {
    fn_.param_count = param_count;
    fn_.local_count = kScratchLocals + kLoopLocals;
    fn_.name = self_index == 0 ? "main" : "f" + std::to_string(self_index);
  }

  Function build(bool is_entry) {
    // Guarantee at least one explicit marker so the Explicit policy has
    // a stable point in every generated program.
    if (is_entry) emit(Op::Checkpoint);
    block(0, 1 + rng_.below(4));
    // Result: an accumulator local, so interrupted and straight runs can
    // be compared by halt value as well as memory.
    emit(Op::LocalGet, result_local());
    emit(is_entry ? Op::Halt : Op::Return);
    return std::move(fn_);
  }

 private:
  uint32_t total_slots() const { return fn_.param_count + fn_.local_count; }
  int64_t scratch_local() {
    return fn_.param_count + static_cast<int64_t>(rng_.below(kScratchLocals));
  }
  int64_t result_local() { return fn_.param_count; }
  // Any readable slot, including params.
  int64_t any_local() { return static_cast<int64_t>(rng_.below(total_slots())); }

  void emit(Op op, int64_t imm = 0) { fn_.code.push_back({op, imm}); }

  // Pushes exactly one value.
  void expression(int depth) {
    switch (rng_.below(depth >= 2 ? 3 : 5)) {
      case 0:
        emit(Op::ConstI64, static_cast<int64_t>(rng_.below(2000)) - 1000);
        break;
      case 1:
        emit(Op::LocalGet, any_local());
        break;
      case 2:
        emit(Op::ConstI64, aligned_address());
        emit(Op::MemLoad64);
        break;
      case 3: {
        expression(depth + 1);
        expression(depth + 1);
        static const Op ops[] = {Op::I64Add, Op::I64Sub, Op::I64Mul, Op::I64Eq,
                                 Op::I64LtS};
        emit(ops[rng_.below(5)]);
        break;
      }
      case 4: {
        // Calls only go to strictly higher indices, so the call graph is
        // a DAG and every program terminates.
        if (self_ + 1 >= planned_function_count_) {
          emit(Op::LocalGet, any_local());
          break;
        }
        uint32_t callee = self_ + 1 +
                          static_cast<uint32_t>(
                              rng_.below(planned_function_count_ - self_ - 1));
        for (uint32_t i = 0; i < planned_params_[callee]; i++) expression(depth + 1);
        emit(Op::Call, callee);
        break;
      }
    }
  }

  int64_t aligned_address() {
    return static_cast<int64_t>(rng_.below(8000)) * 8;  // within page 0
  }

  // Leaves the operand stack unchanged.
  void statement(int loop_depth) {
    switch (rng_.below(loop_depth < 2 ? 5 : 4)) {
      case 0:
        expression(0);
        emit(Op::LocalSet, scratch_local());
        break;
      case 1:
        emit(Op::ConstI64, aligned_address());
        expression(0);
        emit(Op::MemStore64);
        break;
      case 2:
        emit(Op::Checkpoint);
        break;
      case 3: {
        // acc += expr
        emit(Op::LocalGet, result_local());
        expression(0);
        emit(Op::I64Add);
        emit(Op::LocalSet, result_local());
        break;
      }
      case 4:
        counted_loop(loop_depth);
        break;
    }
  }

  void counted_loop(int loop_depth) {
    int64_t counter = fn_.param_count + kScratchLocals +
                      static_cast<int64_t>(loop_depth);
    int64_t iterations = 2 + static_cast<int64_t>(rng_.below(5));
    emit(Op::ConstI64, 0);
    emit(Op::LocalSet, counter);
    int64_t head = static_cast<int64_t>(fn_.code.size());
    block(loop_depth + 1, 1 + rng_.below(3));
    emit(Op::LocalGet, counter);
    emit(Op::ConstI64, 1);
    emit(Op::I64Add);
    emit(Op::LocalSet, counter);
    emit(Op::LocalGet, counter);
    emit(Op::ConstI64, iterations);
    emit(Op::I64LtS);
    emit(Op::BrIf, head);
  }

  void block(int loop_depth, uint64_t statements) {
    for (uint64_t i = 0; i < statements; i++) statement(loop_depth);
  }

 public:
  uint32_t planned_function_count_ = 1;
  std::vector<uint32_t> planned_params_;

 private:
  SplitMix64& rng_;
  uint32_t self_;
  Function fn_;
};

}  // namespace

Module generate_program(uint64_t seed) {
  SplitMix64 rng(seed);
  Module module;
  module.memory_pages_initial = 1;
  module.entry_function = 0;

  uint32_t nfuncs = 1 + static_cast<uint32_t>(rng.below(3));
  std::vector<uint32_t> params(nfuncs);
  params[0] = 0;
  for (uint32_t i = 1; i < nfuncs; i++)
    params[i] = 1 + static_cast<uint32_t>(rng.below(2));

  for (uint32_t i = 0; i < nfuncs; i++) {
    FunctionBuilder builder(rng, i, params[i]);
    builder.planned_function_count_ = nfuncs;
    builder.planned_params_ = params;
    module.functions.push_back(builder.build(i == 0));
  }
  pvm::vm::validate(module);
  return module;
}

}  // namespace pvm::testsupport

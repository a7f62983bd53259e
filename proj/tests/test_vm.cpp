#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "support/program_gen.hpp"
#include "support/reference_interp.hpp"
#include "vm/assembler.hpp"
#include "vm/interpreter.hpp"

using namespace pvm;
using namespace pvm::vm;
using pvm::testsupport::generate_program;
using pvm::testsupport::reference_run;

static std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

static std::string fixture(const std::string& name) {
  return std::string(PVM_SOURCE_DIR) + "/fixtures/programs/" + name;
}

static std::shared_ptr<const Module> load_fixture(const std::string& name) {
  return std::make_shared<Module>(assemble(read_file(fixture(name))));
}

static pvm_status code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return PVM_OK;
}

/* ------------------------------------------------------------------ */
/* Assembler                                                          */
/* ------------------------------------------------------------------ */

TEST_CASE("assemble smallest valid program") {
  Module m = assemble(".func main 0 0 \n const.i64 0 \n halt \n .end");
  CHECK(m.functions.size() == 1);
  CHECK(m.memory_pages_initial == 1);
  Instance inst(std::make_shared<Module>(m), PolicyMode::Loop);
  RunOutcome out = inst.run();
  CHECK(out.kind == RunOutcome::Kind::Halted);
  CHECK(out.value == 0);
}

TEST_CASE("call target out of bounds is rejected") {
  std::string src =
      ".func main 0 0\n call 7\n halt\n.end\n"
      ".func f1 0 0\n const.i64 1\n return\n.end\n";
  CHECK(code_of([&] { assemble(src); }) == PVM_ERR_VALIDATION);
}

TEST_CASE("parse errors carry the line number") {
  try {
    assemble(".func main 0 0\n const.i64\n halt\n.end");
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == PVM_ERR_PARSE);
    CHECK(e.detail() == 2);
  }
}

TEST_CASE("assembler rejections") {
  CHECK(code_of([] { assemble("const.i64 1\n"); }) == PVM_ERR_PARSE);
  CHECK(code_of([] { assemble(".func main 0 0\n br nowhere\n halt\n.end"); }) ==
        PVM_ERR_PARSE);
  CHECK(code_of([] { assemble(".func main 1 0\n halt\n.end"); }) ==
        PVM_ERR_VALIDATION);  // entry takes a parameter
  CHECK(code_of([] { assemble(".func main 0 0\n local.get 0\n halt\n.end"); }) ==
        PVM_ERR_VALIDATION);  // local out of bounds
  CHECK(code_of([] { assemble(".func main 0 0\n const.i64 1\n.end"); }) ==
        PVM_ERR_VALIDATION);  // body does not end with return/halt
}

TEST_CASE("sum10 fixture matches the hand-assembled listing") {
  Module m = assemble(read_file(fixture("sum10.pasm")));
  REQUIRE(m.functions.size() == 1);
  const Function& f = m.functions[0];
  // Golden shape: one loop with a single backward br_if to offset 4.
  std::vector<uint32_t> targets = back_edge_targets(f);
  REQUIRE(targets.size() == 1);
  CHECK(targets[0] == 4);
  CHECK(f.code.back().op == Op::Halt);
  CHECK(f.code[0].op == Op::ConstI64);
  CHECK(f.code[0].imm == 1);
}

/* ------------------------------------------------------------------ */
/* Instantiate / run                                                  */
/* ------------------------------------------------------------------ */

TEST_CASE("instantiate zeroes memory and starts at entry") {
  auto m = load_fixture("memfill.pasm");
  CHECK(m->memory_pages_initial == 2);
  Instance inst(m, PolicyMode::Loop);
  CHECK(inst.steps_executed() == 0);
  CHECK(inst.memory().size() == 2 * 64 * 1024);
  for (uint8_t b : inst.memory()) REQUIRE(b == 0);
  CHECK(inst.position() == Position{0, 0});
  CHECK(inst.at_stable_point());
}

TEST_CASE("fixtures halt with oracle-checked values") {
  // Expected values computed by the independent reference interpreter.
  struct Case { const char* name; int64_t expected; };
  for (Case c : {Case{"sum10.pasm", 55}, Case{"fib.pasm", 55},
                 Case{"memfill.pasm", 328350}}) {
    CAPTURE(c.name);
    auto m = load_fixture(c.name);
    auto ref = reference_run(*m);
    REQUIRE(ref.halted);
    CHECK(ref.value == c.expected);

    Instance inst(m, PolicyMode::Loop);
    RunOutcome out = inst.run();
    REQUIRE(out.kind == RunOutcome::Kind::Halted);
    CHECK(out.value == ref.value);
    CHECK(inst.steps_executed() == ref.steps);
    CHECK(std::equal(inst.memory().begin(), inst.memory().end(),
                     ref.memory.begin(), ref.memory.end()));
  }
}

TEST_CASE("sum10 under Loop policy stops at the back edge first") {
  auto m = load_fixture("sum10.pasm");
  Instance inst(m, PolicyMode::Loop);
  RunOutcome out = inst.run(kNoFuelLimit, true);
  REQUIRE(out.kind == RunOutcome::Kind::CheckpointReached);
  CHECK(out.position == Position{0, 4});
}

TEST_CASE("sum10 resumed through all checkpoints still halts with 55") {
  auto m = load_fixture("sum10.pasm");
  Instance inst(m, PolicyMode::Loop);
  int stops = 0;
  for (;;) {
    RunOutcome out = inst.run(kNoFuelLimit, true);
    if (out.kind == RunOutcome::Kind::Halted) {
      CHECK(out.value == 55);
      break;
    }
    REQUIRE(out.kind == RunOutcome::Kind::CheckpointReached);
    stops++;
    REQUIRE(stops < 1000);
  }
  CHECK(stops == 10);  // loop head is visited ten times
}

TEST_CASE("out of bounds load traps") {
  Module m = assemble(
      ".func main 0 0\n const.i64 1048576\n mem.load64\n halt\n.end");
  Instance inst(std::make_shared<Module>(m), PolicyMode::Loop);
  RunOutcome out = inst.run();
  REQUIRE(out.kind == RunOutcome::Kind::Trap);
  CHECK(out.trap == TrapReason::OutOfBoundsMemory);
  CHECK(inst.trapped());
  CHECK(code_of([&] { inst.run(); }) == PVM_ERR_NOT_RUNNABLE);
}

TEST_CASE("unaligned access and stack underflow trap") {
  {
    Module m = assemble(".func main 0 0\n const.i64 12\n mem.load64\n halt\n.end");
    Instance inst(std::make_shared<Module>(m), PolicyMode::Loop);
    CHECK(inst.run().trap == TrapReason::UnalignedAccess);
  }
  {
    Module m = assemble(".func main 0 1\n local.set 0\n halt\n.end");
    Instance inst(std::make_shared<Module>(m), PolicyMode::Loop);
    CHECK(inst.run().trap == TrapReason::StackUnderflow);
  }
}

TEST_CASE("fuel exhaustion pauses without reaching a stable point") {
  auto m = load_fixture("sum10.pasm");
  Instance inst(m, PolicyMode::Loop);
  RunOutcome out = inst.run(3);
  REQUIRE(out.kind == RunOutcome::Kind::FuelExhausted);
  CHECK(inst.steps_executed() == 3);
  CHECK(!inst.at_stable_point());
  CHECK(code_of([&] { inst.capture(); }) == PVM_ERR_NOT_AT_STABLE_POINT);
  // Still resumable.
  CHECK(inst.run().kind == RunOutcome::Kind::Halted);
}

TEST_CASE("fuel counts checkpoint markers") {
  Module m = assemble(
      ".func main 0 0\n checkpoint\n checkpoint\n const.i64 7\n halt\n.end");
  Instance inst(std::make_shared<Module>(m), PolicyMode::Loop);
  RunOutcome out = inst.run();
  CHECK(out.value == 7);
  CHECK(inst.steps_executed() == 4);  // two markers + const + halt
}

/* ------------------------------------------------------------------ */
/* Capture / restore                                                  */
/* ------------------------------------------------------------------ */

TEST_CASE("capture-restore-capture is byte identical") {
  auto m = load_fixture("sum10.pasm");
  Instance inst(m, PolicyMode::Loop);
  ExecutionState s1 = inst.capture();
  Instance inst2 = Instance::restore(m, s1, PolicyMode::Loop);
  ExecutionState s2 = inst2.capture();
  CHECK(s1.serialize() == s2.serialize());
}

TEST_CASE("capture after five loop iterations sees acc=15 i=6") {
  auto m = load_fixture("sum10.pasm");
  Instance inst(m, PolicyMode::Loop);
  // Stop 1 is loop entry (i=1, acc=0); five more body passes follow.
  for (int i = 0; i < 6; i++) {
    RunOutcome out = inst.run(kNoFuelLimit, true);
    REQUIRE(out.kind == RunOutcome::Kind::CheckpointReached);
  }
  ExecutionState s = inst.capture();
  REQUIRE(s.frames.size() == 1);
  CHECK(s.frames[0].locals[0] == 6);   // counter
  CHECK(s.frames[0].locals[1] == 15);  // accumulator
  // Capturing does not disturb the instance.
  CHECK(inst.run().value == 55);
}

TEST_CASE("capture mid-instruction-sequence is refused") {
  auto m = load_fixture("sum10.pasm");
  Instance inst(m, PolicyMode::Loop);
  inst.debug_clear_stable();
  CHECK(code_of([&] { inst.capture(); }) == PVM_ERR_NOT_AT_STABLE_POINT);
}

TEST_CASE("restore mid-loop and run to completion") {
  auto m = load_fixture("sum10.pasm");
  Instance inst(m, PolicyMode::Loop);
  REQUIRE(inst.run(kNoFuelLimit, true).kind == RunOutcome::Kind::CheckpointReached);
  ExecutionState s = inst.capture();

  Instance resumed = Instance::restore(m, s, PolicyMode::Loop);
  CHECK(resumed.steps_executed() == s.steps_executed);
  RunOutcome out = resumed.run();
  REQUIRE(out.kind == RunOutcome::Kind::Halted);
  CHECK(out.value == 55);
}

TEST_CASE("restore rejects a module with an edited constant") {
  auto m = load_fixture("sum10.pasm");
  Instance inst(m, PolicyMode::Loop);
  ExecutionState s = inst.capture();

  Module edited = *m;
  edited.functions[0].code[0].imm = 2;  // i starts at 2
  CHECK(code_of([&] {
          Instance::restore(std::make_shared<Module>(edited), s);
        }) == PVM_ERR_MEASUREMENT_MISMATCH);
}

TEST_CASE("restore rejects structurally malformed states") {
  auto m = load_fixture("sum10.pasm");
  Instance inst(m, PolicyMode::Loop);
  ExecutionState good = inst.capture();

  ExecutionState bad = good;
  bad.frames[0].function = 99;
  CHECK(code_of([&] { Instance::restore(m, bad); }) == PVM_ERR_MALFORMED_STATE);

  bad = good;
  bad.frames[0].locals.push_back(0);
  CHECK(code_of([&] { Instance::restore(m, bad); }) == PVM_ERR_MALFORMED_STATE);

  bad = good;
  bad.frames.clear();
  CHECK(code_of([&] { Instance::restore(m, bad); }) == PVM_ERR_MALFORMED_STATE);

  bad = good;
  bad.position.offset = 10000;
  CHECK(code_of([&] { Instance::restore(m, bad); }) == PVM_ERR_MALFORMED_STATE);
}

TEST_CASE("state serialization round-trips") {
  auto m = load_fixture("memfill.pasm");
  Instance inst(m, PolicyMode::Loop);
  for (int i = 0; i < 3; i++) inst.run(kNoFuelLimit, true);
  ExecutionState s = inst.capture();
  ExecutionState back = ExecutionState::deserialize(s.serialize());
  CHECK(back == s);
}

/* ------------------------------------------------------------------ */
/* Policies                                                           */
/* ------------------------------------------------------------------ */

TEST_CASE("function policy stops at call entries") {
  auto m = load_fixture("fib.pasm");
  Instance inst(m, PolicyMode::Function);
  RunOutcome out = inst.run(kNoFuelLimit, true);
  REQUIRE(out.kind == RunOutcome::Kind::CheckpointReached);
  CHECK(out.position.offset == 0);
  CHECK(out.position.function == 1);  // fib entry
}

TEST_CASE("explicit policy honors only checkpoint opcodes") {
  Module m = assemble(
      ".func main 0 1\n"
      " const.i64 0\n local.set 0\n"
      "loop:\n"
      " local.get 0\n const.i64 1\n i64.add\n local.set 0\n"
      " local.get 0\n const.i64 3\n i64.lt_s\n br_if loop\n"
      " checkpoint\n"
      " local.get 0\n halt\n.end");
  Instance inst(std::make_shared<Module>(m), PolicyMode::Explicit);
  RunOutcome out = inst.run(kNoFuelLimit, true);
  REQUIRE(out.kind == RunOutcome::Kind::CheckpointReached);
  // Skipped the loop back-edge; stopped at the checkpoint opcode.
  CHECK(m.functions[0].code[out.position.offset].op == Op::Checkpoint);
  CHECK(inst.run().value == 3);
}

TEST_CASE("function-mode stable points are a subset of loop-mode") {
  for (uint64_t seed = 1; seed <= 25; seed++) {
    CAPTURE(seed);
    auto m = std::make_shared<Module>(generate_program(seed));
    Instance func_inst(m, PolicyMode::Function);
    Instance loop_inst(m, PolicyMode::Loop);

    std::vector<Position> func_stops, loop_stops;
    for (;;) {
      RunOutcome out = func_inst.run(kNoFuelLimit, true);
      if (out.kind != RunOutcome::Kind::CheckpointReached) break;
      func_stops.push_back(out.position);
    }
    for (;;) {
      RunOutcome out = loop_inst.run(kNoFuelLimit, true);
      if (out.kind != RunOutcome::Kind::CheckpointReached) break;
      loop_stops.push_back(out.position);
    }
    // Every function-mode stop appears, in order, within the loop-mode
    // stops: the trace through a deterministic program is fixed, so
    // subset of stable points implies subsequence of stops.
    size_t j = 0;
    for (const Position& p : func_stops) {
      while (j < loop_stops.size() && !(loop_stops[j] == p)) j++;
      REQUIRE(j < loop_stops.size());
      j++;
    }
  }
}

/* ------------------------------------------------------------------ */
/* Properties: determinism and checkpoint transparency                */
/* ------------------------------------------------------------------ */

TEST_CASE("two instances produce identical step-by-step traces") {
  auto m = std::make_shared<Module>(generate_program(42));
  Instance a(m, PolicyMode::Loop);
  Instance b(m, PolicyMode::Loop);
  for (;;) {
    RunOutcome oa = a.run(1);
    RunOutcome ob = b.run(1);
    REQUIRE(oa.kind == ob.kind);
    REQUIRE(a.position() == b.position());
    REQUIRE(a.frames() == b.frames());
    if (oa.kind != RunOutcome::Kind::FuelExhausted) break;
  }
  CHECK(std::equal(a.memory().begin(), a.memory().end(), b.memory().begin(),
                   b.memory().end()));
}

TEST_CASE("generated corpus halts and matches the oracle") {
  for (uint64_t seed = 1; seed <= 30; seed++) {
    CAPTURE(seed);
    Module m = generate_program(seed);
    auto ref = reference_run(m);
    REQUIRE(ref.halted);

    Instance inst(std::make_shared<Module>(m), PolicyMode::Loop);
    RunOutcome out = inst.run();
    REQUIRE(out.kind == RunOutcome::Kind::Halted);
    CHECK(out.value == ref.value);
    CHECK(inst.steps_executed() == ref.steps);
    CHECK(std::equal(inst.memory().begin(), inst.memory().end(),
                     ref.memory.begin(), ref.memory.end()));
  }
}

TEST_CASE("checkpoint transparency with capture/restore cycles") {
  for (uint64_t seed = 1; seed <= 10; seed++) {
    for (PolicyMode policy :
         {PolicyMode::Function, PolicyMode::Loop, PolicyMode::Explicit}) {
      CAPTURE(seed);
      CAPTURE(static_cast<int>(policy));
      auto m = std::make_shared<Module>(generate_program(seed));

      Instance straight(m, policy);
      RunOutcome expected = straight.run();
      REQUIRE(expected.kind == RunOutcome::Kind::Halted);

      SplitMix64 rng(seed * 977 + static_cast<uint64_t>(policy));
      Instance inst(m, policy);
      RunOutcome out{};
      for (int guard = 0; guard < 100000; guard++) {
        out = inst.run(kNoFuelLimit, true);
        if (out.kind == RunOutcome::Kind::Halted) break;
        REQUIRE(out.kind == RunOutcome::Kind::CheckpointReached);
        if (rng.below(2) == 0) {
          ExecutionState s = inst.capture();
          s = ExecutionState::deserialize(s.serialize());
          inst = Instance::restore(m, s, policy);
        }
      }
      REQUIRE(out.kind == RunOutcome::Kind::Halted);
      CHECK(out.value == expected.value);
      CHECK(inst.steps_executed() == straight.steps_executed());
      CHECK(std::equal(inst.memory().begin(), inst.memory().end(),
                       straight.memory().begin(), straight.memory().end()));
    }
  }
}

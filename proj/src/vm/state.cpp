#include "vm/state.hpp"

#include "support/crypto.hpp"
#include "vm/module.hpp"

namespace pvm::vm {

Bytes ExecutionState::serialize_non_memory() const {
  ByteWriter w;
  w.raw(module_measurement.data(), module_measurement.size());
  w.u32(position.function);
  w.u32(position.offset);
  w.u64(steps_executed);
  w.u32(static_cast<uint32_t>(frames.size()));
  for (const Frame& f : frames) {
    w.u32(f.function);
    w.u32(f.return_position.function);
    w.u32(f.return_position.offset);
    w.u32(static_cast<uint32_t>(f.locals.size()));
    for (int64_t v : f.locals) w.i64(v);
    w.u32(static_cast<uint32_t>(f.operands.size()));
    for (int64_t v : f.operands) w.i64(v);
  }
  return w.take();
}

Bytes ExecutionState::serialize() const {
  Bytes out = serialize_non_memory();
  ByteWriter w;
  w.u64(memory.size());
  Bytes tail = w.take();
  out.insert(out.end(), tail.begin(), tail.end());
  out.insert(out.end(), memory.begin(), memory.end());
  return out;
}

ExecutionState ExecutionState::deserialize(ByteView bytes) {
  ByteReader r(bytes, PVM_ERR_MALFORMED_STATE);
  ExecutionState s;
  s.module_measurement = r.arr<32>();
  s.position.function = r.u32();
  s.position.offset = r.u32();
  s.steps_executed = r.u64();
  uint32_t frame_count = r.u32();
  s.frames.reserve(frame_count);
  for (uint32_t i = 0; i < frame_count; i++) {
    Frame f;
    f.function = r.u32();
    f.return_position.function = r.u32();
    f.return_position.offset = r.u32();
    uint32_t locals = r.u32();
    if (static_cast<uint64_t>(locals) * 8 > r.remaining())
      fail(PVM_ERR_MALFORMED_STATE, "locals length exceeds input");
    f.locals.reserve(locals);
    for (uint32_t j = 0; j < locals; j++) f.locals.push_back(r.i64());
    uint32_t operands = r.u32();
    if (static_cast<uint64_t>(operands) * 8 > r.remaining())
      fail(PVM_ERR_MALFORMED_STATE, "operand stack length exceeds input");
    f.operands.reserve(operands);
    for (uint32_t j = 0; j < operands; j++) f.operands.push_back(r.i64());
    s.frames.push_back(std::move(f));
  }
  uint64_t mem_len = r.u64();
  if (mem_len % kPageSize != 0)
    fail(PVM_ERR_MALFORMED_STATE, "memory length not page aligned");
  if (mem_len != r.remaining())
    fail(PVM_ERR_MALFORMED_STATE, "memory length mismatch");
  ByteView mem = r.raw(mem_len);
  s.memory.assign(mem.begin(), mem.end());
  r.expect_done();
  return s;
}

Digest32 ExecutionState::digest() const { return crypto::sha256(serialize()); }

}  // namespace pvm::vm

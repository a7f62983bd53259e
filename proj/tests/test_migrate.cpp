#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstring>
#include <fstream>
#include <mutex>

#include "doctest.h"
#include "support/migrate_harness.hpp"

using namespace pvm;
using namespace pvm::migrate;
using pvm::testsupport::fixture_module;
using pvm::testsupport::LoopbackRun;
using pvm::testsupport::run_loopback;
using pvm::testsupport::TwoNodes;
using pvm::sim::PipePair;

static vm::Instance mid_loop_instance(std::shared_ptr<const vm::Module> m,
                                      int stops = 3) {
  vm::Instance inst(m, vm::PolicyMode::Loop);
  for (int i = 0; i < stops; i++) {
    REQUIRE(inst.run(vm::kNoFuelLimit, true).kind ==
            vm::RunOutcome::Kind::CheckpointReached);
  }
  return inst;
}

/* ------------------------------------------------------------------ */
/* Handshake                                                          */
/* ------------------------------------------------------------------ */

TEST_CASE("attested handshake establishes a session on both ends") {
  TwoNodes nodes;
  PipePair pipes = PipePair::make();
  std::thread responder([&] {
    Session s = Session::respond(*pipes.b, nodes.config(false));
    CHECK(s.peer().node_id == nodes.source_id.node_id());
    pipes.b->close();
  });
  Session s = Session::initiate(*pipes.a, nodes.config(true));
  CHECK(s.peer().node_id == nodes.target_id.node_id());
  CHECK(s.peer().global_id == nodes.gid);
  CHECK(s.peer().entry_ids == std::vector<uint32_t>{1001, 1003});
  responder.join();
}

TEST_CASE("missing capability aborts before any key is derived") {
  TwoNodes nodes;
  PipePair pipes = PipePair::make();
  std::atomic<uint64_t> responder_kdf{999};
  std::thread responder([&] {
    uint64_t before = testing::kdf_invocations().load();
    EndpointConfig cfg = nodes.config(false);
    cfg.advertised_entry_ids = {};  // offers nothing
    try {
      Session::respond(*pipes.b, cfg);
    } catch (const Error&) {
    }
    responder_kdf = testing::kdf_invocations().load() - before;
    pipes.b->close();
  });
  uint64_t before = testing::kdf_invocations().load();
  pvm_status code = PVM_OK;
  try {
    Session::initiate(*pipes.a, nodes.config(true));
  } catch (const Error& e) {
    code = e.code();
  }
  responder.join();
  CHECK(code == PVM_ERR_CAPABILITY_MISMATCH);
  CHECK(testing::kdf_invocations().load() == before);
  CHECK(responder_kdf.load() == 0);
}

namespace {

// Active adversary: relays frames but replaces the ephemeral key in the
// first HELLO with its own, hoping to sit in the middle.
class EphSwapStream : public ByteStream {
 public:
  EphSwapStream(ByteStream& inner, crypto::PubKey own_eph)
      : inner_(inner), eph_(own_eph) {}
  void write(ByteView data) override {
    if (first_) {
      first_ = false;
      Bytes mutated(data.begin(), data.end());
      // frame: len u32 | type u8 | version u16 | nonce 32 | eph 65
      REQUIRE(mutated.size() >= 4 + 1 + 2 + 32 + 65);
      std::memcpy(mutated.data() + 4 + 1 + 2 + 32, eph_.data(), eph_.size());
      inner_.write(mutated);
      return;
    }
    inner_.write(data);
  }
  size_t read(uint8_t* out, size_t max) override { return inner_.read(out, max); }
  void close() override { inner_.close(); }
  bool poll() override { return inner_.poll(); }

 private:
  ByteStream& inner_;
  crypto::PubKey eph_;
  bool first_ = true;
};

}  // namespace

TEST_CASE("a relayed handshake with a substituted key value fails key binding") {
  TwoNodes nodes;
  PipePair pipes = PipePair::make();
  crypto::P256KeyPair attacker = crypto::P256KeyPair::generate();
  EphSwapStream mitm(*pipes.a, attacker.public_key());

  std::thread responder([&] {
    try {
      Session::respond(*pipes.b, nodes.config(false));
    } catch (const Error&) {
    }
    pipes.b->close();
  });
  pvm_status code = PVM_OK;
  try {
    Session::initiate(mitm, nodes.config(true));
  } catch (const Error& e) {
    code = e.code();
  }
  responder.join();
  CHECK(code == PVM_ERR_KEY_CONFIRM_FAILED);
}

TEST_CASE("non-whitelisted measurement fails verification without key derivation") {
  TwoNodes nodes;
  PipePair pipes = PipePair::make();
  std::thread responder([&] {
    EndpointConfig cfg = nodes.config(false);
    cfg.own_measurement[3] ^= 0xff;  // claims an unknown binary
    try {
      Session::respond(*pipes.b, cfg);
    } catch (const Error&) {
    }
    pipes.b->close();
  });
  uint64_t before = testing::kdf_invocations().load();
  pvm_status code = PVM_OK;
  try {
    Session::initiate(*pipes.a, nodes.config(true));
  } catch (const Error& e) {
    code = e.code();
  }
  responder.join();
  CHECK(code == PVM_ERR_VERIFICATION_FAILED);
  CHECK(testing::kdf_invocations().load() == before);
}

TEST_CASE("stale peer clock fails freshness") {
  TwoNodes nodes;
  PipePair pipes = PipePair::make();
  std::thread responder([&] {
    EndpointConfig cfg = nodes.config(false);
    cfg.clock = [] { return uint64_t{1}; };  // quotes dated long ago
    try {
      Session::respond(*pipes.b, cfg);
    } catch (const Error&) {
    }
    pipes.b->close();
  });
  pvm_status code = PVM_OK;
  try {
    Session::initiate(*pipes.a, nodes.config(true));
  } catch (const Error& e) {
    code = e.code();
  }
  responder.join();
  CHECK(code == PVM_ERR_STALE_QUOTE);
}

/* ------------------------------------------------------------------ */
/* End-to-end migration                                               */
/* ------------------------------------------------------------------ */

TEST_CASE("sum10 migrated mid-loop finishes remotely with 55") {
  auto m = fixture_module("sum10.pasm");
  TwoNodes nodes;
  vm::Instance inst = mid_loop_instance(m);

  // Oracle: an uninterrupted local run of the same program.
  vm::Instance local(m, vm::PolicyMode::Loop);
  vm::RunOutcome expected = local.run();

  PipePair pipes = PipePair::make();
  LoopbackRun run = run_loopback(inst, m, nodes, *pipes.a, *pipes.b);
  REQUIRE(run.migrate_error == PVM_OK);
  REQUIRE(run.served.has_value());
  REQUIRE(run.served->instance.has_value());

  CHECK(inst.migrated_away());
  vm::RunOutcome remote = run.served->instance->run();
  CHECK(remote.kind == vm::RunOutcome::Kind::Halted);
  CHECK(remote.value == expected.value);
  CHECK(run.served->instance->steps_executed() == local.steps_executed());
  CHECK(run.outcome->report.chunks_sent >= 1);
  CHECK(run.outcome->report.total_s >= 0);
}

TEST_CASE("migrate refuses an instance that is not at a stable point") {
  auto m = fixture_module("sum10.pasm");
  TwoNodes nodes;
  vm::Instance inst(m, vm::PolicyMode::Loop);
  inst.run(2);  // fuel pause, mid-sequence
  PipePair pipes = PipePair::make();
  LoopbackRun run = run_loopback(inst, m, nodes, *pipes.a, *pipes.b);
  CHECK(run.migrate_error == PVM_ERR_NOT_AT_STABLE_POINT);
  CHECK(inst.runnable());
}

TEST_CASE("verification failure leaves the source runnable") {
  auto m = fixture_module("sum10.pasm");
  TwoNodes nodes;
  vm::Instance inst = mid_loop_instance(m);
  PipePair pipes = PipePair::make();
  LoopbackRun run = run_loopback(
      inst, m, nodes, *pipes.a, *pipes.b, {},
      [](TwoNodes& n) {
        EndpointConfig cfg = n.config(false);
        cfg.own_measurement[0] ^= 1;
        return cfg;
      });
  CHECK(run.migrate_error == PVM_ERR_VERIFICATION_FAILED);
  CHECK(inst.runnable());
  CHECK(!run.served.has_value());
}

TEST_CASE("remote restore failure reports and leaves the source runnable") {
  auto sum10 = fixture_module("sum10.pasm");
  auto fib = fixture_module("fib.pasm");
  TwoNodes nodes;
  vm::Instance inst = mid_loop_instance(sum10);
  PipePair pipes = PipePair::make();
  // The target expects a different module, so restore must fail there.
  LoopbackRun run = run_loopback(inst, fib, nodes, *pipes.a, *pipes.b);
  CHECK(run.migrate_error == PVM_ERR_REMOTE_RESTORE_FAILED);
  CHECK(run.serve_error == PVM_ERR_MEASUREMENT_MISMATCH);
  CHECK(inst.runnable());
  CHECK(!run.served.has_value());
}

TEST_CASE("refresh events occur when the transfer outlives the window") {
  auto m = fixture_module("memfill.pasm");
  TwoNodes nodes;
  vm::Instance inst = mid_loop_instance(m, 5);

  // The sender's clock ticks a few seconds on every read, so the
  // interval elapses between handshake and chunk stream. Drift stays
  // far below the 300 s freshness window.
  EndpointConfig src_cfg = nodes.config(true);
  auto clk = nodes.clock;
  src_cfg.clock = [clk] { return clk->fetch_add(5); };

  PipePair pipes = PipePair::make();
  std::optional<ServeResult> served;
  std::thread server([&] {
    try {
      served = serve_once(*pipes.b, nodes.config(false), m, inst.policy());
    } catch (const Error&) {
    }
    pipes.b->close();
  });
  MigrateOptions opts;
  opts.refresh_interval_s = 3;
  MigrationOutcome out = migrate_instance(inst, *pipes.a, src_cfg, opts);
  pipes.a->close();
  server.join();

  CHECK(out.report.refresh_events.size() >= 1);
  REQUIRE(served.has_value());
  CHECK(served->refreshes == out.report.refresh_events.size());
  REQUIRE(served->instance.has_value());
  CHECK(served->instance->run().value == 328350);
}

TEST_CASE("tampered chunk aborts the transfer with a chunk integrity failure") {
  auto m = fixture_module("sum10.pasm");
  TwoNodes nodes;
  vm::Instance inst = mid_loop_instance(m);
  PipePair pipes = PipePair::make();
  // Frames source->target: HELLO, QUOTE, KEYCONFIRM, NEGOTIATE, CHUNK.
  sim::CorruptingStream corrupting(*pipes.a, 4, 20);
  LoopbackRun run = run_loopback(inst, m, nodes, corrupting, *pipes.b);
  CHECK(run.migrate_error == PVM_ERR_CHUNK_INTEGRITY_FAILURE);
  CHECK(run.serve_error == PVM_ERR_CHUNK_INTEGRITY_FAILURE);
  CHECK(inst.runnable());
  CHECK(!run.served.has_value());
}

TEST_CASE("a lying commit digest is caught by the receiver") {
  auto m = fixture_module("sum10.pasm");
  TwoNodes nodes;
  vm::Instance inst = mid_loop_instance(m);
  PipePair pipes = PipePair::make();

  std::optional<pvm_status> serve_error;
  std::thread server([&] {
    try {
      serve_once(*pipes.b, nodes.config(false), m, inst.policy());
    } catch (const Error& e) {
      serve_error = e.code();
    }
    pipes.b->close();
  });

  pvm_status sender_error = PVM_OK;
  try {
    Session session = Session::initiate(*pipes.a, nodes.config(true));
    Bytes blob = snapshot::encode(inst.capture(), Key32{});
    Digest32 lie = crypto::sha256(blob);
    lie[0] ^= 0xff;
    TransferReport report;
    send_snapshot(session, blob, lie, 300, Key32{}, report);
  } catch (const Error& e) {
    sender_error = e.code();
  }
  pipes.a->close();
  server.join();
  CHECK(sender_error == PVM_ERR_DIGEST_MISMATCH);
  REQUIRE(serve_error.has_value());
  CHECK(*serve_error == PVM_ERR_DIGEST_MISMATCH);
}

TEST_CASE("transport drop mid-transfer discards everything") {
  auto m = fixture_module("sum10.pasm");
  TwoNodes nodes;
  vm::Instance inst = mid_loop_instance(m);
  PipePair pipes = PipePair::make();
  // Cut after the handshake (6 frames) plus NEGOTIATE.
  auto counter = std::make_shared<sim::CutCounter>(7);
  sim::CutStream cut_a(*pipes.a, counter);
  sim::CutStream cut_b(*pipes.b, counter);
  LoopbackRun run = run_loopback(inst, m, nodes, cut_a, cut_b);
  CHECK(run.migrate_error == PVM_ERR_TRANSPORT_CLOSED);
  CHECK(inst.runnable());
  CHECK(!run.served.has_value());
}

/* ------------------------------------------------------------------ */
/* Atomicity under fault injection                                    */
/* ------------------------------------------------------------------ */

TEST_CASE("every cut point leaves exactly one runnable instance") {
  auto m = fixture_module("sum10.pasm");

  // Count the frames of a clean run first.
  long total_frames = 0;
  {
    TwoNodes nodes;
    vm::Instance inst = mid_loop_instance(m);
    PipePair pipes = PipePair::make();
    auto log = std::make_shared<std::vector<Bytes>>();
    sim::TapStream tap_a(*pipes.a, log);
    sim::TapStream tap_b(*pipes.b, log);
    LoopbackRun run = run_loopback(inst, m, nodes, tap_a, tap_b);
    REQUIRE(run.migrate_error == PVM_OK);
    total_frames = static_cast<long>(log->size());
  }
  REQUIRE(total_frames >= 10);

  for (long cut = 0; cut <= total_frames; cut++) {
    CAPTURE(cut);
    TwoNodes nodes;
    vm::Instance inst = mid_loop_instance(m);
    PipePair pipes = PipePair::make();
    auto counter = std::make_shared<sim::CutCounter>(cut);
    sim::CutStream cut_a(*pipes.a, counter);
    sim::CutStream cut_b(*pipes.b, counter);
    LoopbackRun run = run_loopback(inst, m, nodes, cut_a, cut_b);

    bool source_runnable = inst.runnable();
    bool target_runnable =
        run.served.has_value() && run.served->instance.has_value();
    REQUIRE_MESSAGE(source_runnable != target_runnable,
                    "cut=" << cut << " source=" << source_runnable
                           << " target=" << target_runnable);
  }
}

/* ------------------------------------------------------------------ */
/* Confidentiality                                                    */
/* ------------------------------------------------------------------ */

namespace {

// Program that plants a 64-byte sentinel at memory offset 0 and pauses
// at an explicit checkpoint.
std::string sentinel_program(const std::array<uint8_t, 64>& sentinel) {
  std::string src = ".func main 0 0\n";
  for (int word = 0; word < 8; word++) {
    uint64_t v = 0;
    for (int i = 0; i < 8; i++)
      v |= static_cast<uint64_t>(sentinel[word * 8 + i]) << (8 * i);
    src += "  const.i64 " + std::to_string(word * 8) + "\n";
    src += "  const.i64 " + std::to_string(static_cast<int64_t>(v)) + "\n";
    src += "  mem.store64\n";
  }
  src += "  checkpoint\n  const.i64 0\n  halt\n.end\n";
  return src;
}

bool contains(const Bytes& haystack, ByteView needle) {
  if (needle.size() > haystack.size()) return false;
  return std::search(haystack.begin(), haystack.end(), needle.begin(),
                     needle.end()) != haystack.end();
}

}  // namespace

TEST_CASE("a memory sentinel never crosses the wire in plaintext") {
  std::array<uint8_t, 64> sentinel;
  SplitMix64 rng(0xfeedface);
  for (auto& b : sentinel) b = static_cast<uint8_t>(rng.next());

  auto m = std::make_shared<vm::Module>(vm::assemble(sentinel_program(sentinel)));
  TwoNodes nodes;
  vm::Instance inst(m, vm::PolicyMode::Explicit);
  REQUIRE(inst.run(vm::kNoFuelLimit, true).kind ==
          vm::RunOutcome::Kind::CheckpointReached);
  REQUIRE(contains(Bytes(inst.memory().begin(), inst.memory().end()),
                   ByteView(sentinel.data(), 64)));

  PipePair pipes = PipePair::make();
  auto log = std::make_shared<std::vector<Bytes>>();
  sim::TapStream tap_a(*pipes.a, log);
  sim::TapStream tap_b(*pipes.b, log);
  LoopbackRun run = run_loopback(inst, m, nodes, tap_a, tap_b);
  REQUIRE(run.migrate_error == PVM_OK);

  for (const Bytes& frame : *log) {
    REQUIRE(!contains(frame, ByteView(sentinel.data(), 64)));
    for (size_t off = 0; off + 16 <= sentinel.size(); off += 8)
      REQUIRE(!contains(frame, ByteView(sentinel.data() + off, 16)));
  }
}

/* ------------------------------------------------------------------ */
/* Timing                                                             */
/* ------------------------------------------------------------------ */

TEST_CASE("stage accounting: total within 10% of the stage sum") {
  auto m = fixture_module("memfill.pasm");
  TwoNodes nodes;
  vm::Instance inst = mid_loop_instance(m, 4);

  // Pace the link so the transfer stage dominates measurement noise.
  sim::LinkParams params;
  params.bandwidth_bps = 5e6;  // ~0.2 s for a couple hundred KiB
  sim::SimulatedLink link(params, 7);
  auto a = link.endpoint_a();
  auto b = link.endpoint_b();
  LoopbackRun run = run_loopback(inst, m, nodes, *a, *b);
  REQUIRE(run.migrate_error == PVM_OK);
  const TransferReport& r = run.outcome->report;
  double sum = r.checkpoint_s + r.compress_s + r.transfer_s + r.restore_ack_s;
  CHECK(r.total_s == doctest::Approx(sum).epsilon(0.10));
}

namespace {

// Records (direction, type, frame length) for every frame written.
class TranscriptTap : public ByteStream {
 public:
  TranscriptTap(ByteStream& inner, const char* dir,
                std::shared_ptr<std::vector<std::string>> log,
                std::shared_ptr<std::mutex> mutex)
      : inner_(inner), dir_(dir), log_(std::move(log)), mutex_(std::move(mutex)) {}
  void write(ByteView data) override {
    REQUIRE(data.size() >= 5);
    {
      std::lock_guard lock(*mutex_);
      log_->push_back(std::string(dir_) + " " +
                      msg_type_name(static_cast<MsgType>(data[4])) + " " +
                      std::to_string(data.size()));
    }
    inner_.write(data);
  }
  size_t read(uint8_t* out, size_t max) override { return inner_.read(out, max); }
  void close() override { inner_.close(); }
  bool poll() override { return inner_.poll(); }

 private:
  ByteStream& inner_;
  const char* dir_;
  std::shared_ptr<std::vector<std::string>> log_;
  std::shared_ptr<std::mutex> mutex_;
};

}  // namespace

TEST_CASE("the wire transcript matches the golden fixture") {
  // Fixed identities, state, and storage key make every frame length
  // deterministic; contents vary with ephemeral keys, lengths do not.
  auto m = fixture_module("sum10.pasm");
  TwoNodes nodes;
  vm::Instance inst = mid_loop_instance(m, 3);

  PipePair pipes = PipePair::make();
  auto log = std::make_shared<std::vector<std::string>>();
  auto mutex = std::make_shared<std::mutex>();
  TranscriptTap tap_src(*pipes.a, "src", log, mutex);
  TranscriptTap tap_dst(*pipes.b, "dst", log, mutex);

  MigrateOptions options;
  options.storage_key = Key32{};
  LoopbackRun run = run_loopback(inst, m, nodes, tap_src, tap_dst, options);
  REQUIRE(run.migrate_error == PVM_OK);

  std::string path =
      std::string(PVM_SOURCE_DIR) + "/fixtures/golden/wire_transcript.txt";
  std::ifstream in(path);
  REQUIRE_MESSAGE(in.good(), "golden transcript missing: " << path);
  std::vector<std::string> expected;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') expected.push_back(line);
  CHECK(*log == expected);
}

TEST_CASE("simulated link delay traces are seed-deterministic") {
  sim::LinkParams params;
  params.base_latency_s = 0.0001;
  params.jitter_s = 0.0002;
  params.loss = 0.3;
  auto trace_of = [&](uint64_t seed) {
    sim::SimulatedLink link(params, seed);
    auto a = link.endpoint_a();
    auto b = link.endpoint_b();
    Bytes msg(100, 7);
    std::thread reader([&] {
      uint8_t buf[256];
      size_t total = 0;
      while (total < 1000) {
        size_t n = b->read(buf, sizeof buf);
        if (n == 0) break;
        total += n;
      }
    });
    for (int i = 0; i < 10; i++) a->write(msg);
    reader.join();
    return link.delay_trace();
  };
  auto t1 = trace_of(11);
  auto t2 = trace_of(11);
  auto t3 = trace_of(12);
  CHECK(t1 == t2);
  CHECK(t1 != t3);
}

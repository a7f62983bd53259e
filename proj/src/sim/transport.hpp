#ifndef PVM_SIM_TRANSPORT_HPP
#define PVM_SIM_TRANSPORT_HPP

#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <vector>

#include "migrate/wire.hpp"

namespace pvm::sim {

// In-memory duplex pipe with drain-on-close semantics: bytes accepted by
// write() remain readable after either endpoint closes, so a successful
// write is a delivery guarantee. This is what makes migration hand-off
// decisions unambiguous under fault injection.
class PipePair {
 public:
  static PipePair make();
  std::unique_ptr<migrate::ByteStream> a;
  std::unique_ptr<migrate::ByteStream> b;
};

// Deterministic link model: per-message latency (base + seeded jitter),
// seeded loss (a lost message is retransmitted below the byte-stream
// abstraction and shows up as extra delay), a bandwidth cap that paces
// delivery deadlines, and scheduled disconnect windows that close the
// stream. Identical seed and schedule give an identical delay trace.
struct LinkParams {
  double base_latency_s = 0.0;
  double jitter_s = 0.0;
  double loss = 0.0;                 // probability per message
  double bandwidth_bps = 0.0;        // 0 = unpaced
  double retransmit_penalty_s = 0.05;
  std::vector<std::pair<double, double>> disconnects;  // [start, end) seconds
};

class SimulatedLink {
 public:
  SimulatedLink(LinkParams params, uint64_t seed);

  // Two endpoints of one duplex link sharing the pacing state.
  std::unique_ptr<migrate::ByteStream> endpoint_a();
  std::unique_ptr<migrate::ByteStream> endpoint_b();

  // Logical delays applied so far, in write order (deterministic).
  std::vector<double> delay_trace() const;

  struct Shared;

 private:
  std::shared_ptr<Shared> shared_;
};

// Records every byte written through it; wraps an inner stream. Used by
// the wire-confidentiality property to capture all frames on the wire.
class TapStream : public migrate::ByteStream {
 public:
  TapStream(migrate::ByteStream& inner, std::shared_ptr<std::vector<Bytes>> log)
      : inner_(inner), log_(std::move(log)) {}
  void write(ByteView data) override;
  size_t read(uint8_t* out, size_t max) override { return inner_.read(out, max); }
  void close() override { inner_.close(); }
  bool poll() override { return inner_.poll(); }

 private:
  migrate::ByteStream& inner_;
  std::shared_ptr<std::vector<Bytes>> log_;
  std::mutex tap_mutex_;
};

// Fault injector: counts writes across both directions of a connection
// and fails every write once the budget is spent. Cutting between
// frame-sized writes models a connection lost between messages.
class CutCounter {
 public:
  explicit CutCounter(long allowed_writes) : remaining_(allowed_writes) {}
  bool spend();

 private:
  std::mutex mutex_;
  long remaining_;
};

class CutStream : public migrate::ByteStream {
 public:
  CutStream(migrate::ByteStream& inner, std::shared_ptr<CutCounter> counter)
      : inner_(inner), counter_(std::move(counter)) {}
  void write(ByteView data) override;
  size_t read(uint8_t* out, size_t max) override { return inner_.read(out, max); }
  void close() override { inner_.close(); }
  bool poll() override { return inner_.poll(); }

 private:
  migrate::ByteStream& inner_;
  std::shared_ptr<CutCounter> counter_;
};

// Flips one byte in the Nth frame written through it (fault injection
// for chunk-integrity tests).
class CorruptingStream : public migrate::ByteStream {
 public:
  CorruptingStream(migrate::ByteStream& inner, size_t frame_index,
                   size_t byte_offset)
      : inner_(inner), target_frame_(frame_index), byte_offset_(byte_offset) {}
  void write(ByteView data) override;
  size_t read(uint8_t* out, size_t max) override { return inner_.read(out, max); }
  void close() override { inner_.close(); }
  bool poll() override { return inner_.poll(); }

 private:
  migrate::ByteStream& inner_;
  size_t target_frame_;
  size_t byte_offset_;
  size_t seen_ = 0;
};

}  // namespace pvm::sim

#endif

#include "sim/transport.hpp"

#include <cstring>
#include <thread>

namespace pvm::sim {

using migrate::ByteStream;

/* ------------------------------------------------------------------ */
/* PipePair                                                           */
/* ------------------------------------------------------------------ */

namespace {

struct PipeCore {
  std::mutex mutex;
  std::condition_variable readable;
  std::deque<uint8_t> a_to_b;
  std::deque<uint8_t> b_to_a;
  bool closed = false;  // closes both directions; queued bytes drain
};

class PipeEnd : public ByteStream {
 public:
  PipeEnd(std::shared_ptr<PipeCore> core, bool is_a)
      : core_(std::move(core)), is_a_(is_a) {}
  ~PipeEnd() override { close(); }

  void write(ByteView data) override {
    std::lock_guard lock(core_->mutex);
    if (core_->closed)
      fail(PVM_ERR_TRANSPORT_CLOSED, "pipe closed");
    auto& q = is_a_ ? core_->a_to_b : core_->b_to_a;
    q.insert(q.end(), data.begin(), data.end());
    core_->readable.notify_all();
  }

  size_t read(uint8_t* out, size_t max) override {
    std::unique_lock lock(core_->mutex);
    auto& q = is_a_ ? core_->b_to_a : core_->a_to_b;
    core_->readable.wait(lock, [&] { return !q.empty() || core_->closed; });
    if (q.empty()) return 0;
    size_t n = std::min(max, q.size());
    for (size_t i = 0; i < n; i++) {
      out[i] = q.front();
      q.pop_front();
    }
    return n;
  }

  void close() override {
    std::lock_guard lock(core_->mutex);
    core_->closed = true;
    core_->readable.notify_all();
  }

  bool poll() override {
    std::lock_guard lock(core_->mutex);
    auto& q = is_a_ ? core_->b_to_a : core_->a_to_b;
    return !q.empty();
  }

 private:
  std::shared_ptr<PipeCore> core_;
  bool is_a_;
};

}  // namespace

PipePair PipePair::make() {
  auto core = std::make_shared<PipeCore>();
  PipePair pair;
  pair.a = std::make_unique<PipeEnd>(core, true);
  pair.b = std::make_unique<PipeEnd>(core, false);
  return pair;
}

/* ------------------------------------------------------------------ */
/* SimulatedLink                                                      */
/* ------------------------------------------------------------------ */

using Clock = std::chrono::steady_clock;

struct SimulatedLink::Shared {
  LinkParams params;
  std::mutex mutex;
  std::condition_variable readable;
  SplitMix64 rng;
  Clock::time_point origin = Clock::now();
  Clock::time_point busy_a2b = origin;
  Clock::time_point busy_b2a = origin;
  std::vector<double> trace;
  bool closed = false;

  struct Segment {
    Bytes data;
    Clock::time_point deliver_at;
  };
  std::deque<Segment> a_to_b;
  std::deque<Segment> b_to_a;
  size_t a_off = 0;  // read offset into front segment
  size_t b_off = 0;

  explicit Shared(LinkParams p, uint64_t seed) : params(p), rng(seed) {}

  bool disconnected_now() {
    double t = std::chrono::duration<double>(Clock::now() - origin).count();
    for (auto& [start, end] : params.disconnects)
      if (t >= start && t < end) return true;
    return false;
  }

  void push(bool from_a, ByteView data) {
    std::lock_guard lock(mutex);
    if (closed) fail(PVM_ERR_TRANSPORT_CLOSED, "link closed");
    if (disconnected_now()) {
      closed = true;
      readable.notify_all();
      fail(PVM_ERR_TRANSPORT_CLOSED, "link disconnected");
    }
    double delay = params.base_latency_s + params.jitter_s * rng.unit();
    if (params.loss > 0 && rng.unit() < params.loss)
      delay += params.retransmit_penalty_s + 2 * params.base_latency_s;
    Clock::time_point now = Clock::now();
    Clock::time_point& busy = from_a ? busy_a2b : busy_b2a;
    Clock::time_point start = std::max(now, busy);
    if (params.bandwidth_bps > 0)
      start += std::chrono::duration_cast<Clock::duration>(
          std::chrono::duration<double>(data.size() * 8.0 /
                                        params.bandwidth_bps));
    Clock::time_point deliver =
        start + std::chrono::duration_cast<Clock::duration>(
                    std::chrono::duration<double>(delay));
    busy = start;  // bandwidth serializes per direction; latency overlaps
    trace.push_back(std::chrono::duration<double>(deliver - now).count());
    auto& q = from_a ? a_to_b : b_to_a;
    q.push_back({Bytes(data.begin(), data.end()), deliver});
    readable.notify_all();
  }

  size_t pull(bool to_b, uint8_t* out, size_t max) {
    std::unique_lock lock(mutex);
    auto& q = to_b ? a_to_b : b_to_a;
    size_t& off = to_b ? a_off : b_off;
    readable.wait(lock, [&] { return !q.empty() || closed; });
    if (q.empty()) return 0;
    Clock::time_point deliver = q.front().deliver_at;
    if (Clock::now() < deliver) {
      lock.unlock();
      std::this_thread::sleep_until(deliver);
      lock.lock();
      if (q.empty()) return 0;
    }
    Segment& seg = q.front();
    size_t n = std::min(max, seg.data.size() - off);
    std::memcpy(out, seg.data.data() + off, n);
    off += n;
    if (off == seg.data.size()) {
      q.pop_front();
      off = 0;
    }
    return n;
  }

  void close_link() {
    std::lock_guard lock(mutex);
    closed = true;
    readable.notify_all();
  }
};

namespace {

class LinkEnd : public ByteStream {
 public:
  LinkEnd(std::shared_ptr<SimulatedLink::Shared> shared, bool is_a)
      : shared_(std::move(shared)), is_a_(is_a) {}
  void write(ByteView data) override { shared_->push(is_a_, data); }
  size_t read(uint8_t* out, size_t max) override {
    return shared_->pull(!is_a_, out, max);
  }
  void close() override { shared_->close_link(); }
  bool poll() override {
    std::lock_guard lock(shared_->mutex);
    auto& q = is_a_ ? shared_->b_to_a : shared_->a_to_b;
    return !q.empty() && Clock::now() >= q.front().deliver_at;
  }

 private:
  std::shared_ptr<SimulatedLink::Shared> shared_;
  bool is_a_;
};

}  // namespace

SimulatedLink::SimulatedLink(LinkParams params, uint64_t seed)
    : shared_(std::make_shared<Shared>(params, seed)) {}

std::unique_ptr<ByteStream> SimulatedLink::endpoint_a() {
  return std::make_unique<LinkEnd>(shared_, true);
}

std::unique_ptr<ByteStream> SimulatedLink::endpoint_b() {
  return std::make_unique<LinkEnd>(shared_, false);
}

std::vector<double> SimulatedLink::delay_trace() const {
  std::lock_guard lock(shared_->mutex);
  return shared_->trace;
}

/* ------------------------------------------------------------------ */
/* Wrappers                                                           */
/* ------------------------------------------------------------------ */

void TapStream::write(ByteView data) {
  {
    std::lock_guard<std::mutex> lock(tap_mutex_);
    log_->emplace_back(data.begin(), data.end());
  }
  inner_.write(data);
}

bool CutCounter::spend() {
  std::lock_guard lock(mutex_);
  if (remaining_ <= 0) return false;
  remaining_--;
  return true;
}

void CutStream::write(ByteView data) {
  if (!counter_->spend()) {
    inner_.close();
    fail(PVM_ERR_TRANSPORT_CLOSED, "connection cut by fault injection");
  }
  inner_.write(data);
}

void CorruptingStream::write(ByteView data) {
  size_t index = seen_++;
  if (index != target_frame_) {
    inner_.write(data);
    return;
  }
  Bytes mutated(data.begin(), data.end());
  mutated[byte_offset_ % mutated.size()] ^= 0x01;
  inner_.write(mutated);
}

}  // namespace pvm::sim

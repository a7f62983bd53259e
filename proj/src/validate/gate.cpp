#include "validate/gate.hpp"

#include <chrono>
#include <condition_variable>
#include <mutex>
#include <optional>
#include <future>
#include <thread>

namespace pvm::validate {

namespace {

using Steady = std::chrono::steady_clock;

double since(Steady::time_point t0) {
  return std::chrono::duration<double>(Steady::now() - t0).count();
}

void spend(double seconds) {
  if (seconds > 0)
    std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
}

ChunkVerdict run_validator(const Validator& v, const std::string& chunk,
                           const std::string& context, double cost_s) {
  spend(cost_s);
  try {
    return v.verdict(chunk, context);
  } catch (const std::exception& e) {
    // Fail closed: a broken validator cannot wave anything through.
    return {VerdictKind::Block, std::string("validator panic: ") + e.what()};
  } catch (...) {
    return {VerdictKind::Block, "validator panic"};
  }
}

}  // namespace

GatedOutput gate_stream(const StreamSpec& stream,
                        const std::vector<Validator>& validators, GateMode mode,
                        double per_validator_cost_s) {
  GatedOutput out;

  // Ungated baseline: generation alone.
  {
    Steady::time_point t0 = Steady::now();
    for (size_t i = 0; i < stream.chunks.size(); i++) spend(stream.gen_delay_s);
    out.baseline_s = since(t0);
  }

  Steady::time_point t0 = Steady::now();
  std::string context = stream.input_context;

  if (mode == GateMode::Serial) {
    for (size_t i = 0; i < stream.chunks.size(); i++) {
      spend(stream.gen_delay_s);  // generate
      const std::string& chunk = stream.chunks[i];
      ReleaseRecord record{i, 0, false};
      for (const Validator& v : validators) {
        ChunkVerdict verdict =
            run_validator(v, chunk, context, per_validator_cost_s);
        record.verdict_count++;
        if (verdict.kind == VerdictKind::Flag)
          out.flags.push_back({i, v.name, verdict.reason});
        if (verdict.kind == VerdictKind::Block) {
          record.any_block = true;
          out.terminal = GatedOutput::Terminal::Blocked;
          out.blocked_chunk = i;
          out.blocked_validator = v.name;
          out.blocked_reason = verdict.reason;
          break;
        }
      }
      if (out.terminal == GatedOutput::Terminal::Blocked) break;
      out.release_log.push_back(record);
      out.released.push_back(chunk);
      context += chunk;
    }
  } else {
    // Generator thread produces chunks on its own clock; the gate
    // validates chunk i while chunk i+1 is being generated.
    std::mutex mutex;
    std::condition_variable ready;
    std::vector<std::string> produced;
    bool done = false;
    std::thread generator([&] {
      for (const std::string& chunk : stream.chunks) {
        spend(stream.gen_delay_s);
        std::lock_guard lock(mutex);
        produced.push_back(chunk);
        ready.notify_all();
      }
      std::lock_guard lock(mutex);
      done = true;
      ready.notify_all();
    });

    for (size_t i = 0;; i++) {
      std::string chunk;
      {
        std::unique_lock lock(mutex);
        ready.wait(lock, [&] { return produced.size() > i || done; });
        if (produced.size() <= i) break;
        chunk = produced[i];
      }
      std::vector<std::future<ChunkVerdict>> futures;
      futures.reserve(validators.size());
      for (const Validator& v : validators) {
        futures.push_back(std::async(std::launch::async, [&, cost = per_validator_cost_s] {
          return run_validator(v, chunk, context, cost);
        }));
      }
      ReleaseRecord record{i, 0, false};
      std::optional<std::pair<std::string, std::string>> blocker;
      for (size_t vi = 0; vi < futures.size(); vi++) {
        ChunkVerdict verdict = futures[vi].get();
        record.verdict_count++;
        if (verdict.kind == VerdictKind::Flag)
          out.flags.push_back({i, validators[vi].name, verdict.reason});
        if (verdict.kind == VerdictKind::Block && !blocker)
          blocker = {validators[vi].name, verdict.reason};
      }
      if (blocker) {
        record.any_block = true;
        out.terminal = GatedOutput::Terminal::Blocked;
        out.blocked_chunk = i;
        out.blocked_validator = blocker->first;
        out.blocked_reason = blocker->second;
        break;
      }
      out.release_log.push_back(record);
      out.released.push_back(chunk);
      context += chunk;
    }
    generator.join();
  }

  out.gated_s = since(t0);
  out.overhead_s = out.gated_s - out.baseline_s;
  out.overhead_fraction =
      out.baseline_s > 0 ? out.overhead_s / out.baseline_s : 0;
  return out;
}

}  // namespace pvm::validate

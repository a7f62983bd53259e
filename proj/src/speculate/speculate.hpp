#ifndef PVM_SPECULATE_SPECULATE_HPP
#define PVM_SPECULATE_SPECULATE_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "support/bytes.hpp"

namespace pvm::speculate {

// Dual-path execution: a fast approximate path races a slow precise
// path over identical inputs; the fast result is emitted provisionally
// and either committed (it agreed with the complete slow output) or
// corrected (the slow output replaces it). The slow path is the ground
// truth by definition.

using Output = std::vector<double>;

// Receives intermediate slow-path results as they stream.
using PartialSink = std::function<void(const Output&)>;

// predicate(fast, slow_partial_or_final) -> still consistent?
using Predicate = std::function<bool(const Output&, const Output&)>;

struct SpeculativeTask {
  std::function<Output()> fast;
  std::function<Output(const PartialSink&)> slow;
  Predicate consistent;
};

Predicate tolerance_predicate(double relative_tolerance);
Predicate exact_predicate();

enum class Status { CommittedFast, Corrected };

struct SpeculationOutcome {
  std::optional<Output> provisional;  // absent when the fast path trapped
  double emit_s = 0;                  // provisional emission time
  Output final_output;
  double final_s = 0;                 // when the final output was settled
  Status status = Status::Corrected;
  bool early_violation = false;  // a slow partial already disagreed
  double perceived_s = 0;        // what the caller experienced
  double speedup = 0;            // serial baseline / perceived
};

// Runs both paths concurrently. A fast-path failure falls back to the
// slow result silently; a slow-path failure is fatal (SlowPathTrap).
SpeculationOutcome speculate(const SpeculativeTask& task,
                             double serial_baseline_s);

/* ------------------------------------------------------------------ */
/* Benchmark                                                          */
/* ------------------------------------------------------------------ */

struct BenchWorkload {
  std::string name;
  double slow_ms = 20;
  double fast_ms = 2;
  int runs = 20;
  double inject_inconsistent = 0;  // fraction of runs built to disagree
  double tolerance = 0.01;
  size_t elements = 10000;
};

struct BenchRow {
  std::string name;
  double serial_s = 0;
  double speculative_s = 0;  // mean perceived latency
  double speedup = 0;
  double correction_rate = 0;
  int runs = 0;
};

struct BenchConfig {
  std::vector<BenchWorkload> workloads;
  uint64_t seed = 42;

  static BenchConfig default_suite();
  static BenchConfig load(const std::string& path);
};

std::vector<BenchRow> run_benchmark(const BenchConfig& config);
std::string bench_table(const std::vector<BenchRow>& rows);

}  // namespace pvm::speculate

#endif

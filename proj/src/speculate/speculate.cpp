#include "speculate/speculate.hpp"

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "support/error.hpp"

namespace pvm::speculate {

namespace {
using Steady = std::chrono::steady_clock;
double since(Steady::time_point t0) {
  return std::chrono::duration<double>(Steady::now() - t0).count();
}
}  // namespace

Predicate tolerance_predicate(double relative_tolerance) {
  return [relative_tolerance](const Output& fast, const Output& slow) {
    if (fast.size() != slow.size()) return false;
    for (size_t i = 0; i < fast.size(); i++) {
      double denom = std::max(1.0, std::fabs(slow[i]));
      if (std::fabs(fast[i] - slow[i]) / denom > relative_tolerance)
        return false;
    }
    return true;
  };
}

Predicate exact_predicate() {
  return [](const Output& fast, const Output& slow) { return fast == slow; };
}

SpeculationOutcome speculate(const SpeculativeTask& task,
                             double serial_baseline_s) {
  SpeculationOutcome outcome;
  Steady::time_point t0 = Steady::now();

  std::mutex mutex;
  std::condition_variable cv;
  std::optional<Output> fast_result;
  bool fast_failed = false;
  double fast_time = 0;
  std::vector<Output> partials;
  std::optional<Output> slow_result;
  bool slow_failed = false;
  std::string slow_error;
  double slow_time = 0;

  std::thread fast_thread([&] {
    try {
      Output out = task.fast();
      std::lock_guard lock(mutex);
      fast_result = std::move(out);
      fast_time = since(t0);
    } catch (const std::exception&) {
      std::lock_guard lock(mutex);
      fast_failed = true;
    }
    cv.notify_all();
  });
  std::thread slow_thread([&] {
    try {
      Output out = task.slow([&](const Output& partial) {
        std::lock_guard lock(mutex);
        partials.push_back(partial);
        cv.notify_all();
      });
      std::lock_guard lock(mutex);
      slow_result = std::move(out);
      slow_time = since(t0);
    } catch (const std::exception& e) {
      std::lock_guard lock(mutex);
      slow_failed = true;
      slow_error = e.what();
    }
    cv.notify_all();
  });

  // Emit the provisional result the moment the fast path lands; check
  // it against each slow partial as it streams, so a divergence is
  // known before the slow path even finishes.
  size_t checked_partials = 0;
  bool emitted = false;
  {
    std::unique_lock lock(mutex);
    for (;;) {
      cv.wait(lock, [&] {
        return slow_result || slow_failed ||
               (!emitted && (fast_result || fast_failed)) ||
               (fast_result && !outcome.early_violation &&
                partials.size() > checked_partials);
      });
      if (!emitted && (fast_result || fast_failed)) {
        emitted = true;
        if (fast_result) {
          outcome.provisional = *fast_result;
          outcome.emit_s = fast_time;
        }
      }
      if (fast_result && !outcome.early_violation) {
        for (; checked_partials < partials.size(); checked_partials++) {
          if (!task.consistent(*fast_result, partials[checked_partials])) {
            outcome.early_violation = true;
            break;
          }
        }
      }
      if (slow_result || slow_failed) break;
    }
  }
  fast_thread.join();
  slow_thread.join();

  if (slow_failed)
    fail(PVM_ERR_SLOW_PATH_TRAP, "slow path failed: " + slow_error);

  // The commit decision is always made against the complete slow
  // output, and only a provisional that was actually emitted before the
  // slow path finished can be committed.
  if (outcome.provisional && !outcome.early_violation &&
      task.consistent(*outcome.provisional, *slow_result)) {
    outcome.status = Status::CommittedFast;
    outcome.final_output = *outcome.provisional;
    outcome.final_s = slow_time;
    outcome.perceived_s = std::min(outcome.emit_s, slow_time);
  } else {
    outcome.status = Status::Corrected;
    outcome.final_output = *slow_result;
    outcome.final_s = slow_time;
    outcome.perceived_s = slow_time;
  }
  outcome.speedup =
      outcome.perceived_s > 0 ? serial_baseline_s / outcome.perceived_s : 0;
  return outcome;
}

/* ------------------------------------------------------------------ */
/* Benchmark                                                          */
/* ------------------------------------------------------------------ */

namespace {

// Synthetic mean-of-a-vector kernel with a configurable duration. The
// fast path samples 1% of the data; adversarial runs put the outliers
// outside the sample so the paths disagree beyond tolerance.
struct KernelData {
  std::vector<double> values;
};

KernelData make_data(SplitMix64& rng, size_t elements, bool adversarial) {
  KernelData data;
  data.values.resize(elements);
  for (size_t i = 0; i < elements; i++)
    data.values[i] = 1.0 + 0.001 * (rng.unit() - 0.5);
  if (adversarial) {
    for (size_t i = 0; i < elements; i++)
      if (i % 100 != 0) data.values[i] += 10.0;  // sample misses these
  }
  return data;
}

void busy_sleep(double ms) {
  if (ms <= 0) return;
  std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
}

double exact_mean(const std::vector<double>& v, size_t upto) {
  double acc = 0;
  for (size_t i = 0; i < upto; i++) acc += v[i];
  return upto ? acc / static_cast<double>(upto) : 0;
}

}  // namespace

BenchConfig BenchConfig::default_suite() {
  BenchConfig config;
  config.workloads = {
      {"stream-agg", 18, 2, 40, 0.0, 0.01, 10000},
      {"risk-scan", 18, 2, 500, 0.078, 0.01, 10000},
      {"batch-eval", 9, 3, 40, 0.0, 0.01, 10000},
  };
  return config;
}

BenchConfig BenchConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(PVM_ERR_IO, "cannot open benchmark config: " + path);
  std::string header;
  std::getline(in, header);
  if (header.rfind("pvmspec 1", 0) != 0)
    fail(PVM_ERR_SCENARIO_PARSE, path + ": not a speculation benchmark config");
  BenchConfig config;
  std::string line;
  int lineno = 1;
  while (std::getline(in, line)) {
    lineno++;
    std::istringstream ls(line);
    std::string head;
    if (!(ls >> head) || head[0] == '#') continue;
    if (head == "seed") {
      ls >> config.seed;
      continue;
    }
    if (head != "workload")
      fail(PVM_ERR_SCENARIO_PARSE,
           path + ":" + std::to_string(lineno) + ": expected 'workload'");
    BenchWorkload w;
    if (!(ls >> w.name >> w.slow_ms >> w.fast_ms >> w.runs >>
          w.inject_inconsistent >> w.tolerance))
      fail(PVM_ERR_SCENARIO_PARSE,
           path + ":" + std::to_string(lineno) +
               ": expected 'workload <name> <slow_ms> <fast_ms> <runs> "
               "<inject> <tolerance>'");
    config.workloads.push_back(w);
  }
  return config;
}

std::vector<BenchRow> run_benchmark(const BenchConfig& config) {
  std::vector<BenchRow> rows;
  SplitMix64 rng(config.seed);

  for (const BenchWorkload& w : config.workloads) {
    BenchRow row;
    row.name = w.name;
    row.runs = w.runs;

    // Exactly round(inject * runs) adversarial runs, shuffled in.
    int adversarial_count =
        static_cast<int>(std::lround(w.inject_inconsistent * w.runs));
    std::vector<bool> adversarial(static_cast<size_t>(w.runs), false);
    for (int i = 0; i < adversarial_count; i++) adversarial[i] = true;
    for (size_t i = adversarial.size(); i > 1; i--)
      std::swap(adversarial[i - 1], adversarial[rng.below(i)]);

    // Serial baseline: the slow path alone, measured once.
    {
      KernelData data = make_data(rng, w.elements, false);
      Steady::time_point t0 = Steady::now();
      busy_sleep(w.slow_ms);
      volatile double sink = exact_mean(data.values, data.values.size());
      (void)sink;
      row.serial_s = since(t0);
    }

    double perceived_sum = 0;
    int corrected = 0;
    for (int run = 0; run < w.runs; run++) {
      KernelData data =
          make_data(rng, w.elements, adversarial[static_cast<size_t>(run)]);
      SpeculativeTask task;
      task.fast = [&] {
        busy_sleep(w.fast_ms);
        double acc = 0;
        size_t count = 0;
        for (size_t i = 0; i < data.values.size(); i += 100) {
          acc += data.values[i];
          count++;
        }
        return Output{acc / static_cast<double>(count)};
      };
      task.slow = [&](const PartialSink& publish) {
        for (int quarter = 1; quarter <= 3; quarter++) {
          busy_sleep(w.slow_ms / 4);
          publish({exact_mean(data.values, data.values.size() * quarter / 4)});
        }
        busy_sleep(w.slow_ms / 4);
        return Output{exact_mean(data.values, data.values.size())};
      };
      task.consistent = tolerance_predicate(w.tolerance);

      SpeculationOutcome outcome = speculate(task, row.serial_s);
      perceived_sum += outcome.perceived_s;
      if (outcome.status == Status::Corrected) corrected++;
    }
    row.speculative_s = perceived_sum / w.runs;
    row.speedup = row.serial_s / row.speculative_s;
    row.correction_rate = static_cast<double>(corrected) / w.runs;
    rows.push_back(row);
  }
  return rows;
}

std::string bench_table(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-14s %10s %12s %9s %12s %6s\n", "workload",
                "serial s", "speculative", "speedup", "corrections", "runs");
  out << line;
  for (const BenchRow& r : rows) {
    std::snprintf(line, sizeof line, "%-14s %10.3f %12.4f %8.1fx %11.1f%% %6d\n",
                  r.name.c_str(), r.serial_s, r.speculative_s, r.speedup,
                  r.correction_rate * 100.0, r.runs);
    out << line;
  }
  return out.str();
}

}  // namespace pvm::speculate

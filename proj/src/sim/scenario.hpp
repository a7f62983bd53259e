#ifndef PVM_SIM_SCENARIO_HPP
#define PVM_SIM_SCENARIO_HPP

#include <optional>
#include <string>
#include <vector>

#include "replicate/manager.hpp"
#include "speculate/speculate.hpp"

namespace pvm::sim {

// Structured-text scenario format (see docs/harness.md): a replica
// roster with per-link parameters, a fault schedule, a workload
// dirty-page trace, optional speculation and validation sections, and
// assertions. Fault times are simulated; decision latencies are wall
// clock.

struct LinkState {
  double latency_ms = 1;
  double jitter_ms = 0;
  double loss = 0;
  double bandwidth_bps = 1e9;
  bool connected = true;
};

struct ScenarioEvent {
  enum class Kind { Fault, Heal, Dirty, Sync, Converge };
  double at_s = 0;
  Kind kind = Kind::Fault;
  uint32_t replica = 0;       // Fault/Heal/Dirty target, Sync source
  uint32_t peer = 0;          // Sync target
  std::optional<double> loss;       // Fault: set loss
  std::optional<double> latency_ms; // Fault: set latency
  bool disconnect = false;          // Fault: cut the link
  std::vector<uint32_t> pages;      // Dirty
  uint64_t seed = 0;                // Dirty payload seed
};

struct ScenarioAssert {
  enum class Kind {
    ActiveAt,
    MaxDecisionMs,
    ConvergeRoundsLe,
    DigestsEqual,
    SyncFractionBetween,
    SpecSpeedupGe,
    SpecCorrectionBetween,
    ValidationParallelLeSerial,
  };
  Kind kind;
  double at_s = 0;
  uint32_t replica = 0;
  double a = 0, b = 0;
};

struct Scenario {
  uint64_t seed = 1;
  std::string module_path;
  vm::PolicyMode policy = vm::PolicyMode::Loop;
  double latency_budget_ms = 200;
  std::vector<replicate::Tier> roster;
  std::vector<LinkState> links;
  std::vector<ScenarioEvent> events;
  std::vector<ScenarioAssert> asserts;
  std::optional<speculate::BenchWorkload> specbench;
  uint64_t specbench_seed = 42;
  std::string validate_corpus;
  std::string validate_rules;
  double validate_cost_ms = 0.3;
  double validate_gen_ms = 1.0;
};

Scenario parse_scenario(const std::string& path);

struct SimResult {
  std::string event_log;  // deterministic given the seed
  std::string metrics;    // wall-clock measurements, informational
  std::vector<std::string> assertion_failures;
  bool passed() const { return assertion_failures.empty(); }
};

SimResult run_scenario(const Scenario& scenario);

}  // namespace pvm::sim

#endif

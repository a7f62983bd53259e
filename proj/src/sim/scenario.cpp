#include "sim/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <sstream>

#include "validate/gate.hpp"
#include "validate/metrics.hpp"
#include "vm/assembler.hpp"

namespace pvm::sim {

namespace {

using replicate::Health;
using replicate::ReplicaManager;
using replicate::Tier;

[[noreturn]] void parse_fail(const std::string& path, int line,
                             const std::string& reason) {
  fail(PVM_ERR_SCENARIO_PARSE,
       path + ":" + std::to_string(line) + ": " + reason, line);
}

std::string dirname_of(const std::string& path) {
  size_t slash = path.find_last_of('/');
  return slash == std::string::npos ? std::string(".") : path.substr(0, slash);
}

std::string resolve(const std::string& base, const std::string& rel) {
  if (rel.empty() || rel[0] == '/') return rel;
  return base + "/" + rel;
}

std::vector<uint32_t> parse_pages(const std::string& spec, const std::string& path,
                                  int line) {
  // "0-4,9,12-13"
  std::vector<uint32_t> pages;
  std::istringstream in(spec);
  std::string part;
  while (std::getline(in, part, ',')) {
    size_t dash = part.find('-');
    try {
      if (dash == std::string::npos) {
        pages.push_back(static_cast<uint32_t>(std::stoul(part)));
      } else {
        uint32_t lo = static_cast<uint32_t>(std::stoul(part.substr(0, dash)));
        uint32_t hi = static_cast<uint32_t>(std::stoul(part.substr(dash + 1)));
        if (hi < lo) parse_fail(path, line, "page range is reversed");
        for (uint32_t p = lo; p <= hi; p++) pages.push_back(p);
      }
    } catch (const std::exception&) {
      parse_fail(path, line, "bad page list '" + spec + "'");
    }
  }
  return pages;
}

std::map<std::string, std::string> parse_kv(std::istringstream& in) {
  std::map<std::string, std::string> out;
  std::string token;
  while (in >> token) {
    size_t eq = token.find('=');
    if (eq == std::string::npos) continue;
    out[token.substr(0, eq)] = token.substr(eq + 1);
  }
  return out;
}

Health health_of(const LinkState& link) {
  if (!link.connected) return Health::unreachable();
  return {true, link.latency_ms, link.loss, link.bandwidth_bps};
}

}  // namespace

Scenario parse_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(PVM_ERR_IO, "cannot open scenario: " + path);
  std::string base = dirname_of(path);

  std::string header;
  std::getline(in, header);
  if (header.rfind("pvmsim 1", 0) != 0)
    fail(PVM_ERR_SCENARIO_PARSE, path + ":1: expected 'pvmsim 1' schema line", 1);

  Scenario s;
  std::string line;
  int lineno = 1;
  double last_time = 0;
  while (std::getline(in, line)) {
    lineno++;
    std::istringstream ls(line);
    std::string head;
    if (!(ls >> head) || head[0] == '#') continue;

    if (head == "seed") {
      ls >> s.seed;
    } else if (head == "module") {
      std::string rel;
      ls >> rel;
      s.module_path = resolve(base, rel);
    } else if (head == "policy") {
      std::string mode;
      ls >> mode;
      if (mode == "function") s.policy = vm::PolicyMode::Function;
      else if (mode == "loop") s.policy = vm::PolicyMode::Loop;
      else if (mode == "explicit") s.policy = vm::PolicyMode::Explicit;
      else parse_fail(path, lineno, "unknown policy '" + mode + "'");
    } else if (head == "latency_budget_ms") {
      ls >> s.latency_budget_ms;
    } else if (head == "replica") {
      std::string tier;
      ls >> tier;
      if (tier == "cloud") s.roster.push_back(Tier::Cloud);
      else if (tier == "edge") s.roster.push_back(Tier::Edge);
      else if (tier == "local") s.roster.push_back(Tier::Local);
      else parse_fail(path, lineno, "unknown tier '" + tier + "'");
      s.links.push_back({});
    } else if (head == "link") {
      uint32_t id;
      if (!(ls >> id) || id >= s.links.size())
        parse_fail(path, lineno, "link before replica or bad id");
      std::string key;
      while (ls >> key) {
        double value;
        if (!(ls >> value)) parse_fail(path, lineno, "link " + key + " needs a value");
        if (key == "latency") s.links[id].latency_ms = value;
        else if (key == "jitter") s.links[id].jitter_ms = value;
        else if (key == "loss") s.links[id].loss = value;
        else if (key == "bandwidth") s.links[id].bandwidth_bps = value;
        else parse_fail(path, lineno, "unknown link key '" + key + "'");
      }
    } else if (head == "at") {
      ScenarioEvent event;
      std::string verb;
      if (!(ls >> event.at_s >> verb))
        parse_fail(path, lineno, "expected 'at <time> <verb> ...'");
      if (event.at_s < last_time)
        parse_fail(path, lineno, "event times must be nondecreasing");
      last_time = event.at_s;
      if (verb == "fault") {
        std::string what;
        if (!(ls >> event.replica >> what))
          parse_fail(path, lineno, "expected 'fault <replica> <what>'");
        event.kind = ScenarioEvent::Kind::Fault;
        if (what == "disconnect") {
          event.disconnect = true;
        } else if (what == "loss") {
          double v;
          ls >> v;
          event.loss = v;
        } else if (what == "latency") {
          double v;
          ls >> v;
          event.latency_ms = v;
        } else {
          parse_fail(path, lineno, "unknown fault '" + what + "'");
        }
      } else if (verb == "heal") {
        event.kind = ScenarioEvent::Kind::Heal;
        if (!(ls >> event.replica)) parse_fail(path, lineno, "heal needs a replica");
      } else if (verb == "dirty") {
        event.kind = ScenarioEvent::Kind::Dirty;
        std::string pages_kw, pages, seed_kw;
        if (!(ls >> event.replica >> pages_kw >> pages >> seed_kw >> event.seed) ||
            pages_kw != "pages" || seed_kw != "seed")
          parse_fail(path, lineno,
                     "expected 'dirty <replica> pages <list> seed <n>'");
        event.pages = parse_pages(pages, path, lineno);
      } else if (verb == "sync") {
        event.kind = ScenarioEvent::Kind::Sync;
        if (!(ls >> event.replica >> event.peer))
          parse_fail(path, lineno, "expected 'sync <source> <target>'");
      } else if (verb == "converge") {
        event.kind = ScenarioEvent::Kind::Converge;
      } else {
        parse_fail(path, lineno, "unknown event '" + verb + "'");
      }
      s.events.push_back(std::move(event));
    } else if (head == "assert") {
      ScenarioAssert a{};
      std::string what;
      ls >> what;
      if (what == "active_at") {
        a.kind = ScenarioAssert::Kind::ActiveAt;
        if (!(ls >> a.at_s >> a.replica))
          parse_fail(path, lineno, "expected 'assert active_at <t> <replica>'");
      } else if (what == "max_decision_ms") {
        a.kind = ScenarioAssert::Kind::MaxDecisionMs;
        ls >> a.a;
      } else if (what == "converge_rounds_le") {
        a.kind = ScenarioAssert::Kind::ConvergeRoundsLe;
        ls >> a.a;
      } else if (what == "digests_equal") {
        a.kind = ScenarioAssert::Kind::DigestsEqual;
      } else if (what == "sync_fraction_between") {
        a.kind = ScenarioAssert::Kind::SyncFractionBetween;
        ls >> a.a >> a.b;
      } else if (what == "spec_speedup_ge") {
        a.kind = ScenarioAssert::Kind::SpecSpeedupGe;
        ls >> a.a;
      } else if (what == "spec_correction_between") {
        a.kind = ScenarioAssert::Kind::SpecCorrectionBetween;
        ls >> a.a >> a.b;
      } else if (what == "validation_parallel_le_serial") {
        a.kind = ScenarioAssert::Kind::ValidationParallelLeSerial;
      } else {
        parse_fail(path, lineno, "unknown assertion '" + what + "'");
      }
      s.asserts.push_back(a);
    } else if (head == "specbench") {
      speculate::BenchWorkload w;
      auto kv = parse_kv(ls);
      if (kv.count("name")) w.name = kv["name"];
      if (kv.count("slow_ms")) w.slow_ms = std::stod(kv["slow_ms"]);
      if (kv.count("fast_ms")) w.fast_ms = std::stod(kv["fast_ms"]);
      if (kv.count("runs")) w.runs = std::stoi(kv["runs"]);
      if (kv.count("inject")) w.inject_inconsistent = std::stod(kv["inject"]);
      if (kv.count("tol")) w.tolerance = std::stod(kv["tol"]);
      if (kv.count("seed")) s.specbench_seed = std::stoull(kv["seed"]);
      s.specbench = w;
    } else if (head == "validate") {
      auto kv = parse_kv(ls);
      if (kv.count("corpus")) s.validate_corpus = resolve(base, kv["corpus"]);
      if (kv.count("rules")) s.validate_rules = resolve(base, kv["rules"]);
      if (kv.count("cost_ms")) s.validate_cost_ms = std::stod(kv["cost_ms"]);
      if (kv.count("gen_ms")) s.validate_gen_ms = std::stod(kv["gen_ms"]);
    } else {
      parse_fail(path, lineno, "unknown directive '" + head + "'");
    }
  }
  if (!s.roster.empty() && s.module_path.empty())
    fail(PVM_ERR_SCENARIO_PARSE, path + ": replicas need a module", 0);
  return s;
}

/* ------------------------------------------------------------------ */
/* Runner                                                             */
/* ------------------------------------------------------------------ */

SimResult run_scenario(const Scenario& scenario) {
  SimResult result;
  std::ostringstream log;
  std::ostringstream metrics;
  char line[256];

  auto logf = [&](double t, const char* format, auto... args) {
    std::snprintf(line, sizeof line, format, args...);
    char stamped[288];
    std::snprintf(stamped, sizeof stamped, "T=%0.3f %s\n", t, line);
    log << stamped;
  };

  // Replication section.
  std::optional<ReplicaManager> manager;
  std::vector<LinkState> links = scenario.links;
  std::vector<double> decision_ms;
  std::vector<double> sync_fractions;
  size_t converge_rounds_max = 0;
  uint32_t active = 0;
  Key32 sync_key{};
  std::map<double, uint32_t> active_timeline;  // decided activations by time

  if (!scenario.roster.empty()) {
    auto module = std::make_shared<vm::Module>(
        vm::assemble_file(scenario.module_path));
    manager.emplace(module);
    // Seed state: the first stable point past entry, or the entry point
    // itself when the workload halts before pausing.
    vm::Instance seed_instance(module, scenario.policy);
    vm::ExecutionState state = seed_instance.capture();
    if (seed_instance.run(vm::kNoFuelLimit, true).kind ==
        vm::RunOutcome::Kind::CheckpointReached)
      state = seed_instance.capture();
    for (size_t i = 0; i < scenario.roster.size(); i++) {
      uint32_t id = manager->register_replica(scenario.roster[i], state);
      manager->set_health(id, health_of(links[i]), 0);
      logf(0.0, "register r%u tier=%s", id,
           replicate::tier_name(scenario.roster[i]));
    }
    active = manager->active(scenario.latency_budget_ms);
    active_timeline[0.0] = active;
    logf(0.0, "active r%u", active);

    for (const ScenarioEvent& event : scenario.events) {
      switch (event.kind) {
        case ScenarioEvent::Kind::Fault: {
          LinkState& link = links[event.replica];
          if (event.disconnect) {
            link.connected = false;
            logf(event.at_s, "fault r%u disconnect", event.replica);
          } else if (event.loss) {
            link.loss = *event.loss;
            logf(event.at_s, "fault r%u loss=%0.2f", event.replica, *event.loss);
          } else if (event.latency_ms) {
            link.latency_ms = *event.latency_ms;
            logf(event.at_s, "fault r%u latency=%0.1f", event.replica,
                 *event.latency_ms);
          }
          break;
        }
        case ScenarioEvent::Kind::Heal: {
          links[event.replica] = scenario.links[event.replica];
          logf(event.at_s, "heal r%u", event.replica);
          break;
        }
        case ScenarioEvent::Kind::Dirty: {
          manager->dirty_pages(event.replica, event.pages, event.seed,
                               event.at_s);
          logf(event.at_s, "dirty r%u pages=%zu", event.replica,
               event.pages.size());
          break;
        }
        case ScenarioEvent::Kind::Sync: {
          replicate::SyncReport report =
              manager->sync(event.replica, event.peer, sync_key, event.at_s);
          sync_fractions.push_back(report.fraction);
          // Modeled transfer time: pages over the target's link.
          double modeled_ms =
              links[event.peer].latency_ms +
              report.pages_transferred * vm::kPageSize * 8.0 /
                  links[event.peer].bandwidth_bps * 1000.0;
          logf(event.at_s, "sync r%u->r%u pages=%u fraction=%0.3f clock=%s",
               event.replica, event.peer, report.pages_transferred,
               report.fraction, report.resulting_clock.str().c_str());
          std::snprintf(line, sizeof line,
                        "sync r%u->r%u wall_ms=%0.3f modeled_ms=%0.3f",
                        event.replica, event.peer, report.duration_ms,
                        modeled_ms);
          metrics << line << "\n";
          break;
        }
        case ScenarioEvent::Kind::Converge: {
          size_t rounds =
              manager->converge(sync_key, scenario.roster.size(), event.at_s);
          converge_rounds_max = std::max(converge_rounds_max, rounds);
          logf(event.at_s, "converge rounds=%zu digests_equal=%d", rounds,
               manager->digests_equal() ? 1 : 0);
          break;
        }
      }
      if (event.kind == ScenarioEvent::Kind::Fault ||
          event.kind == ScenarioEvent::Kind::Heal) {
        manager->set_health(event.replica, health_of(links[event.replica]),
                            event.at_s);
        auto t0 = std::chrono::steady_clock::now();
        uint32_t chosen = manager->active(scenario.latency_budget_ms);
        double wall = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
        decision_ms.push_back(wall);
        if (chosen != active) {
          active = chosen;
          logf(event.at_s, "active r%u", active);
        }
        active_timeline[event.at_s] = active;
        std::snprintf(line, sizeof line, "failover decision wall_ms=%0.4f", wall);
        metrics << line << "\n";
      }
    }
  }

  // Speculation section.
  std::vector<speculate::BenchRow> bench_rows;
  if (scenario.specbench) {
    speculate::BenchConfig config;
    config.seed = scenario.specbench_seed;
    config.workloads = {*scenario.specbench};
    bench_rows = speculate::run_benchmark(config);
    for (const auto& row : bench_rows) {
      logf(0.0, "specbench %s corrections=%0.4f", row.name.c_str(),
           row.correction_rate);
      std::snprintf(line, sizeof line,
                    "specbench %s serial_s=%0.4f perceived_s=%0.4f "
                    "speedup=%0.2f corrections=%0.4f",
                    row.name.c_str(), row.serial_s, row.speculative_s,
                    row.speedup, row.correction_rate);
      metrics << line << "\n";
    }
  }

  // Validation section.
  std::optional<double> parallel_fraction, serial_fraction;
  if (!scenario.validate_corpus.empty()) {
    auto corpus = validate::load_corpus(scenario.validate_corpus);
    auto rules = scenario.validate_rules.empty()
                     ? validate::builtin_rules()
                     : validate::load_rules(scenario.validate_rules);
    auto metrics_rows = validate::evaluate_corpus(corpus, rules);
    for (const auto& m : metrics_rows)
      logf(0.0, "validate %s detection=%0.3f fp=%0.3f",
           validate::category_name(m.category), m.detection_rate,
           m.false_positive_rate);

    // Overhead comparison wants an unblocked run: stream the clean
    // items that carry no references needing per-item context.
    validate::StreamSpec stream;
    stream.gen_delay_s = scenario.validate_gen_ms / 1000.0;
    for (const auto& item : corpus)
      if (item.labels.empty() && item.text.find("ref:") == std::string::npos)
        stream.chunks.push_back(item.text);
    validate::GatedOutput parallel =
        validate::gate_stream(stream, rules, validate::GateMode::Parallel,
                              scenario.validate_cost_ms / 1000.0);
    validate::GatedOutput serial =
        validate::gate_stream(stream, rules, validate::GateMode::Serial,
                              scenario.validate_cost_ms / 1000.0);
    parallel_fraction = parallel.overhead_fraction;
    serial_fraction = serial.overhead_fraction;
    std::snprintf(line, sizeof line,
                  "validation overhead parallel=%0.3f serial=%0.3f "
                  "(fractions of baseline %0.3fs)",
                  parallel.overhead_fraction, serial.overhead_fraction,
                  parallel.baseline_s);
    metrics << line << "\n";
  }

  // Assertions.
  auto assert_fail = [&](const std::string& text) {
    result.assertion_failures.push_back(text);
  };
  for (const ScenarioAssert& a : scenario.asserts) {
    switch (a.kind) {
      case ScenarioAssert::Kind::ActiveAt: {
        uint32_t at_active = 0;
        for (const auto& [t, id] : active_timeline)
          if (t <= a.at_s) at_active = id;
        if (at_active != a.replica)
          assert_fail("active_at " + std::to_string(a.at_s) + ": expected r" +
                      std::to_string(a.replica) + ", got r" +
                      std::to_string(at_active));
        break;
      }
      case ScenarioAssert::Kind::MaxDecisionMs: {
        for (double ms : decision_ms)
          if (ms > a.a) {
            assert_fail("max_decision_ms: " + std::to_string(ms) + " > " +
                        std::to_string(a.a));
            break;
          }
        break;
      }
      case ScenarioAssert::Kind::ConvergeRoundsLe:
        if (converge_rounds_max > a.a)
          assert_fail("converge_rounds_le: took " +
                      std::to_string(converge_rounds_max) + " rounds");
        break;
      case ScenarioAssert::Kind::DigestsEqual:
        if (manager && !manager->digests_equal())
          assert_fail("digests_equal: replica states diverge");
        break;
      case ScenarioAssert::Kind::SyncFractionBetween: {
        bool any = false;
        for (double f : sync_fractions)
          if (f >= a.a && f <= a.b) any = true;
        if (!any) assert_fail("sync_fraction_between: no sync in range");
        break;
      }
      case ScenarioAssert::Kind::SpecSpeedupGe:
        for (const auto& row : bench_rows)
          if (row.speedup < a.a)
            assert_fail("spec_speedup_ge: " + row.name + " reached " +
                        std::to_string(row.speedup));
        break;
      case ScenarioAssert::Kind::SpecCorrectionBetween:
        for (const auto& row : bench_rows)
          if (row.correction_rate < a.a || row.correction_rate > a.b)
            assert_fail("spec_correction_between: " + row.name + " at " +
                        std::to_string(row.correction_rate));
        break;
      case ScenarioAssert::Kind::ValidationParallelLeSerial:
        if (!parallel_fraction || !serial_fraction)
          assert_fail("validation_parallel_le_serial: no validation section");
        else if (*parallel_fraction > *serial_fraction)
          assert_fail("validation_parallel_le_serial: parallel " +
                      std::to_string(*parallel_fraction) + " > serial " +
                      std::to_string(*serial_fraction));
        break;
    }
  }

  result.event_log = log.str();
  result.metrics = metrics.str();
  return result;
}

}  // namespace pvm::sim

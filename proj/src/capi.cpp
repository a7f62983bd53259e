// extern-C surface of the portvm shared library. Opaque handles wrap
// the C++ core; every entry point catches and translates errors into
// status codes with a thread-local message.

#include <cstring>
#include <fstream>
#include <sstream>

#include "attest/capabilities.hpp"
#include "migrate/pipeline.hpp"
#include "migrate/tcp.hpp"
#include "portvm.h"
#include "sched/scheduler.hpp"
#include "sim/scenario.hpp"
#include "snapshot/snapshot.hpp"
#include "speculate/speculate.hpp"
#include "validate/gate.hpp"
#include "validate/metrics.hpp"
#include "vm/assembler.hpp"
#include "vm/interpreter.hpp"

using namespace pvm;

namespace {

thread_local std::string g_last_error = "ok";

pvm_status record_error(pvm_status code, const std::string& message) {
  g_last_error = message;
  return code;
}

template <typename Fn>
pvm_status guarded(Fn&& fn) {
  try {
    fn();
    return PVM_OK;
  } catch (const Error& e) {
    return record_error(e.code(), e.what());
  } catch (const std::exception& e) {
    return record_error(PVM_ERR_INTERNAL, e.what());
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::string require(const char* value, const char* what) {
  if (!value || !*value)
    fail(PVM_ERR_USAGE, std::string("missing required option: ") + what);
  return value;
}

Key32 key_from_hex_or_zero(const char* hex) {
  if (!hex || !*hex) return Key32{};
  return array_from_hex<32>(hex);
}

}  // namespace

struct pvm_module {
  std::shared_ptr<const vm::Module> module;
};

struct pvm_instance {
  vm::Instance instance;
};

struct pvm_state {
  vm::ExecutionState state;
};

extern "C" {

const char* pvm_version(void) { return "1.0.0"; }

const char* pvm_status_name(pvm_status status) { return status_name(status); }

const char* pvm_last_error(void) { return g_last_error.c_str(); }

void pvm_string_free(char* s) { std::free(s); }

/* ------------------------------------------------------------------ */
/* Modules and instances                                              */
/* ------------------------------------------------------------------ */

pvm_status pvm_assemble(const char* source, pvm_module** out) {
  return guarded([&] {
    auto module = std::make_shared<vm::Module>(
        vm::assemble(require(source, "source")));
    *out = new pvm_module{std::move(module)};
  });
}

pvm_status pvm_assemble_file(const char* path, pvm_module** out) {
  return guarded([&] {
    auto module = std::make_shared<vm::Module>(
        vm::assemble_file(require(path, "path")));
    *out = new pvm_module{std::move(module)};
  });
}

void pvm_module_free(pvm_module* m) { delete m; }

void pvm_module_measurement(const pvm_module* m, uint8_t out[32]) {
  Digest32 digest = m->module->measurement();
  std::memcpy(out, digest.data(), 32);
}

pvm_status pvm_instantiate(const pvm_module* m, pvm_policy policy,
                           pvm_instance** out) {
  return guarded([&] {
    *out = new pvm_instance{
        vm::Instance(m->module, static_cast<vm::PolicyMode>(policy))};
  });
}

pvm_status pvm_run(pvm_instance* inst, int64_t fuel, int stop_at_checkpoint,
                   pvm_run_outcome* out) {
  return guarded([&] {
    vm::RunOutcome outcome = inst->instance.run(
        fuel < 0 ? vm::kNoFuelLimit : static_cast<uint64_t>(fuel),
        stop_at_checkpoint != 0);
    out->kind = static_cast<pvm_outcome_kind>(outcome.kind);
    out->value = outcome.value;
    out->function = outcome.position.function;
    out->offset = outcome.position.offset;
    out->trap = outcome.kind == vm::RunOutcome::Kind::Trap
                    ? vm::trap_name(outcome.trap)
                    : "";
  });
}

pvm_status pvm_capture(pvm_instance* inst, pvm_state** out) {
  return guarded([&] { *out = new pvm_state{inst->instance.capture()}; });
}

pvm_status pvm_restore(const pvm_module* m, const pvm_state* s,
                       pvm_policy policy, pvm_instance** out) {
  return guarded([&] {
    *out = new pvm_instance{vm::Instance::restore(
        m->module, s->state, static_cast<vm::PolicyMode>(policy))};
  });
}

uint64_t pvm_steps_executed(const pvm_instance* inst) {
  return inst->instance.steps_executed();
}

void pvm_instance_free(pvm_instance* inst) { delete inst; }

/* ------------------------------------------------------------------ */
/* Snapshots                                                          */
/* ------------------------------------------------------------------ */

void pvm_state_free(pvm_state* s) { delete s; }

void pvm_state_digest(const pvm_state* s, uint8_t out[32]) {
  Digest32 digest = s->state.digest();
  std::memcpy(out, digest.data(), 32);
}

static void write_file(const std::string& path, ByteView data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(PVM_ERR_IO, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size()));
  if (!out) fail(PVM_ERR_IO, "short write to " + path);
}

static Bytes read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(PVM_ERR_IO, "cannot read " + path);
  return Bytes((std::istreambuf_iterator<char>(in)),
               std::istreambuf_iterator<char>());
}

pvm_status pvm_snapshot_save(const pvm_state* s, const uint8_t key[32],
                             const char* path) {
  return guarded([&] {
    Key32 k;
    std::memcpy(k.data(), key, 32);
    write_file(require(path, "path"), snapshot::encode(s->state, k));
  });
}

pvm_status pvm_snapshot_load(const char* path, const uint8_t key[32],
                             pvm_state** out) {
  return guarded([&] {
    Key32 k;
    std::memcpy(k.data(), key, 32);
    *out = new pvm_state{snapshot::decode(read_file(require(path, "path")), k)};
  });
}

pvm_status pvm_delta_save(const pvm_state* base, const pvm_state* target,
                          const uint8_t key[32], const char* path) {
  return guarded([&] {
    Key32 k;
    std::memcpy(k.data(), key, 32);
    write_file(require(path, "path"),
               snapshot::make_delta(base->state, target->state, k));
  });
}

pvm_status pvm_delta_apply(const pvm_state* base, const char* path,
                           const uint8_t key[32], pvm_state** out) {
  return guarded([&] {
    Key32 k;
    std::memcpy(k.data(), key, 32);
    *out = new pvm_state{snapshot::apply_delta(
        base->state, read_file(require(path, "path")), k)};
  });
}

/* ------------------------------------------------------------------ */
/* Identities and endpoints                                           */
/* ------------------------------------------------------------------ */

pvm_status pvm_keygen(const char* seed_hex, char** pub_hex_out,
                      char** node_id_hex_out) {
  return guarded([&] {
    attest::NodeIdentity identity(array_from_hex<32>(require(seed_hex, "seed")));
    if (pub_hex_out) {
      crypto::PubKey pub = identity.public_key();
      *pub_hex_out = dup_string(to_hex(ByteView(pub.data(), pub.size())));
    }
    if (node_id_hex_out) {
      Digest32 id = identity.node_id();
      *node_id_hex_out = dup_string(to_hex(ByteView(id.data(), id.size())));
    }
  });
}

void pvm_runtime_measurement(uint8_t out[32]) {
  attest::GlobalId id = attest::runtime_measurement();
  std::memcpy(out, id.data(), 32);
}

namespace {

struct EndpointInputs {
  const char* whitelist_path;
  const char* trust_keys_path;
  const char* identity_seed_hex;
  const char* caps;
  const char* required_caps;
  const char* measurement_hex;
};

// Owns everything an EndpointConfig points at.
struct EndpointBundle {
  std::unique_ptr<attest::NodeIdentity> identity;
  std::unique_ptr<attest::ReplayGuard> replay;
  migrate::EndpointConfig config;
};

EndpointBundle make_endpoint(const EndpointInputs& in) {
  EndpointBundle bundle;
  bundle.identity = in.identity_seed_hex && *in.identity_seed_hex
                        ? std::make_unique<attest::NodeIdentity>(
                              array_from_hex<32>(in.identity_seed_hex))
                        : std::make_unique<attest::NodeIdentity>();
  bundle.replay = std::make_unique<attest::ReplayGuard>();

  migrate::EndpointConfig& cfg = bundle.config;
  cfg.identity = bundle.identity.get();
  cfg.replay = bundle.replay.get();
  cfg.own_measurement = in.measurement_hex && *in.measurement_hex
                            ? array_from_hex<32>(in.measurement_hex)
                            : attest::runtime_measurement();

  std::ifstream wl(require(in.whitelist_path, "whitelist"));
  if (!wl) fail(PVM_ERR_IO, std::string("cannot read whitelist: ") + in.whitelist_path);
  std::string line;
  while (std::getline(wl, line)) {
    if (line.empty() || line[0] == '#') continue;
    cfg.policy.trusted_measurements.insert(array_from_hex<32>(line));
  }

  std::ifstream tk(require(in.trust_keys_path, "trust-keys"));
  if (!tk) fail(PVM_ERR_IO, std::string("cannot read trust keys: ") + in.trust_keys_path);
  while (std::getline(tk, line)) {
    if (line.empty() || line[0] == '#') continue;
    cfg.policy.trust_key(array_from_hex<crypto::kP256PubLen>(line));
  }
  // A node always trusts the key it signs with.
  cfg.policy.trust_key(bundle.identity->public_key());

  const auto& registry = attest::builtin_capabilities();
  cfg.advertised_entry_ids = attest::parse_entry_ids(
      in.caps && *in.caps ? in.caps : "1001,1002,1003", registry);
  if (in.required_caps && *in.required_caps)
    cfg.policy.required_entry_ids =
        attest::parse_entry_ids(in.required_caps, registry);
  return bundle;
}

}  // namespace

struct pvm_server {
  migrate::TcpListener listener;
  EndpointBundle endpoint;
  std::shared_ptr<const vm::Module> module;
  bool run_after_restore;

  pvm_server(const std::string& host, int port)
      : listener(host, port), run_after_restore(false) {}
};

pvm_status pvm_server_start(const pvm_serve_options* opts, pvm_server** out) {
  return guarded([&] {
    auto server = std::make_unique<pvm_server>(
        opts->host && *opts->host ? opts->host : "127.0.0.1", opts->port);
    server->endpoint = make_endpoint(
        {opts->whitelist_path, opts->trust_keys_path, opts->identity_seed_hex,
         opts->caps, opts->required_caps, opts->measurement_hex});
    server->module = std::make_shared<vm::Module>(
        vm::assemble_file(require(opts->module_path, "module")));
    server->run_after_restore = opts->run_after_restore != 0;
    *out = server.release();
  });
}

int pvm_server_port(const pvm_server* srv) { return srv->listener.port(); }

pvm_status pvm_server_serve_once(pvm_server* srv, char** report_out) {
  return guarded([&] {
    auto stream = srv->listener.accept();
    migrate::ServeResult result =
        migrate::serve_once(*stream, srv->endpoint.config, srv->module);
    std::ostringstream report;
    Digest32 peer_gid = result.peer.global_id;
    report << "received " << result.blob_bytes << " bytes from node "
           << to_hex(ByteView(result.peer.node_id.data(), 8)) << " (measurement "
           << to_hex(ByteView(peer_gid.data(), 8)) << "...), refreshes "
           << result.refreshes << "\n";
    if (srv->run_after_restore && result.instance) {
      vm::RunOutcome outcome = result.instance->run();
      if (outcome.kind == vm::RunOutcome::Kind::Halted)
        report << "resumed to completion: " << outcome.value << "\n";
      else
        report << "resumed and trapped: " << vm::trap_name(outcome.trap) << "\n";
    }
    if (report_out) *report_out = dup_string(report.str());
  });
}

void pvm_server_free(pvm_server* srv) { delete srv; }

pvm_status pvm_migrate(const pvm_migrate_options* opts,
                       char** stage_report_out) {
  return guarded([&] {
    EndpointBundle endpoint = make_endpoint(
        {opts->whitelist_path, opts->trust_keys_path, opts->identity_seed_hex,
         opts->caps, opts->required_caps, opts->measurement_hex});
    auto module = std::make_shared<vm::Module>(
        vm::assemble_file(require(opts->module_path, "module")));

    vm::PolicyMode policy = static_cast<vm::PolicyMode>(opts->policy);
    std::optional<vm::Instance> instance;
    migrate::MigrateOptions moptions;
    if (opts->refresh_interval_s > 0)
      moptions.refresh_interval_s =
          static_cast<uint64_t>(opts->refresh_interval_s);

    if (opts->snapshot_path && *opts->snapshot_path) {
      Key32 key = key_from_hex_or_zero(opts->key_hex);
      vm::ExecutionState state =
          snapshot::decode(read_file(opts->snapshot_path), key);
      instance.emplace(vm::Instance::restore(module, state, policy));
      moptions.storage_key = key;
    } else {
      // Live mode: run the workload to its next stable point first.
      instance.emplace(module, policy);
      vm::RunOutcome outcome = instance->run(vm::kNoFuelLimit, true);
      if (outcome.kind != vm::RunOutcome::Kind::CheckpointReached)
        fail(PVM_ERR_NOT_AT_STABLE_POINT,
             "workload finished before reaching a stable point");
    }

    std::unique_ptr<migrate::ByteStream> stream = migrate::tcp_connect(
        opts->host && *opts->host ? opts->host : "127.0.0.1", opts->port);
    migrate::MigrationOutcome outcome =
        migrate::migrate_instance(*instance, *stream, endpoint.config, moptions);
    std::ostringstream report;
    report << outcome.report.stage_table();
    report << "  remote state digest "
           << to_hex(ByteView(outcome.remote_state_digest.data(), 8)) << "...\n";
    if (stage_report_out) *stage_report_out = dup_string(report.str());
  });
}

/* ------------------------------------------------------------------ */
/* Scheduler                                                          */
/* ------------------------------------------------------------------ */

pvm_status pvm_decide(const pvm_decide_options* opts, char** report_out,
                      int* migrate_out) {
  return guarded([&] {
    sched::LabelRegistry registry =
        opts->labels_path && *opts->labels_path
            ? sched::load_labels(opts->labels_path)
            : sched::builtin_labels();
    std::set<std::string> labels;
    if (opts->labels && *opts->labels) {
      std::istringstream in(opts->labels);
      std::string label;
      while (std::getline(in, label, ',')) labels.insert(label);
    }
    sched::WorkloadProfile profile;
    profile.t_local_s = opts->t_local_s;
    profile.t_remote_s = opts->t_remote_s;
    profile.snapshot_bytes = opts->snapshot_bytes;
    profile.bandwidth_bps = opts->bandwidth_bps > 0 ? opts->bandwidth_bps : 1e9;
    profile.sensitivity = sched::classify(labels, registry);
    profile.target_trust = opts->target_trusted
                               ? sched::TierTrust::TrustedEnclave
                               : sched::TierTrust::Untrusted;

    double migration_s = opts->migration_time_s;
    if (migration_s < 0) {
      sched::CalibrationTable calibration =
          opts->calibration_path && *opts->calibration_path
              ? sched::CalibrationTable::load(opts->calibration_path)
              : sched::CalibrationTable{};
      migration_s = sched::estimate_migration_time(profile, calibration);
    }
    sched::Placement placement = sched::decide(profile, migration_s);
    std::ostringstream report;
    report << "sensitivity: " << sched::sensitivity_name(profile.sensitivity)
           << "\n"
           << placement.describe();
    if (report_out) *report_out = dup_string(report.str());
    if (migrate_out)
      *migrate_out = placement.action == sched::Placement::Action::Migrate;
  });
}

pvm_status pvm_calibrate(const char* out_path, char** summary_out) {
  return guarded([&] {
    sched::CalibrationTable table = sched::measure_calibration();
    table.save(require(out_path, "out path"));
    std::ostringstream summary;
    summary << "calibration written to " << out_path << "\n";
    char line[160];
    std::snprintf(line, sizeof line,
                  "  checkpoint %.3g s/B, compress %.3g s/B, restore %.3g s/B\n",
                  table.checkpoint_s_per_byte, table.compress_s_per_byte,
                  table.restore_s_per_byte);
    summary << line;
    std::snprintf(line, sizeof line, "  measured compression ratio %.3f\n",
                  table.compression_ratio);
    summary << line;
    if (summary_out) *summary_out = dup_string(summary.str());
  });
}

/* ------------------------------------------------------------------ */
/* Harness                                                            */
/* ------------------------------------------------------------------ */

pvm_status pvm_simulate(const char* scenario_path, const char* event_log_path,
                        const char* metrics_path, char** summary_out) {
  return guarded([&] {
    sim::Scenario scenario = sim::parse_scenario(require(scenario_path, "scenario"));
    sim::SimResult result = sim::run_scenario(scenario);
    if (event_log_path && *event_log_path)
      write_file(event_log_path,
                 ByteView(reinterpret_cast<const uint8_t*>(result.event_log.data()),
                          result.event_log.size()));
    if (metrics_path && *metrics_path)
      write_file(metrics_path,
                 ByteView(reinterpret_cast<const uint8_t*>(result.metrics.data()),
                          result.metrics.size()));
    std::ostringstream summary;
    summary << result.event_log;
    if (!result.metrics.empty()) summary << "metrics:\n" << result.metrics;
    if (!result.passed()) {
      summary << "assertions failed:\n";
      for (const std::string& failure : result.assertion_failures)
        summary << "  " << failure << "\n";
      if (summary_out) *summary_out = dup_string(summary.str());
      fail(PVM_ERR_ASSERTION_FAILED,
           std::to_string(result.assertion_failures.size()) +
               " scenario assertion(s) failed");
    }
    summary << "all assertions passed\n";
    if (summary_out) *summary_out = dup_string(summary.str());
  });
}

pvm_status pvm_validate_corpus(const pvm_validate_options* opts,
                               char** table_out) {
  return guarded([&] {
    auto corpus = validate::load_corpus(require(opts->corpus_path, "corpus"));
    auto rules = opts->rules_dir && *opts->rules_dir
                     ? validate::load_rules(opts->rules_dir)
                     : validate::builtin_rules();
    auto metrics = validate::evaluate_corpus(corpus, rules);
    std::ostringstream out;
    out << validate::metrics_table(metrics);

    validate::StreamSpec stream;
    stream.gen_delay_s = (opts->gen_delay_ms > 0 ? opts->gen_delay_ms : 1.0) / 1e3;
    for (const auto& item : corpus)
      if (item.labels.empty() && item.text.find("ref:") == std::string::npos)
        stream.chunks.push_back(item.text);
    double cost_s =
        (opts->per_validator_cost_ms > 0 ? opts->per_validator_cost_ms : 0.3) / 1e3;
    auto parallel = validate::gate_stream(stream, rules,
                                          validate::GateMode::Parallel, cost_s);
    auto serial = validate::gate_stream(stream, rules,
                                        validate::GateMode::Serial, cost_s);
    char line[200];
    std::snprintf(line, sizeof line,
                  "gate overhead on %zu clean chunks: parallel %+.1f%% vs "
                  "serial %+.1f%% of the ungated run\n",
                  stream.chunks.size(), parallel.overhead_fraction * 100,
                  serial.overhead_fraction * 100);
    out << line;
    if (table_out) *table_out = dup_string(out.str());
  });
}

pvm_status pvm_speculate_bench(const pvm_specbench_options* opts,
                               char** table_out) {
  return guarded([&] {
    speculate::BenchConfig config =
        opts->config_path && *opts->config_path
            ? speculate::BenchConfig::load(opts->config_path)
            : speculate::BenchConfig::default_suite();
    if (opts->seed) config.seed = opts->seed;
    auto rows = speculate::run_benchmark(config);
    if (table_out) *table_out = dup_string(speculate::bench_table(rows));
  });
}

}  // extern "C"

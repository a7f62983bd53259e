// portvm command-line tool. Everything goes through the public C API in
// portvm.h; exit codes are pvm_status values (0 = success).

#include <cstdio>
#include <cstring>
#include <string>

#include "CLI11.hpp"
#include "portvm.h"

namespace {

int finish(pvm_status status) {
  if (status != PVM_OK)
    std::fprintf(stderr, "error: %s: %s\n", pvm_status_name(status),
                 pvm_last_error());
  return static_cast<int>(status);
}

void print_and_free(char* text) {
  if (!text) return;
  std::fputs(text, stdout);
  pvm_string_free(text);
}

bool parse_key(const std::string& hex, uint8_t out[32]) {
  if (hex.empty()) {
    std::memset(out, 0, 32);
    return true;
  }
  if (hex.size() != 64) return false;
  for (int i = 0; i < 32; i++) {
    auto nib = [&](char c) -> int {
      if (c >= '0' && c <= '9') return c - '0';
      if (c >= 'a' && c <= 'f') return c - 'a' + 10;
      if (c >= 'A' && c <= 'F') return c - 'A' + 10;
      return -1;
    };
    int hi = nib(hex[2 * i]), lo = nib(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) return false;
    out[i] = static_cast<uint8_t>((hi << 4) | lo);
  }
  return true;
}

void print_hex(const uint8_t* data, size_t n) {
  for (size_t i = 0; i < n; i++) std::printf("%02x", data[i]);
}

struct PolicyOption {
  std::string text = "loop";
  pvm_policy value() const {
    if (text == "function") return PVM_POLICY_FUNCTION;
    if (text == "explicit") return PVM_POLICY_EXPLICIT;
    return PVM_POLICY_LOOP;
  }
};

struct PeerOptions {
  std::string whitelist, trust_keys, identity_seed, caps, required_caps,
      measurement;

  void attach(CLI::App* cmd) {
    cmd->add_option("--whitelist", whitelist,
                    "file of trusted measurement hex lines")
        ->required();
    cmd->add_option("--trust-keys", trust_keys,
                    "file of trusted peer public key hex lines")
        ->required();
    cmd->add_option("--identity-seed", identity_seed,
                    "32-byte hex seed for this node's signing identity");
    cmd->add_option("--caps", caps,
                    "advertised capability ids (default 1001,1002,1003)");
    cmd->add_option("--require-caps", required_caps,
                    "capability ids the peer must advertise");
    cmd->add_option("--measurement-hex", measurement,
                    "override this node's reported measurement");
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"portvm - portable VM with checkpointed live migration"};
  app.require_subcommand(1);

  /* ------------------------- run ------------------------- */
  std::string run_module;
  PolicyOption run_policy;
  int64_t run_fuel = -1;
  auto* cmd_run = app.add_subcommand("run", "execute a module to completion");
  cmd_run->add_option("module", run_module, "assembly file")->required();
  cmd_run->add_option("--policy", run_policy.text, "function|loop|explicit");
  cmd_run->add_option("--fuel", run_fuel, "instruction budget (-1 unlimited)");

  /* ---------------------- checkpoint --------------------- */
  std::string cp_module, cp_out, cp_key;
  PolicyOption cp_policy;
  int cp_stops = 1;
  auto* cmd_checkpoint =
      app.add_subcommand("checkpoint", "capture a snapshot at a stable point");
  cmd_checkpoint->add_option("module", cp_module)->required();
  cmd_checkpoint->add_option("--out", cp_out, "snapshot file (.psnp)")->required();
  cmd_checkpoint->add_option("--policy", cp_policy.text, "function|loop|explicit");
  cmd_checkpoint->add_option("--key-hex", cp_key, "32-byte storage key (hex)");
  cmd_checkpoint->add_option("--stops", cp_stops,
                             "checkpoint number to capture at (default 1)");

  /* ------------------------ restore ----------------------- */
  std::string rs_snapshot, rs_module, rs_key;
  PolicyOption rs_policy;
  auto* cmd_restore =
      app.add_subcommand("restore", "resume a snapshot and run to completion");
  cmd_restore->add_option("snapshot", rs_snapshot)->required();
  cmd_restore->add_option("--module", rs_module)->required();
  cmd_restore->add_option("--policy", rs_policy.text, "function|loop|explicit");
  cmd_restore->add_option("--key-hex", rs_key, "32-byte storage key (hex)");

  /* ------------------------- serve ------------------------ */
  std::string sv_listen = "127.0.0.1", sv_module;
  int sv_port = 0;
  bool sv_once = false, sv_run = false;
  PeerOptions sv_peer;
  auto* cmd_serve =
      app.add_subcommand("serve", "accept attested migrations and restore them");
  cmd_serve->add_option("--listen", sv_listen, "bind address");
  cmd_serve->add_option("--port", sv_port, "port (0 = ephemeral)");
  cmd_serve->add_option("--module", sv_module, "expected workload module")
      ->required();
  cmd_serve->add_flag("--once", sv_once, "serve one migration and exit");
  cmd_serve->add_flag("--run", sv_run, "run the restored instance to completion");
  sv_peer.attach(cmd_serve);

  /* ------------------------ migrate ----------------------- */
  std::string mg_to = "127.0.0.1", mg_module, mg_snapshot, mg_key;
  int mg_port = 0;
  double mg_refresh = 0, mg_bandwidth = 0;
  PolicyOption mg_policy;
  PeerOptions mg_peer;
  auto* cmd_migrate =
      app.add_subcommand("migrate", "move a workload to a remote node");
  cmd_migrate->add_option("--to", mg_to, "target host");
  cmd_migrate->add_option("--port", mg_port, "target port")->required();
  cmd_migrate->add_option("--module", mg_module, "assembly file")->required();
  cmd_migrate->add_option("--snapshot", mg_snapshot,
                          "migrate this snapshot instead of live-checkpointing");
  cmd_migrate->add_option("--key-hex", mg_key, "storage key of --snapshot");
  cmd_migrate->add_option("--policy", mg_policy.text, "live checkpoint policy");
  cmd_migrate->add_option("--refresh-interval", mg_refresh,
                          "attestation refresh interval in seconds");
  cmd_migrate->add_option("--bandwidth", mg_bandwidth,
                          "reserved; the wire runs at link speed");
  mg_peer.attach(cmd_migrate);

  /* ------------------------- decide ----------------------- */
  double dc_local = 0, dc_remote = 0, dc_migration = -1, dc_bandwidth = 1e9;
  uint64_t dc_size = 0;
  std::string dc_labels, dc_labels_file, dc_calibration;
  bool dc_trusted = false;
  auto* cmd_decide =
      app.add_subcommand("decide", "evaluate the migrate/stay placement rule");
  cmd_decide->add_option("--t-local", dc_local, "local remaining seconds")
      ->required();
  cmd_decide->add_option("--t-remote", dc_remote, "remote remaining seconds")
      ->required();
  cmd_decide->add_option("--migration-time", dc_migration,
                         "migration time in seconds (estimated when absent)");
  cmd_decide->add_option("--size", dc_size, "snapshot size estimate in bytes");
  cmd_decide->add_option("--bandwidth", dc_bandwidth, "link bits/second");
  cmd_decide->add_option("--labels", dc_labels, "comma-separated data labels");
  cmd_decide->add_option("--labels-file", dc_labels_file, "label registry file");
  cmd_decide->add_option("--calibration", dc_calibration, "calibration table");
  cmd_decide->add_flag("--trusted-target", dc_trusted,
                       "target tier is a trusted enclave");

  /* ------------------------ simulate ---------------------- */
  std::string sim_scenario, sim_events, sim_metrics;
  auto* cmd_simulate =
      app.add_subcommand("simulate", "run a scenario file deterministically");
  cmd_simulate->add_option("scenario", sim_scenario)->required();
  cmd_simulate->add_option("--events", sim_events, "write the event log here");
  cmd_simulate->add_option("--metrics", sim_metrics, "write metrics here");

  /* ------------------------ calibrate --------------------- */
  std::string cal_out = "calibration.txt";
  auto* cmd_calibrate =
      app.add_subcommand("calibrate", "measure per-byte stage rates");
  cmd_calibrate->add_option("--out", cal_out, "output table path");

  /* ------------------------ validate ---------------------- */
  std::string va_corpus, va_rules;
  double va_cost = 0.3, va_gen = 1.0;
  auto* cmd_validate =
      app.add_subcommand("validate", "evaluate validators against a corpus");
  cmd_validate->add_option("--corpus", va_corpus, "labeled corpus file")
      ->required();
  cmd_validate->add_option("--rules", va_rules, "rules directory");
  cmd_validate->add_option("--cost-ms", va_cost, "synthetic validator cost");
  cmd_validate->add_option("--gen-ms", va_gen, "synthetic generation delay");

  /* --------------------- speculate-bench ------------------ */
  std::string sb_config;
  uint64_t sb_seed = 0;
  auto* cmd_specbench = app.add_subcommand(
      "speculate-bench", "run the dual-path speculation benchmark");
  cmd_specbench->add_option("--config", sb_config, "benchmark config file");
  cmd_specbench->add_option("--seed", sb_seed, "override the config seed");

  /* ------------------------- keygen ----------------------- */
  std::string kg_seed;
  auto* cmd_keygen =
      app.add_subcommand("keygen", "derive a node identity from a seed");
  cmd_keygen->add_option("--seed", kg_seed, "32-byte hex seed")->required();

  /* -------------------------- info ------------------------ */
  auto* cmd_info = app.add_subcommand("info", "print version and measurement");

  CLI11_PARSE(app, argc, argv);

  if (cmd_run->parsed()) {
    pvm_module* module = nullptr;
    pvm_status status = pvm_assemble_file(run_module.c_str(), &module);
    if (status != PVM_OK) return finish(status);
    pvm_instance* instance = nullptr;
    status = pvm_instantiate(module, run_policy.value(), &instance);
    if (status == PVM_OK) {
      pvm_run_outcome outcome{};
      status = pvm_run(instance, run_fuel, 0, &outcome);
      if (status == PVM_OK) {
        switch (outcome.kind) {
          case PVM_OUTCOME_HALTED:
            std::printf("%lld\n", static_cast<long long>(outcome.value));
            break;
          case PVM_OUTCOME_FUEL_EXHAUSTED:
            std::fprintf(stderr, "fuel exhausted at function %u offset %u\n",
                         outcome.function, outcome.offset);
            status = PVM_ERR_NOT_RUNNABLE;
            break;
          case PVM_OUTCOME_TRAP:
            std::fprintf(stderr, "trap: %s\n", outcome.trap);
            status = PVM_ERR_TRAP;
            break;
          default:
            break;
        }
      }
    }
    pvm_instance_free(instance);
    pvm_module_free(module);
    return finish(status);
  }

  if (cmd_checkpoint->parsed()) {
    uint8_t key[32];
    if (!parse_key(cp_key, key)) return finish(PVM_ERR_USAGE);
    pvm_module* module = nullptr;
    pvm_status status = pvm_assemble_file(cp_module.c_str(), &module);
    if (status != PVM_OK) return finish(status);
    pvm_instance* instance = nullptr;
    status = pvm_instantiate(module, cp_policy.value(), &instance);
    for (int i = 0; status == PVM_OK && i < cp_stops; i++) {
      pvm_run_outcome outcome{};
      status = pvm_run(instance, -1, 1, &outcome);
      if (status == PVM_OK && outcome.kind != PVM_OUTCOME_CHECKPOINT) {
        std::fprintf(stderr, "workload ended before checkpoint %d\n", i + 1);
        status = PVM_ERR_NOT_AT_STABLE_POINT;
      }
    }
    pvm_state* state = nullptr;
    if (status == PVM_OK) status = pvm_capture(instance, &state);
    if (status == PVM_OK)
      status = pvm_snapshot_save(state, key, cp_out.c_str());
    if (status == PVM_OK) {
      uint8_t digest[32];
      pvm_state_digest(state, digest);
      std::printf("snapshot written to %s (state ", cp_out.c_str());
      print_hex(digest, 8);
      std::printf("...)\n");
    }
    pvm_state_free(state);
    pvm_instance_free(instance);
    pvm_module_free(module);
    return finish(status);
  }

  if (cmd_restore->parsed()) {
    uint8_t key[32];
    if (!parse_key(rs_key, key)) return finish(PVM_ERR_USAGE);
    pvm_module* module = nullptr;
    pvm_status status = pvm_assemble_file(rs_module.c_str(), &module);
    if (status != PVM_OK) return finish(status);
    pvm_state* state = nullptr;
    status = pvm_snapshot_load(rs_snapshot.c_str(), key, &state);
    pvm_instance* instance = nullptr;
    if (status == PVM_OK)
      status = pvm_restore(module, state, rs_policy.value(), &instance);
    if (status == PVM_OK) {
      pvm_run_outcome outcome{};
      status = pvm_run(instance, -1, 0, &outcome);
      if (status == PVM_OK) {
        if (outcome.kind == PVM_OUTCOME_HALTED) {
          std::printf("%lld\n", static_cast<long long>(outcome.value));
        } else if (outcome.kind == PVM_OUTCOME_TRAP) {
          std::fprintf(stderr, "trap: %s\n", outcome.trap);
          status = PVM_ERR_TRAP;
        }
      }
    }
    pvm_instance_free(instance);
    pvm_state_free(state);
    pvm_module_free(module);
    return finish(status);
  }

  if (cmd_serve->parsed()) {
    pvm_serve_options options{};
    options.host = sv_listen.c_str();
    options.port = sv_port;
    options.module_path = sv_module.c_str();
    options.whitelist_path = sv_peer.whitelist.c_str();
    options.trust_keys_path = sv_peer.trust_keys.c_str();
    options.identity_seed_hex = sv_peer.identity_seed.c_str();
    options.caps = sv_peer.caps.c_str();
    options.required_caps = sv_peer.required_caps.c_str();
    options.measurement_hex = sv_peer.measurement.c_str();
    options.run_after_restore = sv_run ? 1 : 0;
    pvm_server* server = nullptr;
    pvm_status status = pvm_server_start(&options, &server);
    if (status != PVM_OK) return finish(status);
    std::printf("listening %s:%d\n", sv_listen.c_str(), pvm_server_port(server));
    std::fflush(stdout);
    do {
      char* report = nullptr;
      status = pvm_server_serve_once(server, &report);
      if (status == PVM_OK) {
        print_and_free(report);
        std::fflush(stdout);
      } else {
        std::fprintf(stderr, "transfer failed: %s: %s\n",
                     pvm_status_name(status), pvm_last_error());
      }
    } while (!sv_once);
    pvm_server_free(server);
    return finish(status);
  }

  if (cmd_migrate->parsed()) {
    pvm_migrate_options options{};
    options.host = mg_to.c_str();
    options.port = mg_port;
    options.module_path = mg_module.c_str();
    options.snapshot_path = mg_snapshot.empty() ? nullptr : mg_snapshot.c_str();
    options.key_hex = mg_key.c_str();
    options.policy = mg_policy.value();
    options.whitelist_path = mg_peer.whitelist.c_str();
    options.trust_keys_path = mg_peer.trust_keys.c_str();
    options.identity_seed_hex = mg_peer.identity_seed.c_str();
    options.caps = mg_peer.caps.c_str();
    options.required_caps = mg_peer.required_caps.c_str();
    options.measurement_hex = mg_peer.measurement.c_str();
    options.refresh_interval_s = mg_refresh;
    options.bandwidth_bps = mg_bandwidth;
    char* report = nullptr;
    pvm_status status = pvm_migrate(&options, &report);
    if (status == PVM_OK) print_and_free(report);
    return finish(status);
  }

  if (cmd_decide->parsed()) {
    pvm_decide_options options{};
    options.t_local_s = dc_local;
    options.t_remote_s = dc_remote;
    options.migration_time_s = dc_migration;
    options.snapshot_bytes = dc_size;
    options.bandwidth_bps = dc_bandwidth;
    options.labels = dc_labels.c_str();
    options.labels_path = dc_labels_file.c_str();
    options.calibration_path = dc_calibration.c_str();
    options.target_trusted = dc_trusted ? 1 : 0;
    char* report = nullptr;
    int migrate_flag = 0;
    pvm_status status = pvm_decide(&options, &report, &migrate_flag);
    if (status == PVM_OK) print_and_free(report);
    return finish(status);
  }

  if (cmd_simulate->parsed()) {
    char* summary = nullptr;
    pvm_status status = pvm_simulate(
        sim_scenario.c_str(), sim_events.empty() ? nullptr : sim_events.c_str(),
        sim_metrics.empty() ? nullptr : sim_metrics.c_str(), &summary);
    print_and_free(summary);
    return finish(status);
  }

  if (cmd_calibrate->parsed()) {
    char* summary = nullptr;
    pvm_status status = pvm_calibrate(cal_out.c_str(), &summary);
    if (status == PVM_OK) print_and_free(summary);
    return finish(status);
  }

  if (cmd_validate->parsed()) {
    pvm_validate_options options{};
    options.corpus_path = va_corpus.c_str();
    options.rules_dir = va_rules.c_str();
    options.per_validator_cost_ms = va_cost;
    options.gen_delay_ms = va_gen;
    char* table = nullptr;
    pvm_status status = pvm_validate_corpus(&options, &table);
    if (status == PVM_OK) print_and_free(table);
    return finish(status);
  }

  if (cmd_specbench->parsed()) {
    pvm_specbench_options options{};
    options.config_path = sb_config.empty() ? nullptr : sb_config.c_str();
    options.seed = sb_seed;
    char* table = nullptr;
    pvm_status status = pvm_speculate_bench(&options, &table);
    if (status == PVM_OK) print_and_free(table);
    return finish(status);
  }

  if (cmd_keygen->parsed()) {
    char* pub = nullptr;
    char* node_id = nullptr;
    pvm_status status = pvm_keygen(kg_seed.c_str(), &pub, &node_id);
    if (status == PVM_OK) {
      std::printf("public-key %s\nnode-id %s\n", pub, node_id);
      pvm_string_free(pub);
      pvm_string_free(node_id);
    }
    return finish(status);
  }

  if (cmd_info->parsed()) {
    uint8_t measurement[32];
    pvm_runtime_measurement(measurement);
    std::printf("portvm %s\nmeasurement ", pvm_version());
    print_hex(measurement, 32);
    std::printf("\n");
    return 0;
  }

  return finish(PVM_ERR_USAGE);
}

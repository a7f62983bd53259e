// Exercises the public C API through the shared library surface.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstring>
#include <string>
#include <thread>

#include "doctest.h"
#include "portvm.h"

static const char* kTinyProgram =
    ".func main 0 1\n"
    " const.i64 0\n local.set 0\n"
    "loop:\n"
    " local.get 0\n const.i64 1\n i64.add\n local.set 0\n"
    " local.get 0\n const.i64 5\n i64.lt_s\n br_if loop\n"
    " local.get 0\n halt\n.end\n";

TEST_CASE("version and status names") {
  CHECK(std::string(pvm_version()) == "1.0.0");
  CHECK(std::string(pvm_status_name(PVM_OK)) == "Ok");
  CHECK(std::string(pvm_status_name(PVM_ERR_MEASUREMENT_MISMATCH)) ==
        "MeasurementMismatch");
}

TEST_CASE("assemble, run, capture, snapshot, restore through handles") {
  pvm_module* module = nullptr;
  REQUIRE(pvm_assemble(kTinyProgram, &module) == PVM_OK);
  uint8_t measurement[32];
  pvm_module_measurement(module, measurement);

  pvm_instance* instance = nullptr;
  REQUIRE(pvm_instantiate(module, PVM_POLICY_LOOP, &instance) == PVM_OK);

  pvm_run_outcome outcome{};
  REQUIRE(pvm_run(instance, -1, 1, &outcome) == PVM_OK);
  REQUIRE(outcome.kind == PVM_OUTCOME_CHECKPOINT);

  pvm_state* state = nullptr;
  REQUIRE(pvm_capture(instance, &state) == PVM_OK);

  uint8_t key[32] = {1, 2, 3};
  std::string path = "/tmp/pvm_capi_test.psnp";
  REQUIRE(pvm_snapshot_save(state, key, path.c_str()) == PVM_OK);

  pvm_state* loaded = nullptr;
  REQUIRE(pvm_snapshot_load(path.c_str(), key, &loaded) == PVM_OK);
  uint8_t d1[32], d2[32];
  pvm_state_digest(state, d1);
  pvm_state_digest(loaded, d2);
  CHECK(std::memcmp(d1, d2, 32) == 0);

  pvm_instance* resumed = nullptr;
  REQUIRE(pvm_restore(module, loaded, PVM_POLICY_LOOP, &resumed) == PVM_OK);
  REQUIRE(pvm_run(resumed, -1, 0, &outcome) == PVM_OK);
  CHECK(outcome.kind == PVM_OUTCOME_HALTED);
  CHECK(outcome.value == 5);

  // Wrong key surfaces as an authentication failure with a message.
  uint8_t wrong[32] = {9};
  pvm_state* denied = nullptr;
  CHECK(pvm_snapshot_load(path.c_str(), wrong, &denied) ==
        PVM_ERR_AUTHENTICATION_FAILURE);
  CHECK(std::strlen(pvm_last_error()) > 0);

  pvm_instance_free(resumed);
  pvm_state_free(loaded);
  pvm_state_free(state);
  pvm_instance_free(instance);
  pvm_module_free(module);
}

TEST_CASE("error paths return status codes, not crashes") {
  pvm_module* module = nullptr;
  CHECK(pvm_assemble("garbage mnemonic soup", &module) == PVM_ERR_PARSE);
  CHECK(pvm_assemble_file("/nonexistent/path.pasm", &module) == PVM_ERR_IO);
}

TEST_CASE("keygen is deterministic per seed") {
  std::string seed(64, 'a');
  char *pub1 = nullptr, *id1 = nullptr, *pub2 = nullptr, *id2 = nullptr;
  REQUIRE(pvm_keygen(seed.c_str(), &pub1, &id1) == PVM_OK);
  REQUIRE(pvm_keygen(seed.c_str(), &pub2, &id2) == PVM_OK);
  CHECK(std::string(pub1) == pub2);
  CHECK(std::string(id1) == id2);
  CHECK(std::strlen(pub1) == 130);
  pvm_string_free(pub1);
  pvm_string_free(id1);
  pvm_string_free(pub2);
  pvm_string_free(id2);
}

TEST_CASE("decide reproduces the placement rule over the C surface") {
  pvm_decide_options options{};
  options.t_local_s = 45;
  options.t_remote_s = 15.5;
  options.migration_time_s = 9;
  options.labels = "telemetry";
  char* report = nullptr;
  int migrate_flag = -1;
  REQUIRE(pvm_decide(&options, &report, &migrate_flag) == PVM_OK);
  CHECK(migrate_flag == 1);
  CHECK(std::string(report).find("MIGRATE") != std::string::npos);
  pvm_string_free(report);

  options.labels = "medical-record";
  REQUIRE(pvm_decide(&options, &report, &migrate_flag) == PVM_OK);
  CHECK(migrate_flag == 0);
  CHECK(std::string(report).find("sensitivity") != std::string::npos);
  pvm_string_free(report);
}

TEST_CASE("server and migrate round-trip over the C API") {
  std::string wl = "/tmp/pvm_capi_wl.txt";
  std::string tk = "/tmp/pvm_capi_tk.txt";
  {
    uint8_t m[32];
    pvm_runtime_measurement(m);
    FILE* f = fopen(wl.c_str(), "w");
    for (int i = 0; i < 32; i++) fprintf(f, "%02x", m[i]);
    fprintf(f, "\n");
    fclose(f);
  }
  {
    char* pub_a = nullptr;
    char* pub_b = nullptr;
    std::string seed_a(64, '1'), seed_b(64, '2');
    REQUIRE(pvm_keygen(seed_a.c_str(), &pub_a, nullptr) == PVM_OK);
    REQUIRE(pvm_keygen(seed_b.c_str(), &pub_b, nullptr) == PVM_OK);
    FILE* f = fopen(tk.c_str(), "w");
    fprintf(f, "%s\n%s\n", pub_a, pub_b);
    fclose(f);
    pvm_string_free(pub_a);
    pvm_string_free(pub_b);
  }
  std::string module_path = std::string(PVM_SOURCE_DIR) +
                            "/fixtures/programs/sum10.pasm";
  std::string seed_a(64, '1'), seed_b(64, '2');

  pvm_serve_options serve_options{};
  serve_options.port = 0;
  serve_options.module_path = module_path.c_str();
  serve_options.whitelist_path = wl.c_str();
  serve_options.trust_keys_path = tk.c_str();
  serve_options.identity_seed_hex = seed_b.c_str();
  serve_options.run_after_restore = 1;
  pvm_server* server = nullptr;
  REQUIRE(pvm_server_start(&serve_options, &server) == PVM_OK);
  int port = pvm_server_port(server);
  REQUIRE(port > 0);

  char* serve_report = nullptr;
  pvm_status serve_status = PVM_ERR_INTERNAL;
  std::thread server_thread(
      [&] { serve_status = pvm_server_serve_once(server, &serve_report); });

  pvm_migrate_options migrate_options{};
  migrate_options.host = "127.0.0.1";
  migrate_options.port = port;
  migrate_options.module_path = module_path.c_str();
  migrate_options.policy = PVM_POLICY_LOOP;
  migrate_options.whitelist_path = wl.c_str();
  migrate_options.trust_keys_path = tk.c_str();
  migrate_options.identity_seed_hex = seed_a.c_str();
  migrate_options.required_caps = "1003";
  char* stage_report = nullptr;
  pvm_status migrate_status = pvm_migrate(&migrate_options, &stage_report);
  server_thread.join();

  CHECK(migrate_status == PVM_OK);
  CHECK(serve_status == PVM_OK);
  REQUIRE(stage_report != nullptr);
  CHECK(std::string(stage_report).find("transfer") != std::string::npos);
  REQUIRE(serve_report != nullptr);
  CHECK(std::string(serve_report).find("resumed to completion: 55") !=
        std::string::npos);
  pvm_string_free(stage_report);
  pvm_string_free(serve_report);
  pvm_server_free(server);
}

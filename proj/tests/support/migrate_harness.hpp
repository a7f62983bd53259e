#ifndef PVM_TESTS_MIGRATE_HARNESS_HPP
#define PVM_TESTS_MIGRATE_HARNESS_HPP

#include <atomic>
#include <functional>
#include <future>
#include <thread>

#include "migrate/pipeline.hpp"
#include "sim/transport.hpp"
#include "vm/assembler.hpp"

// Shared loopback plumbing for migration tests and the acceptance suite.
namespace pvm::testsupport {

using pvm::migrate::EndpointConfig;

struct TwoNodes {
  attest::NodeIdentity source_id;
  attest::NodeIdentity target_id;
  attest::ReplayGuard source_replay;
  attest::ReplayGuard target_replay;
  attest::GlobalId gid = attest::runtime_measurement();
  std::shared_ptr<std::atomic<uint64_t>> clock =
      std::make_shared<std::atomic<uint64_t>>(1'000'000);

  EndpointConfig config(bool source) {
    EndpointConfig c;
    c.identity = source ? &source_id : &target_id;
    c.replay = source ? &source_replay : &target_replay;
    c.policy.trusted_measurements.insert(gid);
    c.policy.trust_key(source_id.public_key());
    c.policy.trust_key(target_id.public_key());
    c.policy.required_entry_ids = {1003};
    c.advertised_entry_ids = {1001, 1003};
    c.own_measurement = gid;
    auto clk = clock;
    c.clock = [clk] { return clk->load(); };
    return c;
  }
};

struct LoopbackRun {
  std::optional<migrate::MigrationOutcome> outcome;  // set on success
  pvm_status migrate_error = PVM_OK;
  std::string migrate_message;
  std::optional<migrate::ServeResult> served;
  pvm_status serve_error = PVM_OK;
  uint64_t serve_kdf_count = 0;
};

// Runs serve_once on its own thread against one pipe end while
// migrate_instance runs on the caller's thread. Both ends are closed
// when either side finishes so nobody blocks forever.
inline LoopbackRun run_loopback(
    vm::Instance& instance, std::shared_ptr<const vm::Module> module,
    TwoNodes& nodes, migrate::ByteStream& source_end,
    migrate::ByteStream& target_end,
    const migrate::MigrateOptions& options = {},
    std::function<EndpointConfig(TwoNodes&)> target_config = {}) {
  LoopbackRun run;
  std::promise<void> served_done;
  std::thread server([&] {
    uint64_t kdf0 = migrate::testing::kdf_invocations().load();
    try {
      run.served = migrate::serve_once(
          target_end,
          target_config ? target_config(nodes) : nodes.config(false), module,
          instance.policy());
    } catch (const Error& e) {
      run.serve_error = e.code();
    } catch (const std::exception&) {
      run.serve_error = PVM_ERR_INTERNAL;
    }
    run.serve_kdf_count = migrate::testing::kdf_invocations().load() - kdf0;
    target_end.close();
    served_done.set_value();
  });
  try {
    run.outcome = migrate::migrate_instance(instance, source_end,
                                            nodes.config(true), options);
  } catch (const Error& e) {
    run.migrate_error = e.code();
    run.migrate_message = e.what();
  } catch (const std::exception& e) {
    run.migrate_error = PVM_ERR_INTERNAL;
    run.migrate_message = e.what();
  }
  source_end.close();
  served_done.get_future().wait();
  server.join();
  return run;
}

inline std::shared_ptr<const vm::Module> fixture_module(const std::string& name) {
  return std::make_shared<vm::Module>(
      vm::assemble_file(std::string(PVM_SOURCE_DIR) + "/fixtures/programs/" + name));
}

}  // namespace pvm::testsupport

#endif

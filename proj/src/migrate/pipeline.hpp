#ifndef PVM_MIGRATE_PIPELINE_HPP
#define PVM_MIGRATE_PIPELINE_HPP

#include "migrate/transfer.hpp"
#include "snapshot/snapshot.hpp"
#include "vm/interpreter.hpp"

namespace pvm::migrate {

// End-to-end pipeline: capture -> encode -> attested handshake ->
// chunked transfer -> remote restore -> acknowledgment. All-or-nothing:
// the local instance is marked migrated-away only once the activation
// message is on the wire, and the remote side activates only once it
// reads that message; any earlier failure leaves the source untouched.

struct MigrateOptions {
  uint64_t refresh_interval_s = kDefaultRefreshIntervalS;
  std::optional<Key32> storage_key;  // default: fresh random key
};

struct MigrationOutcome {
  TransferReport report;
  Digest32 remote_state_digest{};
};

MigrationOutcome migrate_instance(vm::Instance& instance, ByteStream& stream,
                                  const EndpointConfig& endpoint,
                                  const MigrateOptions& options = {});

struct ServeResult {
  std::optional<vm::Instance> instance;  // runnable only on full success
  attest::VerifiedIdentity peer;
  uint32_t refreshes = 0;
  uint64_t blob_bytes = 0;
};

// Accepts one attested snapshot transfer and restores it against
// `module`. The restored instance becomes runnable only after the
// sender's activation message arrives.
ServeResult serve_once(ByteStream& stream, const EndpointConfig& endpoint,
                       std::shared_ptr<const vm::Module> module,
                       vm::PolicyMode policy = vm::PolicyMode::Loop);

}  // namespace pvm::migrate

#endif

#ifndef PVM_MIGRATE_TRANSFER_HPP
#define PVM_MIGRATE_TRANSFER_HPP

#include <optional>

#include "migrate/session.hpp"

namespace pvm::migrate {

inline constexpr size_t kWireChunkLen = 1 << 20;  // matches snapshot chunks
inline constexpr uint64_t kDefaultRefreshIntervalS = 300;

struct TransferReport {
  uint32_t chunks_sent = 0;
  uint64_t bytes_on_wire = 0;
  std::vector<uint64_t> refresh_events;  // clock timestamps
  double checkpoint_s = 0;
  double compress_s = 0;
  double transfer_s = 0;
  double restore_ack_s = 0;
  double total_s = 0;

  std::string stage_table() const;
};

// Re-envelopes the blob bytes in 1 MiB wire chunks under the session
// keys; runs a REFRESH exchange whenever the interval elapses between
// chunks; finishes with a COMMIT carrying the whole-blob digest and
// waits for the receiver's received-ok. The optional storage key rides
// inside the encrypted NEGOTIATE so the receiver can open the blob.
void send_snapshot(Session& session, ByteView blob, const Digest32& blob_digest,
                   uint64_t refresh_interval_s, const std::optional<Key32>& storage_key,
                   TransferReport& report);

struct ReceivedSnapshot {
  Bytes blob;
  std::optional<Key32> storage_key;
  uint32_t refreshes = 0;
};

// Returns only after every chunk decrypted in order and the COMMIT
// digest matched; any failure aborts the peer and discards everything.
ReceivedSnapshot receive_snapshot(Session& session);

// COMMIT stage bytes shared by transfer and pipeline.
enum class CommitStage : uint8_t {
  TransferDigest = 0,
  ReceivedOk = 1,
  Restored = 2,
  Activate = 3,
};

}  // namespace pvm::migrate

#endif

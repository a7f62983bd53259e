#ifndef PVM_MIGRATE_SESSION_HPP
#define PVM_MIGRATE_SESSION_HPP

#include <atomic>
#include <functional>
#include <set>

#include "attest/quote.hpp"
#include "migrate/wire.hpp"

namespace pvm::migrate {

using ClockFn = std::function<uint64_t()>;  // seconds since epoch
uint64_t system_clock_seconds();

// Everything one endpoint needs to authenticate the channel: its signing
// identity, the policy the peer must satisfy, and the capability set and
// measurement it advertises about itself.
struct EndpointConfig {
  attest::NodeIdentity* identity = nullptr;
  attest::ReplayGuard* replay = nullptr;
  attest::VerificationPolicy policy;  // required_entry_ids = demands on peer
  std::set<uint32_t> advertised_entry_ids;
  attest::GlobalId own_measurement{};
  ClockFn clock = system_clock_seconds;
};

// Mutually attested channel. Quotes travel as first-class handshake
// messages; each side signs the digest of its ephemeral key-agreement
// value into its quote, binding the channel keys to the measurements.
// One AES-256-GCM key per direction, re-derived on every refresh.
class Session {
 public:
  enum class Role { Initiator, Responder };

  static Session initiate(ByteStream& stream, const EndpointConfig& config);
  static Session respond(ByteStream& stream, const EndpointConfig& config);

  // Encrypted application messages (strictly ordered per direction).
  void send(MsgType type, ByteView payload);
  WireFrame recv();
  void send_abort(pvm_status code, const std::string& reason);

  // Mid-transfer attestation refresh: fresh nonces, fresh quotes, fresh
  // key agreement; both directions rekey and the epoch advances.
  void refresh_as_initiator();
  void refresh_as_responder(ByteView phase1_payload);

  const attest::VerifiedIdentity& peer() const { return peer_; }
  Role role() const { return role_; }
  const Digest32& transcript_digest() const { return transcript_; }
  uint64_t established_at() const { return established_at_; }
  uint64_t last_refresh() const { return last_refresh_; }
  uint64_t now() const { return config_.clock(); }
  uint64_t bytes_written() const { return bytes_written_; }
  // True when an inbound message is already waiting (non-blocking).
  bool inbound_pending() const { return stream_->poll(); }
  uint32_t epoch() const { return epoch_; }

 private:
  Session(ByteStream& stream, const EndpointConfig& config, Role role)
      : stream_(&stream), config_(config), role_(role) {}

  void handshake();
  void derive_keys(const Key32& shared_secret, const Digest32& transcript,
                   const attest::GlobalId& initiator_gid,
                   const attest::GlobalId& responder_gid);
  void write_frame_counted(MsgType type, ByteView payload);
  [[noreturn]] void raise_peer_abort(ByteView payload);

  ByteStream* stream_;
  EndpointConfig config_;
  Role role_;
  attest::VerifiedIdentity peer_;
  attest::GlobalId peer_measurement_{};
  Digest32 transcript_{};
  Key32 send_key_{};
  Key32 recv_key_{};
  uint64_t send_seq_ = 0;
  uint64_t recv_seq_ = 0;
  uint32_t epoch_ = 0;
  uint64_t established_at_ = 0;
  uint64_t last_refresh_ = 0;
  uint64_t bytes_written_ = 0;
};

namespace testing {
// Counts session-key derivations; the no-key-before-verification
// property asserts this never moves on a failed handshake.
std::atomic<uint64_t>& kdf_invocations();
}  // namespace testing

}  // namespace pvm::migrate

#endif

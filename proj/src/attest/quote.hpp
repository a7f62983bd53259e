#ifndef PVM_ATTEST_QUOTE_HPP
#define PVM_ATTEST_QUOTE_HPP

#include <map>
#include <mutex>
#include <set>
#include <vector>

#include "support/crypto.hpp"

namespace pvm::attest {

// Measurement of the exact binary being attested (SHA-256).
using GlobalId = Digest32;

GlobalId measure(ByteView binary);

// Measurement this runtime reports for itself. Real deployments measure
// the enclave binary; the simulated root of trust pins a version string.
GlobalId runtime_measurement();

// A node's signing identity with its quote counter. Quote generation is
// serialized per identity.
class NodeIdentity {
 public:
  NodeIdentity() : key_(crypto::P256KeyPair::generate()) {}
  explicit NodeIdentity(const std::array<uint8_t, 32>& seed)
      : key_(crypto::P256KeyPair::from_seed(seed)) {}

  Digest32 node_id() const { return key_.key_id(); }
  crypto::PubKey public_key() const { return key_.public_key(); }
  uint64_t counter() const;

  struct QuoteRequest {
    GlobalId global_id;
    std::set<uint32_t> entry_ids;
    Digest32 nonce;            // verifier-supplied challenge
    Digest32 binding;          // digest of the ephemeral key-agreement value
    uint64_t now;              // seconds since epoch
    Digest32 next_quote_digest{};  // zero outside multi-hop chains
  };

  struct Quote;
  Quote generate_quote(const QuoteRequest& request);

 private:
  crypto::P256KeyPair key_;
  mutable std::mutex mutex_;
  uint64_t counter_ = 0;
};

// Signed claim of (measurement, capabilities, freshness, key binding) by
// a node identity. Wire encoding is fixed-order little-endian; the
// signature covers every preceding field.
struct NodeIdentity::Quote {
  Digest32 node_id;
  GlobalId global_id;
  std::vector<uint32_t> entry_ids;  // sorted ascending
  Digest32 nonce;
  uint64_t counter = 0;
  uint64_t timestamp = 0;
  Digest32 binding;
  Digest32 next_quote_digest;
  crypto::Signature signature;

  Bytes signed_payload() const;
  Bytes encode() const;
  static Quote decode(ByteView bytes);
  Digest32 digest() const;  // sha256 over encode(), links chain hops

  bool advertises(const std::set<uint32_t>& required) const;
};

using AttestationQuote = NodeIdentity::Quote;

struct VerificationPolicy {
  std::set<GlobalId> trusted_measurements;
  std::map<Digest32, crypto::PubKey> trusted_keys;  // node id -> public key
  uint64_t freshness_window_s = 300;
  std::set<uint32_t> required_entry_ids;

  void trust_key(const crypto::PubKey& pub);
};

// Per-verifier table of the highest counter seen per node. Shared across
// threads; check-and-update is atomic.
class ReplayGuard {
 public:
  // True if `counter` is strictly greater than anything seen for `node`;
  // records it. False means replay.
  bool advance(const Digest32& node, uint64_t counter);
  uint64_t last_seen(const Digest32& node) const;

 private:
  mutable std::mutex mutex_;
  std::map<Digest32, uint64_t> last_;
};

struct VerifiedIdentity {
  Digest32 node_id;
  GlobalId global_id;
  std::vector<uint32_t> entry_ids;
};

// All checks in order: signature, measurement whitelist, nonce,
// freshness window, counter monotonicity, required capabilities.
VerifiedIdentity verify_quote(const AttestationQuote& quote,
                              const VerificationPolicy& policy, uint64_t now,
                              const Digest32& expected_nonce,
                              ReplayGuard& replay);

// Ordered source-to-destination chain: each quote must verify and carry
// the digest of its successor. Errors are tagged with the hop index.
std::vector<VerifiedIdentity> verify_chain(
    const std::vector<AttestationQuote>& quotes,
    const VerificationPolicy& policy, uint64_t now,
    const std::vector<Digest32>& expected_nonces, ReplayGuard& replay);

}  // namespace pvm::attest

#endif

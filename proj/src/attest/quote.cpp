#include "attest/quote.hpp"

#include <algorithm>

namespace pvm::attest {

GlobalId measure(ByteView binary) { return crypto::sha256(binary); }

GlobalId runtime_measurement() {
  static const char kRuntimeId[] = "portvm runtime v1";
  return measure(ByteView(reinterpret_cast<const uint8_t*>(kRuntimeId),
                          sizeof(kRuntimeId) - 1));
}

uint64_t NodeIdentity::counter() const {
  std::lock_guard lock(mutex_);
  return counter_;
}

NodeIdentity::Quote NodeIdentity::generate_quote(const QuoteRequest& request) {
  Quote q;
  q.node_id = node_id();
  q.global_id = request.global_id;
  q.entry_ids.assign(request.entry_ids.begin(), request.entry_ids.end());
  std::sort(q.entry_ids.begin(), q.entry_ids.end());
  q.nonce = request.nonce;
  q.timestamp = request.now;
  q.binding = request.binding;
  q.next_quote_digest = request.next_quote_digest;
  {
    std::lock_guard lock(mutex_);
    q.counter = ++counter_;
  }
  q.signature = key_.sign_digest(crypto::sha256(q.signed_payload()));
  return q;
}

Bytes NodeIdentity::Quote::signed_payload() const {
  ByteWriter w;
  w.raw(node_id.data(), node_id.size());
  w.raw(global_id.data(), global_id.size());
  w.u32(static_cast<uint32_t>(entry_ids.size()));
  for (uint32_t id : entry_ids) w.u32(id);
  w.raw(nonce.data(), nonce.size());
  w.u64(counter);
  w.u64(timestamp);
  w.raw(binding.data(), binding.size());
  w.raw(next_quote_digest.data(), next_quote_digest.size());
  return w.take();
}

Bytes NodeIdentity::Quote::encode() const {
  Bytes out = signed_payload();
  out.insert(out.end(), signature.begin(), signature.end());
  return out;
}

NodeIdentity::Quote NodeIdentity::Quote::decode(ByteView bytes) {
  ByteReader r(bytes, PVM_ERR_BAD_SIGNATURE);
  Quote q;
  q.node_id = r.arr<32>();
  q.global_id = r.arr<32>();
  uint32_t n = r.u32();
  if (static_cast<uint64_t>(n) * 4 > r.remaining())
    fail(PVM_ERR_BAD_SIGNATURE, "quote entry id count overruns input");
  q.entry_ids.reserve(n);
  for (uint32_t i = 0; i < n; i++) q.entry_ids.push_back(r.u32());
  q.nonce = r.arr<32>();
  q.counter = r.u64();
  q.timestamp = r.u64();
  q.binding = r.arr<32>();
  q.next_quote_digest = r.arr<32>();
  q.signature = r.arr<crypto::kP256SigLen>();
  r.expect_done();
  return q;
}

Digest32 NodeIdentity::Quote::digest() const { return crypto::sha256(encode()); }

bool NodeIdentity::Quote::advertises(const std::set<uint32_t>& required) const {
  return std::all_of(required.begin(), required.end(), [&](uint32_t id) {
    return std::binary_search(entry_ids.begin(), entry_ids.end(), id);
  });
}

void VerificationPolicy::trust_key(const crypto::PubKey& pub) {
  trusted_keys[crypto::sha256(ByteView(pub.data(), pub.size()))] = pub;
}

bool ReplayGuard::advance(const Digest32& node, uint64_t counter) {
  std::lock_guard lock(mutex_);
  uint64_t& last = last_[node];
  if (counter <= last) return false;
  last = counter;
  return true;
}

uint64_t ReplayGuard::last_seen(const Digest32& node) const {
  std::lock_guard lock(mutex_);
  auto it = last_.find(node);
  return it == last_.end() ? 0 : it->second;
}

VerifiedIdentity verify_quote(const AttestationQuote& quote,
                              const VerificationPolicy& policy, uint64_t now,
                              const Digest32& expected_nonce,
                              ReplayGuard& replay) {
  auto key_it = policy.trusted_keys.find(quote.node_id);
  if (key_it == policy.trusted_keys.end())
    fail(PVM_ERR_BAD_SIGNATURE, "quote signer is not a trusted node");
  if (!crypto::p256_verify(key_it->second,
                           crypto::sha256(quote.signed_payload()),
                           quote.signature))
    fail(PVM_ERR_BAD_SIGNATURE, "quote signature does not verify");

  if (!policy.trusted_measurements.count(quote.global_id))
    fail(PVM_ERR_UNKNOWN_MEASUREMENT,
         "quote measurement is not in the whitelist");

  if (quote.nonce != expected_nonce)
    fail(PVM_ERR_NONCE_MISMATCH, "quote answers a different challenge");

  // Literal window: now - timestamp must not exceed the freshness bound.
  if (now > quote.timestamp &&
      now - quote.timestamp > policy.freshness_window_s)
    fail(PVM_ERR_STALE_QUOTE,
         "quote is " + std::to_string(now - quote.timestamp) +
             "s old, window is " + std::to_string(policy.freshness_window_s) +
             "s");

  if (!replay.advance(quote.node_id, quote.counter))
    fail(PVM_ERR_COUNTER_REPLAY, "quote counter was already seen");

  if (!quote.advertises(policy.required_entry_ids))
    fail(PVM_ERR_CAPABILITY_MISMATCH,
         "quote lacks a required capability entry id");

  return {quote.node_id, quote.global_id, quote.entry_ids};
}

std::vector<VerifiedIdentity> verify_chain(
    const std::vector<AttestationQuote>& quotes,
    const VerificationPolicy& policy, uint64_t now,
    const std::vector<Digest32>& expected_nonces, ReplayGuard& replay) {
  if (quotes.empty()) fail(PVM_ERR_BROKEN_LINK, "empty chain", 0);
  if (quotes.size() != expected_nonces.size())
    fail(PVM_ERR_BROKEN_LINK, "one nonce per hop required", 0);

  std::vector<VerifiedIdentity> path;
  path.reserve(quotes.size());
  for (size_t hop = 0; hop < quotes.size(); hop++) {
    try {
      path.push_back(
          verify_quote(quotes[hop], policy, now, expected_nonces[hop], replay));
    } catch (const Error& e) {
      fail(e.code(), "hop " + std::to_string(hop) + ": " + e.what(),
           static_cast<long>(hop));
    }
    if (hop + 1 < quotes.size() &&
        quotes[hop].next_quote_digest != quotes[hop + 1].digest())
      fail(PVM_ERR_BROKEN_LINK,
           "hop " + std::to_string(hop) + " does not endorse its successor",
           static_cast<long>(hop));
  }
  return path;
}

}  // namespace pvm::attest

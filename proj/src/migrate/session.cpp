#include "migrate/session.hpp"

#include <chrono>
#include <cstring>

namespace pvm::migrate {

namespace {

constexpr uint16_t kProtocolVersion = 1;

ByteView sv(const char* s) {
  return ByteView(reinterpret_cast<const uint8_t*>(s), std::strlen(s));
}

struct Hello {
  uint16_t version;
  Digest32 nonce;
  crypto::PubKey eph;

  Bytes encode() const {
    ByteWriter w;
    w.u16(version);
    w.raw(nonce.data(), nonce.size());
    w.raw(eph.data(), eph.size());
    return w.take();
  }
  static Hello decode(ByteView payload) {
    ByteReader r(payload, PVM_ERR_VERIFICATION_FAILED);
    Hello h;
    h.version = r.u16();
    h.nonce = r.arr<32>();
    h.eph = r.arr<crypto::kP256PubLen>();
    r.expect_done();
    if (h.version != kProtocolVersion)
      fail(PVM_ERR_VERIFICATION_FAILED, "peer speaks a different version");
    return h;
  }
};

Digest32 binding_of(const crypto::PubKey& eph) {
  return crypto::sha256(ByteView(eph.data(), eph.size()));
}

Digest32 confirm_mac(const Key32& key, Session::Role role,
                     const Digest32& transcript) {
  ByteWriter w;
  w.raw(sv(role == Session::Role::Initiator ? "confirm:init" : "confirm:resp"));
  w.raw(transcript.data(), transcript.size());
  return crypto::hmac_sha256(key, w.data());
}

}  // namespace

uint64_t system_clock_seconds() {
  return static_cast<uint64_t>(std::chrono::duration_cast<std::chrono::seconds>(
                                   std::chrono::system_clock::now()
                                       .time_since_epoch())
                                   .count());
}

namespace testing {
std::atomic<uint64_t>& kdf_invocations() {
  // Thread-local: each endpoint runs on its own thread, so a failing
  // endpoint can assert that it, specifically, derived nothing.
  thread_local std::atomic<uint64_t> count{0};
  return count;
}
}  // namespace testing

void Session::write_frame_counted(MsgType type, ByteView payload) {
  bytes_written_ += payload.size() + 5;
  write_frame(*stream_, type, payload);
}

void Session::derive_keys(const Key32& shared_secret, const Digest32& transcript,
                          const attest::GlobalId& initiator_gid,
                          const attest::GlobalId& responder_gid) {
  testing::kdf_invocations()++;
  ByteWriter info;
  info.raw(sv("pvm/1 session"));
  info.raw(initiator_gid.data(), initiator_gid.size());
  info.raw(responder_gid.data(), responder_gid.size());
  Bytes okm = crypto::hkdf_sha256(shared_secret, transcript, info.data(), 64);
  Key32 i2r, r2i;
  std::memcpy(i2r.data(), okm.data(), 32);
  std::memcpy(r2i.data(), okm.data() + 32, 32);
  send_key_ = role_ == Role::Initiator ? i2r : r2i;
  recv_key_ = role_ == Role::Initiator ? r2i : i2r;
  send_seq_ = recv_seq_ = 0;
}

void Session::raise_peer_abort(ByteView payload) {
  ByteReader r(payload, PVM_ERR_PEER_ABORT);
  pvm_status code = static_cast<pvm_status>(r.u8());
  std::string reason = r.remaining() ? r.str() : "";
  if (std::strcmp(status_name(code), "Unknown") == 0) code = PVM_ERR_PEER_ABORT;
  fail(code, "peer abort: " + reason);
}

void Session::handshake() {
  const EndpointConfig& cfg = config_;
  crypto::P256KeyPair eph = crypto::P256KeyPair::generate();
  Digest32 my_nonce = crypto::random_digest();

  Hello mine{kProtocolVersion, my_nonce, eph.public_key()};
  Hello theirs{};
  crypto::Sha256Stream transcript;

  auto absorb = [&](MsgType type, ByteView payload) {
    ByteWriter w;
    w.u32(static_cast<uint32_t>(payload.size() + 1));
    w.u8(static_cast<uint8_t>(type));
    w.raw(payload);
    transcript.update(w.data());
  };
  auto send_hs = [&](MsgType type, ByteView payload) {
    absorb(type, payload);
    write_frame_counted(type, payload);
  };
  auto recv_hs = [&](MsgType expect) {
    WireFrame frame = read_frame(*stream_);
    if (frame.type == MsgType::Abort) raise_peer_abort(frame.payload);
    if (frame.type != expect)
      fail(PVM_ERR_VERIFICATION_FAILED,
           std::string("expected ") + msg_type_name(expect) + ", got " +
               msg_type_name(frame.type));
    absorb(frame.type, frame.payload);
    return frame;
  };

  // Nonce and ephemeral exchange.
  if (role_ == Role::Initiator) {
    send_hs(MsgType::Hello, mine.encode());
    theirs = Hello::decode(recv_hs(MsgType::Hello).payload);
  } else {
    theirs = Hello::decode(recv_hs(MsgType::Hello).payload);
    send_hs(MsgType::Hello, mine.encode());
  }

  auto make_quote = [&] {
    return cfg.identity->generate_quote({cfg.own_measurement,
                                         cfg.advertised_entry_ids,
                                         theirs.nonce,
                                         binding_of(mine.eph),
                                         cfg.clock(),
                                         {}});
  };
  auto check_peer_quote = [&](const attest::AttestationQuote& quote) {
    try {
      peer_ = attest::verify_quote(quote, cfg.policy, cfg.clock(), my_nonce,
                                   *cfg.replay);
    } catch (const Error& e) {
      pvm_status code = e.code();
      // Capability and freshness failures keep their identity; the rest
      // surface as a verification failure with the cause attached.
      if (code != PVM_ERR_CAPABILITY_MISMATCH && code != PVM_ERR_STALE_QUOTE)
        code = PVM_ERR_VERIFICATION_FAILED;
      send_abort(code, e.what());
      fail(code, std::string("peer quote rejected: ") + e.what());
    }
    if (quote.binding != binding_of(theirs.eph)) {
      send_abort(PVM_ERR_KEY_CONFIRM_FAILED, "quote binds a different key");
      fail(PVM_ERR_KEY_CONFIRM_FAILED,
           "peer quote binds a different key-agreement value");
    }
    peer_measurement_ = quote.global_id;
  };

  // Quote exchange. The responder inspects the initiator's quote before
  // revealing its own.
  if (role_ == Role::Initiator) {
    send_hs(MsgType::Quote, make_quote().encode());
    auto quote =
        attest::AttestationQuote::decode(recv_hs(MsgType::Quote).payload);
    check_peer_quote(quote);
  } else {
    auto quote =
        attest::AttestationQuote::decode(recv_hs(MsgType::Quote).payload);
    check_peer_quote(quote);
    send_hs(MsgType::Quote, make_quote().encode());
  }

  transcript_ = transcript.finish();
  const attest::GlobalId& init_gid =
      role_ == Role::Initiator ? cfg.own_measurement : peer_measurement_;
  const attest::GlobalId& resp_gid =
      role_ == Role::Initiator ? peer_measurement_ : cfg.own_measurement;
  auto derive_now = [&] {
    derive_keys(eph.ecdh(theirs.eph), transcript_, init_gid, resp_gid);
  };
  Role peer_role = role_ == Role::Initiator ? Role::Responder : Role::Initiator;
  auto check_confirm = [&](const WireFrame& frame) {
    Digest32 expect_mac = confirm_mac(recv_key_, peer_role, transcript_);
    if (frame.payload.size() != 32 ||
        std::memcmp(frame.payload.data(), expect_mac.data(), 32) != 0)
      fail(PVM_ERR_KEY_CONFIRM_FAILED, "peer failed key confirmation");
  };
  auto send_confirm = [&] {
    Digest32 my_mac = confirm_mac(send_key_, role_, transcript_);
    write_frame_counted(MsgType::KeyConfirm,
                        ByteView(my_mac.data(), my_mac.size()));
  };

  // Key confirmation. The initiator keys up once it has verified the
  // responder; the responder defers derivation until the initiator's
  // confirmation arrives, so a rejected handshake never keys it.
  if (role_ == Role::Initiator) {
    derive_now();
    send_confirm();
    WireFrame frame = read_frame(*stream_);
    if (frame.type == MsgType::Abort) raise_peer_abort(frame.payload);
    check_confirm(frame);
  } else {
    WireFrame frame = read_frame(*stream_);
    if (frame.type == MsgType::Abort) raise_peer_abort(frame.payload);
    derive_now();
    check_confirm(frame);
    send_confirm();
  }

  established_at_ = last_refresh_ = cfg.clock();
}

Session Session::initiate(ByteStream& stream, const EndpointConfig& config) {
  Session s(stream, config, Role::Initiator);
  s.handshake();
  return s;
}

Session Session::respond(ByteStream& stream, const EndpointConfig& config) {
  Session s(stream, config, Role::Responder);
  s.handshake();
  return s;
}

/* ------------------------------------------------------------------ */
/* Encrypted application messages                                     */
/* ------------------------------------------------------------------ */

namespace {

std::array<uint8_t, crypto::kGcmNonceLen> session_nonce(uint32_t epoch,
                                                        uint64_t seq) {
  std::array<uint8_t, crypto::kGcmNonceLen> nonce;
  for (int i = 0; i < 4; i++) nonce[i] = static_cast<uint8_t>(epoch >> (8 * i));
  for (int i = 0; i < 8; i++)
    nonce[4 + i] = static_cast<uint8_t>(seq >> (8 * i));
  return nonce;
}

Bytes session_aad(MsgType type, uint32_t epoch, uint64_t seq) {
  ByteWriter w;
  w.u8(static_cast<uint8_t>(type));
  w.u32(epoch);
  w.u64(seq);
  return w.take();
}

}  // namespace

void Session::send(MsgType type, ByteView payload) {
  auto nonce = session_nonce(epoch_, send_seq_);
  crypto::Sealed sealed = crypto::aead_seal(
      send_key_, nonce, session_aad(type, epoch_, send_seq_), payload);
  ByteWriter w;
  w.u32(epoch_);
  w.u64(send_seq_);
  w.raw(sealed.ciphertext);
  w.raw(sealed.tag.data(), sealed.tag.size());
  send_seq_++;
  write_frame_counted(type, w.data());
}

WireFrame Session::recv() {
  WireFrame frame = read_frame(*stream_);
  ByteReader r(frame.payload, PVM_ERR_INTEGRITY_FAILURE);
  uint32_t epoch = r.u32();
  uint64_t seq = r.u64();
  pvm_status tamper_code = frame.type == MsgType::Chunk
                               ? PVM_ERR_CHUNK_INTEGRITY_FAILURE
                               : PVM_ERR_INTEGRITY_FAILURE;
  if (epoch != epoch_ || seq != recv_seq_)
    fail(tamper_code, "message sequence mismatch");
  if (r.remaining() < crypto::kGcmTagLen)
    fail(tamper_code, "message too short");
  ByteView ct = r.raw(r.remaining() - crypto::kGcmTagLen);
  ByteView tag_view = r.raw(crypto::kGcmTagLen);
  std::array<uint8_t, crypto::kGcmTagLen> tag;
  std::memcpy(tag.data(), tag_view.data(), tag.size());
  auto opened =
      crypto::aead_open(recv_key_, session_nonce(epoch, seq),
                        session_aad(frame.type, epoch, seq), ct, tag);
  if (!opened) fail(tamper_code, "message failed authentication");
  recv_seq_++;
  WireFrame out;
  out.type = frame.type;
  out.payload = std::move(*opened);
  if (out.type == MsgType::Abort) raise_peer_abort(out.payload);
  return out;
}

void Session::send_abort(pvm_status code, const std::string& reason) {
  ByteWriter w;
  w.u8(static_cast<uint8_t>(code));
  w.str(reason);
  try {
    if (send_seq_ == 0 && epoch_ == 0 && established_at_ == 0) {
      // Still in the handshake: plaintext abort.
      write_frame_counted(MsgType::Abort, w.data());
    } else {
      send(MsgType::Abort, w.data());
    }
  } catch (const Error&) {
    // Peer already gone; the local error is what matters.
  }
}

/* ------------------------------------------------------------------ */
/* Attestation refresh                                                */
/* ------------------------------------------------------------------ */

namespace {

struct RefreshHello {
  Digest32 nonce;
  crypto::PubKey eph;
};

Bytes refresh_phase1(const RefreshHello& h) {
  ByteWriter w;
  w.u8(1);
  w.raw(h.nonce.data(), h.nonce.size());
  w.raw(h.eph.data(), h.eph.size());
  return w.take();
}

}  // namespace

void Session::refresh_as_initiator() {
  crypto::P256KeyPair eph = crypto::P256KeyPair::generate();
  Digest32 nonce = crypto::random_digest();
  Bytes p1 = refresh_phase1({nonce, eph.public_key()});
  send(MsgType::Refresh, p1);

  WireFrame frame = recv();
  if (frame.type != MsgType::Refresh)
    fail(PVM_ERR_REFRESH_FAILED, "unexpected message during refresh");
  ByteReader r(frame.payload, PVM_ERR_REFRESH_FAILED);
  if (r.u8() != 2) fail(PVM_ERR_REFRESH_FAILED, "bad refresh phase");
  Digest32 peer_nonce = r.arr<32>();
  crypto::PubKey peer_eph = r.arr<crypto::kP256PubLen>();
  auto quote = attest::AttestationQuote::decode(r.raw(r.remaining()));
  try {
    peer_ = attest::verify_quote(quote, config_.policy, config_.clock(), nonce,
                                 *config_.replay);
  } catch (const Error& e) {
    send_abort(PVM_ERR_REFRESH_FAILED, e.what());
    fail(PVM_ERR_REFRESH_FAILED, std::string("refresh quote rejected: ") + e.what());
  }
  if (quote.binding != binding_of(peer_eph)) {
    send_abort(PVM_ERR_REFRESH_FAILED, "refresh binding mismatch");
    fail(PVM_ERR_REFRESH_FAILED, "refresh quote binds a different key value");
  }

  auto my_quote = config_.identity->generate_quote(
      {config_.own_measurement, config_.advertised_entry_ids, peer_nonce,
       binding_of(eph.public_key()), config_.clock(), {}});
  ByteWriter p3;
  p3.u8(3);
  p3.raw(my_quote.encode());
  send(MsgType::Refresh, p3.data());

  // Rekey: fold the refresh exchange into the transcript.
  crypto::Sha256Stream t;
  t.update(ByteView(transcript_.data(), transcript_.size()));
  t.update(p1);
  t.update(frame.payload);
  t.update(p3.data());
  transcript_ = t.finish();
  Key32 shared = eph.ecdh(peer_eph);
  const attest::GlobalId& init_gid = role_ == Role::Initiator
                                         ? config_.own_measurement
                                         : peer_measurement_;
  const attest::GlobalId& resp_gid = role_ == Role::Initiator
                                         ? peer_measurement_
                                         : config_.own_measurement;
  derive_keys(shared, transcript_, init_gid, resp_gid);
  epoch_++;
  last_refresh_ = config_.clock();
}

void Session::refresh_as_responder(ByteView phase1_payload) {
  ByteReader r(phase1_payload, PVM_ERR_REFRESH_FAILED);
  if (r.u8() != 1) fail(PVM_ERR_REFRESH_FAILED, "bad refresh phase");
  Digest32 peer_nonce = r.arr<32>();
  crypto::PubKey peer_eph = r.arr<crypto::kP256PubLen>();
  r.expect_done();

  crypto::P256KeyPair eph = crypto::P256KeyPair::generate();
  Digest32 nonce = crypto::random_digest();
  auto my_quote = config_.identity->generate_quote(
      {config_.own_measurement, config_.advertised_entry_ids, peer_nonce,
       binding_of(eph.public_key()), config_.clock(), {}});
  ByteWriter p2;
  p2.u8(2);
  p2.raw(nonce.data(), nonce.size());
  p2.raw(eph.public_key().data(), crypto::kP256PubLen);
  p2.raw(my_quote.encode());
  send(MsgType::Refresh, p2.data());

  WireFrame frame = recv();
  if (frame.type != MsgType::Refresh)
    fail(PVM_ERR_REFRESH_FAILED, "unexpected message during refresh");
  ByteReader r3(frame.payload, PVM_ERR_REFRESH_FAILED);
  if (r3.u8() != 3) fail(PVM_ERR_REFRESH_FAILED, "bad refresh phase");
  auto quote = attest::AttestationQuote::decode(r3.raw(r3.remaining()));
  try {
    peer_ = attest::verify_quote(quote, config_.policy, config_.clock(), nonce,
                                 *config_.replay);
  } catch (const Error& e) {
    send_abort(PVM_ERR_REFRESH_FAILED, e.what());
    fail(PVM_ERR_REFRESH_FAILED, std::string("refresh quote rejected: ") + e.what());
  }
  if (quote.binding != binding_of(peer_eph))
    fail(PVM_ERR_REFRESH_FAILED, "refresh quote binds a different key value");

  crypto::Sha256Stream t;
  t.update(ByteView(transcript_.data(), transcript_.size()));
  t.update(phase1_payload);
  t.update(p2.data());
  t.update(frame.payload);
  transcript_ = t.finish();
  Key32 shared = eph.ecdh(peer_eph);
  const attest::GlobalId& init_gid = role_ == Role::Initiator
                                         ? config_.own_measurement
                                         : peer_measurement_;
  const attest::GlobalId& resp_gid = role_ == Role::Initiator
                                         ? peer_measurement_
                                         : config_.own_measurement;
  derive_keys(shared, transcript_, init_gid, resp_gid);
  epoch_++;
  last_refresh_ = config_.clock();
}

}  // namespace pvm::migrate

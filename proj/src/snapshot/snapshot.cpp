#include "snapshot/snapshot.hpp"

#include <cstring>

#include "support/crypto.hpp"
#include "vm/module.hpp"

namespace pvm::snapshot {

namespace {

constexpr char kMagic[4] = {'P', 'S', 'N', 'P'};
constexpr char kDeltaMagic[4] = {'P', 'D', 'L', 'T'};
constexpr size_t kHeaderLen = 4 + 2 + 1 + 1 + 32 + 4 + 8 + 8;

ByteView info_bytes(const char* s) {
  return ByteView(reinterpret_cast<const uint8_t*>(s), std::strlen(s));
}

// The chunk key is bound to the plaintext digest, so nonces may be a
// plain counter: no two blobs with different content share (key, nonce).
Key32 chunk_key(const Key32& key, const Digest32& plain_digest) {
  Bytes okm = crypto::hkdf_sha256(key, plain_digest, info_bytes("PSNP/1 chunk-key"), 32);
  Key32 out;
  std::memcpy(out.data(), okm.data(), 32);
  return out;
}

// Key-check value: AES-GCM is not key-committing, so without this a
// wrong key and a corrupted chunk would be indistinguishable.
std::array<uint8_t, 8> key_check(const Key32& key, const Digest32& plain_digest) {
  Bytes okm = crypto::hkdf_sha256(key, plain_digest, info_bytes("PSNP/1 kcv"), 8);
  std::array<uint8_t, 8> out;
  std::memcpy(out.data(), okm.data(), 8);
  return out;
}

std::array<uint8_t, crypto::kGcmNonceLen> chunk_nonce(uint32_t seq) {
  std::array<uint8_t, crypto::kGcmNonceLen> nonce{};
  for (int i = 0; i < 4; i++) nonce[i] = static_cast<uint8_t>(seq >> (8 * i));
  return nonce;
}

Bytes chunk_aad(ByteView header, uint32_t seq) {
  Bytes aad(header.begin(), header.end());
  for (int i = 0; i < 4; i++) aad.push_back(static_cast<uint8_t>(seq >> (8 * i)));
  return aad;
}

uint32_t chunk_count_for(uint64_t plain_len) {
  return static_cast<uint32_t>((plain_len + kChunkPlainLen - 1) / kChunkPlainLen);
}

}  // namespace

Bytes encode(const vm::ExecutionState& state, const Key32& key, Codec codec) {
  Bytes plain = state.serialize();
  Digest32 plain_digest = crypto::sha256(plain);
  Key32 enc_key = chunk_key(key, plain_digest);
  auto kcv = key_check(key, plain_digest);
  uint32_t chunks = chunk_count_for(plain.size());

  ByteWriter header;
  header.raw(kMagic, 4);
  header.u16(kFormatVersion);
  header.u8(static_cast<uint8_t>(codec));
  header.u8(static_cast<uint8_t>(Cipher::Aes256Gcm));
  header.raw(state.module_measurement.data(), 32);
  header.u32(chunks);
  header.u64(plain.size());
  header.raw(kcv.data(), kcv.size());
  Bytes out = header.take();

  for (uint32_t seq = 0; seq < chunks; seq++) {
    size_t begin = static_cast<size_t>(seq) * kChunkPlainLen;
    size_t len = std::min(kChunkPlainLen, plain.size() - begin);
    Bytes packed = compress(ByteView(plain.data() + begin, len), codec);
    auto nonce = chunk_nonce(seq);
    crypto::Sealed sealed = crypto::aead_seal(
        enc_key, nonce, chunk_aad(ByteView(out.data(), kHeaderLen), seq), packed);

    ByteWriter w;
    w.u32(seq);
    w.raw(nonce.data(), nonce.size());
    w.u32(static_cast<uint32_t>(sealed.ciphertext.size()));
    w.raw(sealed.ciphertext);
    w.raw(sealed.tag.data(), sealed.tag.size());
    Bytes rec = w.take();
    out.insert(out.end(), rec.begin(), rec.end());
  }

  out.insert(out.end(), plain_digest.begin(), plain_digest.end());
  return out;
}

BlobInfo inspect(ByteView blob) {
  ByteReader r(blob);
  auto magic = r.arr<4>();
  if (std::memcmp(magic.data(), kMagic, 4) != 0)
    fail(PVM_ERR_UNSUPPORTED_VERSION, "not a snapshot blob");
  BlobInfo info;
  info.version = r.u16();
  if (info.version != kFormatVersion)
    fail(PVM_ERR_UNSUPPORTED_VERSION,
         "unsupported snapshot version " + std::to_string(info.version));
  uint8_t codec = r.u8(), cipher = r.u8();
  if (codec != static_cast<uint8_t>(Codec::Deflate))
    fail(PVM_ERR_UNSUPPORTED_VERSION, "unsupported codec id");
  if (cipher != static_cast<uint8_t>(Cipher::Aes256Gcm))
    fail(PVM_ERR_UNSUPPORTED_VERSION, "unsupported cipher id");
  info.codec = static_cast<Codec>(codec);
  info.cipher = static_cast<Cipher>(cipher);
  info.module_measurement = r.arr<32>();
  info.chunk_count = r.u32();
  info.plaintext_len = r.u64();
  return info;
}

vm::ExecutionState decode(ByteView blob, const Key32& key) {
  BlobInfo info = inspect(blob);
  if (blob.size() < kHeaderLen) fail(PVM_ERR_TRUNCATED_BLOB, "short header");
  ByteView header = blob.subspan(0, kHeaderLen);

  ByteReader r(blob);
  r.raw(kHeaderLen - 8);
  auto stored_kcv = r.arr<8>();

  if (info.chunk_count != chunk_count_for(info.plaintext_len) ||
      info.chunk_count == 0)
    fail(PVM_ERR_TRUNCATED_BLOB, "chunk count does not match plaintext length");

  // Structural pass over all chunk records first.
  struct Rec {
    uint32_t seq;
    std::array<uint8_t, crypto::kGcmNonceLen> nonce;
    ByteView ct;
    std::array<uint8_t, crypto::kGcmTagLen> tag;
  };
  std::vector<Rec> records;
  records.reserve(info.chunk_count);
  for (uint32_t i = 0; i < info.chunk_count; i++) {
    Rec rec;
    rec.seq = r.u32();
    if (rec.seq != i)
      fail(PVM_ERR_INTEGRITY_FAILURE,
           "chunk sequence gap at record " + std::to_string(i), i);
    rec.nonce = r.arr<crypto::kGcmNonceLen>();
    uint32_t ct_len = r.u32();
    if (ct_len > r.remaining()) fail(PVM_ERR_TRUNCATED_BLOB, "chunk overruns blob");
    rec.ct = r.raw(ct_len);
    rec.tag = r.arr<crypto::kGcmTagLen>();
    records.push_back(rec);
  }
  if (r.remaining() != 32)
    fail(PVM_ERR_TRUNCATED_BLOB, "missing whole-snapshot digest");
  Digest32 stored_digest = r.arr<32>();

  // Authenticate the key before attributing failures to chunks.
  if (key_check(key, stored_digest) != stored_kcv)
    fail(PVM_ERR_AUTHENTICATION_FAILURE, "key check failed: wrong key");
  Key32 enc_key = chunk_key(key, stored_digest);

  Bytes plain;
  plain.reserve(info.plaintext_len);
  for (uint32_t i = 0; i < info.chunk_count; i++) {
    const Rec& rec = records[i];
    auto opened = crypto::aead_open(enc_key, rec.nonce, chunk_aad(header, i),
                                    rec.ct, rec.tag);
    if (!opened)
      fail(PVM_ERR_INTEGRITY_FAILURE,
           "chunk " + std::to_string(i) + " failed authentication", i);
    size_t begin = static_cast<size_t>(i) * kChunkPlainLen;
    size_t expect = std::min<uint64_t>(kChunkPlainLen, info.plaintext_len - begin);
    Bytes piece = decompress(*opened, expect, info.codec);
    plain.insert(plain.end(), piece.begin(), piece.end());
  }
  if (plain.size() != info.plaintext_len)
    fail(PVM_ERR_TRUNCATED_BLOB, "plaintext length mismatch");
  if (crypto::sha256(plain) != stored_digest)
    fail(PVM_ERR_INTEGRITY_FAILURE, "whole-snapshot digest mismatch");

  vm::ExecutionState state = vm::ExecutionState::deserialize(plain);
  if (state.module_measurement != info.module_measurement)
    fail(PVM_ERR_INTEGRITY_FAILURE, "header measurement mismatch");
  return state;
}

/* ------------------------------------------------------------------ */
/* Deltas                                                             */
/* ------------------------------------------------------------------ */

Bytes make_delta(const vm::ExecutionState& base,
                 const vm::ExecutionState& target, const Key32& key) {
  if (base.module_measurement != target.module_measurement)
    fail(PVM_ERR_MEASUREMENT_MISMATCH,
         "delta endpoints come from different modules");
  if (base.memory.size() != target.memory.size())
    fail(PVM_ERR_MALFORMED_STATE, "delta endpoints differ in memory size");

  Digest32 base_digest = base.digest();
  Bytes frames = target.serialize_non_memory();
  size_t pages = base.memory.size() / vm::kPageSize;

  std::vector<uint32_t> dirty;
  for (size_t p = 0; p < pages; p++) {
    const uint8_t* a = base.memory.data() + p * vm::kPageSize;
    const uint8_t* b = target.memory.data() + p * vm::kPageSize;
    if (std::memcmp(a, b, vm::kPageSize) != 0)
      dirty.push_back(static_cast<uint32_t>(p));
  }

  ByteWriter w;
  w.raw(kDeltaMagic, 4);
  w.u16(kFormatVersion);
  w.raw(base_digest.data(), 32);
  w.u64(target.memory.size());
  w.u32(static_cast<uint32_t>(frames.size()));
  w.raw(frames);
  w.u32(static_cast<uint32_t>(dirty.size()));
  for (uint32_t p : dirty) {
    w.u32(p);
    w.raw(target.memory.data() + static_cast<size_t>(p) * vm::kPageSize,
          vm::kPageSize);
  }
  Bytes out = w.take();
  Digest32 tag = crypto::hmac_sha256(key, out);
  out.insert(out.end(), tag.begin(), tag.end());
  return out;
}

namespace {

struct DeltaView {
  Digest32 base_digest;
  uint64_t mem_len;
  ByteView frames;
  std::vector<std::pair<uint32_t, ByteView>> pages;
};

DeltaView parse_delta(ByteView delta, bool check_tag, const Key32* key) {
  if (delta.size() < 32 + 4) fail(PVM_ERR_TRUNCATED_BLOB, "delta too short");
  if (check_tag) {
    ByteView body(delta.data(), delta.size() - 32);
    Digest32 tag = crypto::hmac_sha256(*key, body);
    if (std::memcmp(tag.data(), delta.data() + delta.size() - 32, 32) != 0)
      fail(PVM_ERR_INTEGRITY_FAILURE, "delta tag verification failed");
  }
  ByteReader r(ByteView(delta.data(), delta.size() - 32));
  auto magic = r.arr<4>();
  if (std::memcmp(magic.data(), kDeltaMagic, 4) != 0)
    fail(PVM_ERR_UNSUPPORTED_VERSION, "not a delta blob");
  if (r.u16() != kFormatVersion)
    fail(PVM_ERR_UNSUPPORTED_VERSION, "unsupported delta version");
  DeltaView v;
  v.base_digest = r.arr<32>();
  v.mem_len = r.u64();
  uint32_t frames_len = r.u32();
  if (frames_len > r.remaining()) fail(PVM_ERR_TRUNCATED_BLOB, "frames overrun");
  v.frames = r.raw(frames_len);
  uint32_t page_count = r.u32();
  uint64_t total_pages = v.mem_len / vm::kPageSize;
  int64_t prev = -1;
  for (uint32_t i = 0; i < page_count; i++) {
    uint32_t index = r.u32();
    if (static_cast<int64_t>(index) <= prev || index >= total_pages)
      fail(PVM_ERR_MALFORMED_STATE, "page indices not strictly increasing");
    prev = index;
    v.pages.emplace_back(index, r.raw(vm::kPageSize));
  }
  r.expect_done();
  return v;
}

}  // namespace

std::vector<uint32_t> delta_pages(ByteView delta) {
  DeltaView v = parse_delta(delta, false, nullptr);
  std::vector<uint32_t> out;
  out.reserve(v.pages.size());
  for (auto& [index, bytes] : v.pages) out.push_back(index);
  return out;
}

vm::ExecutionState apply_delta(const vm::ExecutionState& base, ByteView delta,
                               const Key32& key) {
  DeltaView v = parse_delta(delta, true, &key);
  if (v.base_digest != base.digest())
    fail(PVM_ERR_BASE_MISMATCH, "delta was built from a different base state");
  if (v.mem_len != base.memory.size())
    fail(PVM_ERR_MALFORMED_STATE, "delta memory size mismatch");

  // Reassemble the canonical encoding and reuse state validation.
  Bytes plain(v.frames.begin(), v.frames.end());
  ByteWriter w;
  w.u64(v.mem_len);
  Bytes len_bytes = w.take();
  plain.insert(plain.end(), len_bytes.begin(), len_bytes.end());
  size_t mem_at = plain.size();
  plain.insert(plain.end(), base.memory.begin(), base.memory.end());
  for (auto& [index, bytes] : v.pages)
    std::memcpy(plain.data() + mem_at + static_cast<size_t>(index) * vm::kPageSize,
                bytes.data(), vm::kPageSize);
  return vm::ExecutionState::deserialize(plain);
}

}  // namespace pvm::snapshot

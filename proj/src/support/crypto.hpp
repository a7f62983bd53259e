#ifndef PVM_SUPPORT_CRYPTO_HPP
#define PVM_SUPPORT_CRYPTO_HPP

#include <memory>
#include <optional>

#include "support/bytes.hpp"

// Thin wrappers over OpenSSL 3: SHA-256, HMAC, HKDF, AES-256-GCM, and
// P-256 signing / key agreement. Everything else in the tree stays free
// of OpenSSL types.

typedef struct evp_pkey_st EVP_PKEY;

namespace pvm::crypto {

Digest32 sha256(ByteView data);

class Sha256Stream {
 public:
  Sha256Stream();
  ~Sha256Stream();
  Sha256Stream(const Sha256Stream&) = delete;
  Sha256Stream& operator=(const Sha256Stream&) = delete;
  void update(ByteView data);
  Digest32 finish();

 private:
  void* ctx_;
};

Digest32 hmac_sha256(ByteView key, ByteView data);

Bytes hkdf_sha256(ByteView ikm, ByteView salt, ByteView info, size_t out_len);

void random_bytes(uint8_t* out, size_t n);
Digest32 random_digest();
Key32 random_key();

// ------------------------------------------------------------------
// AES-256-GCM
// ------------------------------------------------------------------

inline constexpr size_t kGcmNonceLen = 12;
inline constexpr size_t kGcmTagLen = 16;

struct Sealed {
  Bytes ciphertext;
  std::array<uint8_t, kGcmTagLen> tag;
};

Sealed aead_seal(const Key32& key, const std::array<uint8_t, kGcmNonceLen>& nonce,
                 ByteView aad, ByteView plaintext);

// Returns nullopt on tag verification failure.
std::optional<Bytes> aead_open(const Key32& key,
                               const std::array<uint8_t, kGcmNonceLen>& nonce,
                               ByteView aad, ByteView ciphertext,
                               std::span<const uint8_t, kGcmTagLen> tag);

// ------------------------------------------------------------------
// P-256
// ------------------------------------------------------------------

inline constexpr size_t kP256PubLen = 65;  // uncompressed SEC1 point
inline constexpr size_t kP256SigLen = 64;  // raw r || s

using PubKey = std::array<uint8_t, kP256PubLen>;
using Signature = std::array<uint8_t, kP256SigLen>;

class P256KeyPair {
 public:
  static P256KeyPair generate();
  // Deterministic keypair; the scalar is derived from the seed.
  static P256KeyPair from_seed(const std::array<uint8_t, 32>& seed);

  P256KeyPair(P256KeyPair&&) noexcept;
  P256KeyPair& operator=(P256KeyPair&&) noexcept;
  ~P256KeyPair();

  PubKey public_key() const;
  Digest32 key_id() const;  // sha256 of the public point

  Signature sign_digest(const Digest32& digest) const;
  Key32 ecdh(const PubKey& peer) const;

 private:
  explicit P256KeyPair(EVP_PKEY* key) : key_(key) {}
  EVP_PKEY* key_;
};

bool p256_verify(const PubKey& pub, const Digest32& digest,
                 const Signature& sig);

}  // namespace pvm::crypto

#endif

#include "support/crypto.hpp"

#include <openssl/core_names.h>
#include <openssl/ec.h>
#include <openssl/ecdsa.h>
#include <openssl/evp.h>
#include <openssl/kdf.h>
#include <openssl/param_build.h>
#include <openssl/rand.h>
#include <openssl/sha.h>

#include <cstring>

namespace pvm::crypto {

namespace {

[[noreturn]] void ossl_fail(const char* what) {
  fail(PVM_ERR_INTERNAL, std::string("openssl: ") + what);
}

struct BnFree {
  void operator()(BIGNUM* p) const { BN_free(p); }
};
struct PkeyCtxFree {
  void operator()(EVP_PKEY_CTX* p) const { EVP_PKEY_CTX_free(p); }
};
struct ParamBldFree {
  void operator()(OSSL_PARAM_BLD* p) const { OSSL_PARAM_BLD_free(p); }
};
struct ParamFree {
  void operator()(OSSL_PARAM* p) const { OSSL_PARAM_free(p); }
};
struct GroupFree {
  void operator()(EC_GROUP* p) const { EC_GROUP_free(p); }
};
struct PointFree {
  void operator()(EC_POINT* p) const { EC_POINT_free(p); }
};
struct CipherCtxFree {
  void operator()(EVP_CIPHER_CTX* p) const { EVP_CIPHER_CTX_free(p); }
};

// P-256 group order, for reducing seed-derived scalars.
const char* kP256Order =
    "ffffffff00000000ffffffffffffffffbce6faada7179e84f3b9cac2fc632551";

EVP_PKEY* pkey_from_parts(const BIGNUM* priv, ByteView pub_point) {
  std::unique_ptr<OSSL_PARAM_BLD, ParamBldFree> bld(OSSL_PARAM_BLD_new());
  if (!bld) ossl_fail("param_bld_new");
  if (!OSSL_PARAM_BLD_push_utf8_string(bld.get(), OSSL_PKEY_PARAM_GROUP_NAME,
                                       "prime256v1", 0))
    ossl_fail("push group");
  if (!pub_point.empty() &&
      !OSSL_PARAM_BLD_push_octet_string(bld.get(), OSSL_PKEY_PARAM_PUB_KEY,
                                        pub_point.data(), pub_point.size()))
    ossl_fail("push pub");
  if (priv && !OSSL_PARAM_BLD_push_BN(bld.get(), OSSL_PKEY_PARAM_PRIV_KEY, priv))
    ossl_fail("push priv");
  std::unique_ptr<OSSL_PARAM, ParamFree> params(
      OSSL_PARAM_BLD_to_param(bld.get()));
  if (!params) ossl_fail("to_param");

  std::unique_ptr<EVP_PKEY_CTX, PkeyCtxFree> ctx(
      EVP_PKEY_CTX_new_from_name(nullptr, "EC", nullptr));
  if (!ctx || EVP_PKEY_fromdata_init(ctx.get()) <= 0) ossl_fail("fromdata_init");
  EVP_PKEY* key = nullptr;
  int selection = priv ? EVP_PKEY_KEYPAIR : EVP_PKEY_PUBLIC_KEY;
  if (EVP_PKEY_fromdata(ctx.get(), &key, selection, params.get()) <= 0)
    ossl_fail("fromdata");
  return key;
}

EVP_PKEY* pkey_from_public(const PubKey& pub) {
  return pkey_from_parts(nullptr, ByteView(pub.data(), pub.size()));
}

}  // namespace

Digest32 sha256(ByteView data) {
  Digest32 out;
  SHA256(data.data(), data.size(), out.data());
  return out;
}

Sha256Stream::Sha256Stream() {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1)
    ossl_fail("sha256 init");
  ctx_ = ctx;
}

Sha256Stream::~Sha256Stream() {
  if (ctx_) EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_));
}

void Sha256Stream::update(ByteView data) {
  if (EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), data.data(),
                       data.size()) != 1)
    ossl_fail("sha256 update");
}

Digest32 Sha256Stream::finish() {
  Digest32 out;
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), out.data(), &len) != 1 ||
      len != out.size())
    ossl_fail("sha256 final");
  return out;
}

Digest32 hmac_sha256(ByteView key, ByteView data) {
  Digest32 out;
  size_t out_len = out.size();
  EVP_MAC* mac = EVP_MAC_fetch(nullptr, "HMAC", nullptr);
  if (!mac) ossl_fail("mac fetch");
  EVP_MAC_CTX* ctx = EVP_MAC_CTX_new(mac);
  EVP_MAC_free(mac);
  if (!ctx) ossl_fail("mac ctx");
  char digest_name[] = "SHA256";
  OSSL_PARAM params[] = {
      OSSL_PARAM_construct_utf8_string("digest", digest_name, 0),
      OSSL_PARAM_construct_end()};
  bool ok = EVP_MAC_init(ctx, key.data(), key.size(), params) == 1 &&
            EVP_MAC_update(ctx, data.data(), data.size()) == 1 &&
            EVP_MAC_final(ctx, out.data(), &out_len, out.size()) == 1 &&
            out_len == out.size();
  EVP_MAC_CTX_free(ctx);
  if (!ok) ossl_fail("hmac");
  return out;
}

Bytes hkdf_sha256(ByteView ikm, ByteView salt, ByteView info, size_t out_len) {
  Bytes out(out_len);
  std::unique_ptr<EVP_PKEY_CTX, PkeyCtxFree> ctx(
      EVP_PKEY_CTX_new_id(EVP_PKEY_HKDF, nullptr));
  if (!ctx || EVP_PKEY_derive_init(ctx.get()) <= 0) ossl_fail("hkdf init");
  if (EVP_PKEY_CTX_set_hkdf_md(ctx.get(), EVP_sha256()) <= 0 ||
      EVP_PKEY_CTX_set1_hkdf_salt(ctx.get(), salt.data(),
                                  static_cast<int>(salt.size())) <= 0 ||
      EVP_PKEY_CTX_set1_hkdf_key(ctx.get(), ikm.data(),
                                 static_cast<int>(ikm.size())) <= 0 ||
      EVP_PKEY_CTX_add1_hkdf_info(ctx.get(), info.data(),
                                  static_cast<int>(info.size())) <= 0)
    ossl_fail("hkdf params");
  size_t len = out_len;
  if (EVP_PKEY_derive(ctx.get(), out.data(), &len) <= 0 || len != out_len)
    ossl_fail("hkdf derive");
  return out;
}

void random_bytes(uint8_t* out, size_t n) {
  if (RAND_bytes(out, static_cast<int>(n)) != 1) ossl_fail("rand");
}

Digest32 random_digest() {
  Digest32 d;
  random_bytes(d.data(), d.size());
  return d;
}

Key32 random_key() {
  Key32 k;
  random_bytes(k.data(), k.size());
  return k;
}

// ------------------------------------------------------------------
// AES-256-GCM
// ------------------------------------------------------------------

Sealed aead_seal(const Key32& key, const std::array<uint8_t, kGcmNonceLen>& nonce,
                 ByteView aad, ByteView plaintext) {
  std::unique_ptr<EVP_CIPHER_CTX, CipherCtxFree> ctx(EVP_CIPHER_CTX_new());
  if (!ctx) ossl_fail("cipher ctx");
  if (EVP_EncryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, key.data(),
                         nonce.data()) != 1)
    ossl_fail("gcm init");
  int len = 0;
  if (!aad.empty() &&
      EVP_EncryptUpdate(ctx.get(), nullptr, &len, aad.data(),
                        static_cast<int>(aad.size())) != 1)
    ossl_fail("gcm aad");
  Sealed out;
  out.ciphertext.resize(plaintext.size());
  if (!plaintext.empty() &&
      EVP_EncryptUpdate(ctx.get(), out.ciphertext.data(), &len,
                        plaintext.data(), static_cast<int>(plaintext.size())) != 1)
    ossl_fail("gcm encrypt");
  if (EVP_EncryptFinal_ex(ctx.get(), out.ciphertext.data() + plaintext.size(),
                          &len) != 1)
    ossl_fail("gcm final");
  if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG,
                          static_cast<int>(out.tag.size()),
                          out.tag.data()) != 1)
    ossl_fail("gcm tag");
  return out;
}

std::optional<Bytes> aead_open(const Key32& key,
                               const std::array<uint8_t, kGcmNonceLen>& nonce,
                               ByteView aad, ByteView ciphertext,
                               std::span<const uint8_t, kGcmTagLen> tag) {
  std::unique_ptr<EVP_CIPHER_CTX, CipherCtxFree> ctx(EVP_CIPHER_CTX_new());
  if (!ctx) ossl_fail("cipher ctx");
  if (EVP_DecryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, key.data(),
                         nonce.data()) != 1)
    ossl_fail("gcm init");
  int len = 0;
  if (!aad.empty() &&
      EVP_DecryptUpdate(ctx.get(), nullptr, &len, aad.data(),
                        static_cast<int>(aad.size())) != 1)
    ossl_fail("gcm aad");
  Bytes out(ciphertext.size());
  if (!ciphertext.empty() &&
      EVP_DecryptUpdate(ctx.get(), out.data(), &len, ciphertext.data(),
                        static_cast<int>(ciphertext.size())) != 1)
    ossl_fail("gcm decrypt");
  uint8_t tag_copy[kGcmTagLen];
  std::memcpy(tag_copy, tag.data(), kGcmTagLen);
  if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG, kGcmTagLen,
                          tag_copy) != 1)
    ossl_fail("gcm set tag");
  int final_len = 0;
  if (EVP_DecryptFinal_ex(ctx.get(), out.data() + out.size(), &final_len) != 1)
    return std::nullopt;  // tag mismatch
  return out;
}

// ------------------------------------------------------------------
// P-256
// ------------------------------------------------------------------

P256KeyPair::P256KeyPair(P256KeyPair&& other) noexcept : key_(other.key_) {
  other.key_ = nullptr;
}

P256KeyPair& P256KeyPair::operator=(P256KeyPair&& other) noexcept {
  if (this != &other) {
    if (key_) EVP_PKEY_free(key_);
    key_ = other.key_;
    other.key_ = nullptr;
  }
  return *this;
}

P256KeyPair::~P256KeyPair() {
  if (key_) EVP_PKEY_free(key_);
}

P256KeyPair P256KeyPair::generate() {
  std::array<uint8_t, 32> seed;
  random_bytes(seed.data(), seed.size());
  return from_seed(seed);
}

P256KeyPair P256KeyPair::from_seed(const std::array<uint8_t, 32>& seed) {
  // scalar = HKDF(seed) mod (n - 1) + 1, so it is always a valid key.
  Bytes okm = hkdf_sha256(ByteView(seed.data(), seed.size()), {},
                          ByteView(reinterpret_cast<const uint8_t*>("pvm/p256-scalar"), 15),
                          48);
  std::unique_ptr<BIGNUM, BnFree> order(nullptr);
  {
    BIGNUM* raw = nullptr;
    if (!BN_hex2bn(&raw, kP256Order)) ossl_fail("order");
    order.reset(raw);
  }
  std::unique_ptr<BIGNUM, BnFree> wide(BN_bin2bn(okm.data(), static_cast<int>(okm.size()), nullptr));
  std::unique_ptr<BIGNUM, BnFree> scalar(BN_new());
  std::unique_ptr<BIGNUM, BnFree> order_minus_1(BN_dup(order.get()));
  BN_CTX* bnctx = BN_CTX_new();
  if (!wide || !scalar || !order_minus_1 || !bnctx) ossl_fail("bn alloc");
  BN_sub_word(order_minus_1.get(), 1);
  if (!BN_mod(scalar.get(), wide.get(), order_minus_1.get(), bnctx))
    ossl_fail("bn mod");
  BN_add_word(scalar.get(), 1);

  // Compute the public point ourselves; fromdata does not derive it.
  std::unique_ptr<EC_GROUP, GroupFree> group(
      EC_GROUP_new_by_curve_name(NID_X9_62_prime256v1));
  std::unique_ptr<EC_POINT, PointFree> point(EC_POINT_new(group.get()));
  if (!group || !point ||
      EC_POINT_mul(group.get(), point.get(), scalar.get(), nullptr, nullptr,
                   bnctx) != 1)
    ossl_fail("point mul");
  uint8_t pub[kP256PubLen];
  size_t pub_len = EC_POINT_point2oct(group.get(), point.get(),
                                      POINT_CONVERSION_UNCOMPRESSED, pub,
                                      sizeof(pub), bnctx);
  BN_CTX_free(bnctx);
  if (pub_len != kP256PubLen) ossl_fail("point encode");

  EVP_PKEY* key = pkey_from_parts(scalar.get(), ByteView(pub, pub_len));
  return P256KeyPair(key);
}

PubKey P256KeyPair::public_key() const {
  PubKey out{};
  size_t len = 0;
  if (EVP_PKEY_get_octet_string_param(key_, OSSL_PKEY_PARAM_ENCODED_PUBLIC_KEY,
                                      out.data(), out.size(), &len) != 1 ||
      len != out.size())
    ossl_fail("get pub");
  return out;
}

Digest32 P256KeyPair::key_id() const {
  PubKey pub = public_key();
  return sha256(ByteView(pub.data(), pub.size()));
}

Signature P256KeyPair::sign_digest(const Digest32& digest) const {
  std::unique_ptr<EVP_PKEY_CTX, PkeyCtxFree> ctx(
      EVP_PKEY_CTX_new(key_, nullptr));
  if (!ctx || EVP_PKEY_sign_init(ctx.get()) <= 0) ossl_fail("sign init");
  size_t der_len = 0;
  if (EVP_PKEY_sign(ctx.get(), nullptr, &der_len, digest.data(),
                    digest.size()) <= 0)
    ossl_fail("sign size");
  Bytes der(der_len);
  if (EVP_PKEY_sign(ctx.get(), der.data(), &der_len, digest.data(),
                    digest.size()) <= 0)
    ossl_fail("sign");
  der.resize(der_len);

  const uint8_t* p = der.data();
  ECDSA_SIG* sig = d2i_ECDSA_SIG(nullptr, &p, static_cast<long>(der.size()));
  if (!sig) ossl_fail("sig decode");
  const BIGNUM* r = ECDSA_SIG_get0_r(sig);
  const BIGNUM* s = ECDSA_SIG_get0_s(sig);
  Signature out{};
  BN_bn2binpad(r, out.data(), 32);
  BN_bn2binpad(s, out.data() + 32, 32);
  ECDSA_SIG_free(sig);
  return out;
}

bool p256_verify(const PubKey& pub, const Digest32& digest,
                 const Signature& sig) {
  ECDSA_SIG* es = ECDSA_SIG_new();
  if (!es) ossl_fail("sig alloc");
  BIGNUM* r = BN_bin2bn(sig.data(), 32, nullptr);
  BIGNUM* s = BN_bin2bn(sig.data() + 32, 32, nullptr);
  if (!r || !s || ECDSA_SIG_set0(es, r, s) != 1) {
    ECDSA_SIG_free(es);
    ossl_fail("sig build");
  }
  int der_len = i2d_ECDSA_SIG(es, nullptr);
  Bytes der(static_cast<size_t>(der_len));
  uint8_t* out_p = der.data();
  i2d_ECDSA_SIG(es, &out_p);
  ECDSA_SIG_free(es);

  EVP_PKEY* key = pkey_from_public(pub);
  std::unique_ptr<EVP_PKEY_CTX, PkeyCtxFree> ctx(EVP_PKEY_CTX_new(key, nullptr));
  bool ok = ctx && EVP_PKEY_verify_init(ctx.get()) > 0 &&
            EVP_PKEY_verify(ctx.get(), der.data(), der.size(), digest.data(),
                            digest.size()) == 1;
  EVP_PKEY_free(key);
  return ok;
}

Key32 P256KeyPair::ecdh(const PubKey& peer) const {
  EVP_PKEY* peer_key = pkey_from_public(peer);
  std::unique_ptr<EVP_PKEY_CTX, PkeyCtxFree> ctx(
      EVP_PKEY_CTX_new(key_, nullptr));
  Key32 out{};
  size_t len = out.size();
  bool ok = ctx && EVP_PKEY_derive_init(ctx.get()) > 0 &&
            EVP_PKEY_derive_set_peer(ctx.get(), peer_key) > 0 &&
            EVP_PKEY_derive(ctx.get(), out.data(), &len) > 0 && len == out.size();
  EVP_PKEY_free(peer_key);
  if (!ok) ossl_fail("ecdh");
  return out;
}

}  // namespace pvm::crypto

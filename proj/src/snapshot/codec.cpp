#include "snapshot/codec.hpp"

#include <zlib.h>

namespace pvm::snapshot {

namespace {
constexpr int kDeflateLevel = 6;
}

Bytes compress(ByteView plain, Codec codec) {
  if (codec != Codec::Deflate) fail(PVM_ERR_UNSUPPORTED_VERSION, "unknown codec");
  uLong bound = compressBound(static_cast<uLong>(plain.size()));
  Bytes out(bound);
  uLongf out_len = bound;
  int rc = compress2(out.data(), &out_len, plain.data(),
                     static_cast<uLong>(plain.size()), kDeflateLevel);
  if (rc != Z_OK) fail(PVM_ERR_INTERNAL, "deflate failed");
  out.resize(out_len);
  return out;
}

Bytes decompress(ByteView packed, size_t expected_len, Codec codec) {
  if (codec != Codec::Deflate) fail(PVM_ERR_UNSUPPORTED_VERSION, "unknown codec");
  Bytes out(expected_len);
  uLongf out_len = static_cast<uLongf>(expected_len);
  int rc = uncompress(out.data(), &out_len, packed.data(),
                      static_cast<uLong>(packed.size()));
  if (rc != Z_OK || out_len != expected_len)
    fail(PVM_ERR_INTEGRITY_FAILURE, "inflate failed or length mismatch");
  return out;
}

}  // namespace pvm::snapshot

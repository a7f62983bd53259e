#ifndef PVM_SNAPSHOT_CODEC_HPP
#define PVM_SNAPSHOT_CODEC_HPP

#include "support/bytes.hpp"

namespace pvm::snapshot {

// Codec ids are pinned in the .psnp header so alternates can be added
// without a format break. Id 1 is DEFLATE at a fixed level; the level is
// part of the format contract because encodings must be byte-stable.
enum class Codec : uint8_t { Deflate = 1 };

Bytes compress(ByteView plain, Codec codec = Codec::Deflate);

// `expected_len` is the known plaintext size; a stream that inflates to
// anything else is corrupt.
Bytes decompress(ByteView packed, size_t expected_len,
                 Codec codec = Codec::Deflate);

}  // namespace pvm::snapshot

#endif

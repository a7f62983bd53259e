#ifndef PVM_SNAPSHOT_SNAPSHOT_HPP
#define PVM_SNAPSHOT_SNAPSHOT_HPP

#include "snapshot/codec.hpp"
#include "vm/state.hpp"

// Versioned binary container for execution states (.psnp) and page-level
// deltas (.pdlt). Both formats are little-endian and byte-stable given
// the same state and key; docs/formats.md is the bit-exact reference.
namespace pvm::snapshot {

inline constexpr size_t kChunkPlainLen = 1 << 20;  // 1 MiB per chunk
inline constexpr uint16_t kFormatVersion = 1;

enum class Cipher : uint8_t { Aes256Gcm = 1 };

struct BlobInfo {
  uint16_t version;
  Codec codec;
  Cipher cipher;
  Digest32 module_measurement;
  uint32_t chunk_count;
  uint64_t plaintext_len;
};

// Compress-then-encrypt each 1 MiB plaintext chunk under a key derived
// from (key, plaintext digest); the chunk sequence number and the whole
// header are bound into the authenticated data.
Bytes encode(const vm::ExecutionState& state, const Key32& key,
             Codec codec = Codec::Deflate);

// Verifies every chunk tag and the whole-snapshot digest before
// returning any state.
vm::ExecutionState decode(ByteView blob, const Key32& key);

BlobInfo inspect(ByteView blob);

// Dirty-page delta from `base` to `target`: exactly the 64 KiB pages
// whose bytes differ, plus a full replacement of the non-memory state,
// authenticated with a keyed tag.
Bytes make_delta(const vm::ExecutionState& base,
                 const vm::ExecutionState& target, const Key32& key);

vm::ExecutionState apply_delta(const vm::ExecutionState& base, ByteView delta,
                               const Key32& key);

// Page indices carried by a delta (tag is not checked).
std::vector<uint32_t> delta_pages(ByteView delta);

}  // namespace pvm::snapshot

#endif

#ifndef PVM_MIGRATE_WIRE_HPP
#define PVM_MIGRATE_WIRE_HPP

#include "support/bytes.hpp"

namespace pvm::migrate {

// Reliable ordered byte stream. Implementations: in-memory pipes, the
// paced simulated link, and TCP sockets. A write either delivers all of
// its bytes to the peer (even if the stream closes afterwards) or
// throws TransportClosed; nothing is ever reordered or duplicated.
class ByteStream {
 public:
  virtual ~ByteStream() = default;
  virtual void write(ByteView data) = 0;
  // Blocks; returns bytes read, 0 on end of stream.
  virtual size_t read(uint8_t* out, size_t max) = 0;
  virtual void close() = 0;
  // True when at least one byte is ready without blocking.
  virtual bool poll() { return false; }
};

enum class MsgType : uint8_t {
  Hello = 1,
  Quote = 2,
  KeyConfirm = 3,
  Negotiate = 4,
  Chunk = 5,
  Refresh = 6,
  Commit = 7,
  Abort = 8,
};

const char* msg_type_name(MsgType type);

struct WireFrame {
  MsgType type;
  Bytes payload;
};

// Frame layout: length prefix u32 (= payload length + 1) | type u8 |
// payload. The frame goes out in a single write.
void write_frame(ByteStream& stream, MsgType type, ByteView payload);
WireFrame read_frame(ByteStream& stream);  // throws TransportClosed at EOF

void read_exact(ByteStream& stream, uint8_t* out, size_t n);

}  // namespace pvm::migrate

#endif

#include "migrate/wire.hpp"

namespace pvm::migrate {

const char* msg_type_name(MsgType type) {
  switch (type) {
    case MsgType::Hello: return "HELLO";
    case MsgType::Quote: return "QUOTE";
    case MsgType::KeyConfirm: return "KEYCONFIRM";
    case MsgType::Negotiate: return "NEGOTIATE";
    case MsgType::Chunk: return "CHUNK";
    case MsgType::Refresh: return "REFRESH";
    case MsgType::Commit: return "COMMIT";
    case MsgType::Abort: return "ABORT";
  }
  return "?";
}

void write_frame(ByteStream& stream, MsgType type, ByteView payload) {
  ByteWriter w;
  w.u32(static_cast<uint32_t>(payload.size() + 1));
  w.u8(static_cast<uint8_t>(type));
  w.raw(payload);
  stream.write(w.data());
}

void read_exact(ByteStream& stream, uint8_t* out, size_t n) {
  size_t got = 0;
  while (got < n) {
    size_t r = stream.read(out + got, n - got);
    if (r == 0)
      fail(PVM_ERR_TRANSPORT_CLOSED, "stream ended mid-frame");
    got += r;
  }
}

WireFrame read_frame(ByteStream& stream) {
  uint8_t len_bytes[4];
  size_t first = stream.read(len_bytes, 4);
  if (first == 0) fail(PVM_ERR_TRANSPORT_CLOSED, "stream closed");
  if (first < 4) read_exact(stream, len_bytes + first, 4 - first);
  uint32_t len = 0;
  for (int i = 0; i < 4; i++) len |= static_cast<uint32_t>(len_bytes[i]) << (8 * i);
  if (len == 0 || len > (1u << 26))
    fail(PVM_ERR_TRANSPORT_CLOSED, "bad frame length");
  WireFrame frame;
  uint8_t type = 0;
  read_exact(stream, &type, 1);
  frame.type = static_cast<MsgType>(type);
  frame.payload.resize(len - 1);
  if (len > 1) read_exact(stream, frame.payload.data(), len - 1);
  return frame;
}

}  // namespace pvm::migrate

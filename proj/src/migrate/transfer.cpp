#include "migrate/transfer.hpp"

#include <chrono>
#include <cstring>
#include <sstream>

namespace pvm::migrate {

namespace {

using Steady = std::chrono::steady_clock;

double seconds_between(Steady::time_point a, Steady::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

}  // namespace

std::string TransferReport::stage_table() const {
  std::ostringstream out;
  char line[96];
  auto row = [&](const char* stage, double s) {
    std::snprintf(line, sizeof line, "  %-12s %9.3f s\n", stage, s);
    out << line;
  };
  out << "stage timings:\n";
  row("checkpoint", checkpoint_s);
  row("compress", compress_s);
  row("transfer", transfer_s);
  row("restore-ack", restore_ack_s);
  row("total", total_s);
  std::snprintf(line, sizeof line, "  chunks %u, bytes on wire %llu, refreshes %zu\n",
                chunks_sent, static_cast<unsigned long long>(bytes_on_wire),
                refresh_events.size());
  out << line;
  return out.str();
}

namespace {

// A receiver that bails out closes the stream right after its ABORT; a
// sender racing into that close must surface the abort, not the close.
[[noreturn]] void raise_peer_abort_or(Session& session, const Error& original) {
  try {
    for (;;) session.recv();  // an ABORT frame raises its embedded code
  } catch (const Error& drained) {
    if (drained.code() != PVM_ERR_TRANSPORT_CLOSED) throw;
  }
  throw original;
}

}  // namespace

void send_snapshot(Session& session, ByteView blob, const Digest32& blob_digest,
                   uint64_t refresh_interval_s,
                   const std::optional<Key32>& storage_key,
                   TransferReport& report) {
  uint64_t bytes_before = session.bytes_written();
  Steady::time_point t0 = Steady::now();

  uint32_t chunk_count =
      static_cast<uint32_t>((blob.size() + kWireChunkLen - 1) / kWireChunkLen);
  ByteWriter negotiate;
  negotiate.u64(blob.size());
  negotiate.u32(chunk_count);
  negotiate.u8(storage_key ? 1 : 0);
  if (storage_key) negotiate.raw(storage_key->data(), storage_key->size());
  negotiate.u64(refresh_interval_s);
  session.send(MsgType::Negotiate, negotiate.data());

  for (uint32_t i = 0; i < chunk_count; i++) {
    // A receiver-side failure surfaces as an inbound ABORT; drain it
    // between chunks instead of writing into a dead transfer.
    if (session.inbound_pending()) {
      WireFrame frame = session.recv();  // raises the peer's abort code
      fail(PVM_ERR_PEER_ABORT, std::string("unexpected ") +
                                   msg_type_name(frame.type) +
                                   " during transfer");
    }
    if (session.now() - session.last_refresh() > refresh_interval_s) {
      session.refresh_as_initiator();
      report.refresh_events.push_back(session.now());
    }
    size_t begin = static_cast<size_t>(i) * kWireChunkLen;
    size_t len = std::min(kWireChunkLen, blob.size() - begin);
    ByteWriter chunk;
    chunk.u32(i);
    chunk.raw(blob.subspan(begin, len));
    try {
      session.send(MsgType::Chunk, chunk.data());
    } catch (const Error& e) {
      if (e.code() == PVM_ERR_TRANSPORT_CLOSED) raise_peer_abort_or(session, e);
      throw;
    }
    report.chunks_sent++;
  }

  ByteWriter commit;
  commit.u8(static_cast<uint8_t>(CommitStage::TransferDigest));
  commit.raw(blob_digest.data(), blob_digest.size());
  try {
    session.send(MsgType::Commit, commit.data());
  } catch (const Error& e) {
    if (e.code() == PVM_ERR_TRANSPORT_CLOSED) raise_peer_abort_or(session, e);
    throw;
  }

  WireFrame ack = session.recv();
  if (ack.type != MsgType::Commit || ack.payload.empty() ||
      ack.payload[0] != static_cast<uint8_t>(CommitStage::ReceivedOk))
    fail(PVM_ERR_PEER_ABORT, "transfer was not acknowledged");

  report.transfer_s = seconds_between(t0, Steady::now());
  report.bytes_on_wire += session.bytes_written() - bytes_before;
}

ReceivedSnapshot receive_snapshot(Session& session) {
  WireFrame frame = session.recv();
  if (frame.type != MsgType::Negotiate)
    fail(PVM_ERR_INTEGRITY_FAILURE, "expected NEGOTIATE");
  ByteReader r(frame.payload, PVM_ERR_INTEGRITY_FAILURE);
  uint64_t blob_len = r.u64();
  uint32_t chunk_count = r.u32();
  ReceivedSnapshot out;
  if (r.u8()) out.storage_key = r.arr<32>();
  r.u64();  // sender's refresh interval, informational
  if (blob_len > (1ull << 36))
    fail(PVM_ERR_INTEGRITY_FAILURE, "unreasonable transfer size");

  out.blob.reserve(blob_len);
  crypto::Sha256Stream digest;
  uint32_t next_chunk = 0;
  for (;;) {
    WireFrame msg;
    try {
      msg = session.recv();
    } catch (const Error& e) {
      if (e.code() == PVM_ERR_CHUNK_INTEGRITY_FAILURE ||
          e.code() == PVM_ERR_INTEGRITY_FAILURE) {
        session.send_abort(e.code(), e.what());
      }
      throw;
    }
    switch (msg.type) {
      case MsgType::Chunk: {
        ByteReader cr(msg.payload, PVM_ERR_CHUNK_INTEGRITY_FAILURE);
        uint32_t index = cr.u32();
        if (index != next_chunk || index >= chunk_count) {
          session.send_abort(PVM_ERR_CHUNK_INTEGRITY_FAILURE,
                             "chunk out of order");
          fail(PVM_ERR_CHUNK_INTEGRITY_FAILURE, "chunk out of order");
        }
        ByteView data = cr.raw(cr.remaining());
        out.blob.insert(out.blob.end(), data.begin(), data.end());
        digest.update(data);
        next_chunk++;
        break;
      }
      case MsgType::Refresh: {
        session.refresh_as_responder(msg.payload);
        out.refreshes++;
        break;
      }
      case MsgType::Commit: {
        ByteReader cr(msg.payload, PVM_ERR_INTEGRITY_FAILURE);
        if (cr.u8() != static_cast<uint8_t>(CommitStage::TransferDigest))
          fail(PVM_ERR_INTEGRITY_FAILURE, "unexpected commit stage");
        Digest32 claimed = cr.arr<32>();
        if (next_chunk != chunk_count || out.blob.size() != blob_len) {
          session.send_abort(PVM_ERR_DIGEST_MISMATCH, "missing chunks");
          fail(PVM_ERR_DIGEST_MISMATCH, "commit before all chunks arrived");
        }
        if (digest.finish() != claimed) {
          session.send_abort(PVM_ERR_DIGEST_MISMATCH,
                             "snapshot digest mismatch");
          fail(PVM_ERR_DIGEST_MISMATCH, "snapshot digest mismatch");
        }
        ByteWriter ok;
        ok.u8(static_cast<uint8_t>(CommitStage::ReceivedOk));
        session.send(MsgType::Commit, ok.data());
        return out;
      }
      default:
        session.send_abort(PVM_ERR_INTEGRITY_FAILURE, "unexpected message");
        fail(PVM_ERR_INTEGRITY_FAILURE,
             std::string("unexpected ") + msg_type_name(msg.type));
    }
  }
}

}  // namespace pvm::migrate

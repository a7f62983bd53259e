#include "migrate/pipeline.hpp"

#include <chrono>

namespace pvm::migrate {

namespace {
using Steady = std::chrono::steady_clock;
double since(Steady::time_point t0) {
  return std::chrono::duration<double>(Steady::now() - t0).count();
}
}  // namespace

MigrationOutcome migrate_instance(vm::Instance& instance, ByteStream& stream,
                                  const EndpointConfig& endpoint,
                                  const MigrateOptions& options) {
  if (!instance.runnable() || !instance.at_stable_point())
    fail(PVM_ERR_NOT_AT_STABLE_POINT,
         "migration requires a runnable instance at a stable point");

  MigrationOutcome outcome;
  Steady::time_point t_start = Steady::now();

  Steady::time_point t0 = Steady::now();
  vm::ExecutionState state = instance.capture();
  outcome.report.checkpoint_s = since(t0);

  t0 = Steady::now();
  Key32 storage_key =
      options.storage_key ? *options.storage_key : crypto::random_key();
  Bytes blob = snapshot::encode(state, storage_key);
  Digest32 blob_digest = crypto::sha256(blob);
  outcome.report.compress_s = since(t0);

  // Handshake and chunk stream count as the transfer stage.
  t0 = Steady::now();
  Session session = Session::initiate(stream, endpoint);
  send_snapshot(session, blob, blob_digest, options.refresh_interval_s,
                storage_key, outcome.report);
  outcome.report.transfer_s = since(t0);

  t0 = Steady::now();
  WireFrame restored = session.recv();
  if (restored.type != MsgType::Commit)
    fail(PVM_ERR_REMOTE_RESTORE_FAILED, "expected restore acknowledgment");
  ByteReader r(restored.payload, PVM_ERR_REMOTE_RESTORE_FAILED);
  if (r.u8() != static_cast<uint8_t>(CommitStage::Restored))
    fail(PVM_ERR_REMOTE_RESTORE_FAILED, "unexpected commit stage");
  uint8_t status = r.u8();
  std::string detail = r.str();
  if (status != 0)
    fail(PVM_ERR_REMOTE_RESTORE_FAILED, "remote restore failed: " + detail);
  outcome.remote_state_digest = r.arr<32>();

  // The activation message is the commit point: once it is accepted by
  // the transport it will be delivered, so the source steps aside.
  ByteWriter activate;
  activate.u8(static_cast<uint8_t>(CommitStage::Activate));
  session.send(MsgType::Commit, activate.data());
  instance.mark_migrated_away();
  outcome.report.restore_ack_s = since(t0);
  outcome.report.total_s = since(t_start);
  return outcome;
}

ServeResult serve_once(ByteStream& stream, const EndpointConfig& endpoint,
                       std::shared_ptr<const vm::Module> module,
                       vm::PolicyMode policy) {
  Session session = Session::respond(stream, endpoint);
  ReceivedSnapshot received = receive_snapshot(session);

  ServeResult result;
  result.peer = session.peer();
  result.refreshes = received.refreshes;
  result.blob_bytes = received.blob.size();

  vm::ExecutionState state;
  std::optional<vm::Instance> instance;
  try {
    if (!received.storage_key)
      fail(PVM_ERR_AUTHENTICATION_FAILURE, "no storage key for the snapshot");
    state = snapshot::decode(received.blob, *received.storage_key);
    instance.emplace(vm::Instance::restore(module, state, policy));
  } catch (const Error& e) {
    ByteWriter nack;
    nack.u8(static_cast<uint8_t>(CommitStage::Restored));
    nack.u8(static_cast<uint8_t>(e.code()));
    nack.str(e.what());
    Digest32 zero{};
    nack.raw(zero.data(), zero.size());
    session.send(MsgType::Commit, nack.data());
    throw;
  }

  ByteWriter ok;
  ok.u8(static_cast<uint8_t>(CommitStage::Restored));
  ok.u8(0);
  ok.str("");
  Digest32 digest = state.digest();
  ok.raw(digest.data(), digest.size());
  session.send(MsgType::Commit, ok.data());

  // Activation gates the hand-off: if the stream dies first, the
  // restored state is discarded and the source remains authoritative.
  WireFrame frame = session.recv();
  if (frame.type != MsgType::Commit || frame.payload.empty() ||
      frame.payload[0] != static_cast<uint8_t>(CommitStage::Activate))
    fail(PVM_ERR_TRANSPORT_CLOSED, "activation never arrived");

  result.instance = std::move(instance);
  return result;
}

}  // namespace pvm::migrate

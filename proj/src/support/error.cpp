#include "support/error.hpp"

namespace pvm {

const char* status_name(pvm_status code) noexcept {
  switch (code) {
    case PVM_OK: return "Ok";
    case PVM_ERR_INTERNAL: return "Internal";
    case PVM_ERR_USAGE: return "Usage";
    case PVM_ERR_IO: return "Io";
    case PVM_ERR_PARSE: return "ParseError";
    case PVM_ERR_VALIDATION: return "ValidationError";
    case PVM_ERR_TRAP: return "Trap";
    case PVM_ERR_NOT_AT_STABLE_POINT: return "NotAtStablePoint";
    case PVM_ERR_MEASUREMENT_MISMATCH: return "MeasurementMismatch";
    case PVM_ERR_MALFORMED_STATE: return "MalformedState";
    case PVM_ERR_NOT_RUNNABLE: return "NotRunnable";
    case PVM_ERR_UNSUPPORTED_VERSION: return "UnsupportedVersion";
    case PVM_ERR_AUTHENTICATION_FAILURE: return "AuthenticationFailure";
    case PVM_ERR_INTEGRITY_FAILURE: return "IntegrityFailure";
    case PVM_ERR_TRUNCATED_BLOB: return "TruncatedBlob";
    case PVM_ERR_BASE_MISMATCH: return "BaseMismatch";
    case PVM_ERR_BAD_SIGNATURE: return "BadSignature";
    case PVM_ERR_UNKNOWN_MEASUREMENT: return "UnknownMeasurement";
    case PVM_ERR_NONCE_MISMATCH: return "NonceMismatch";
    case PVM_ERR_STALE_QUOTE: return "StaleQuote";
    case PVM_ERR_COUNTER_REPLAY: return "CounterReplay";
    case PVM_ERR_CAPABILITY_MISMATCH: return "CapabilityMismatch";
    case PVM_ERR_BROKEN_LINK: return "BrokenLink";
    case PVM_ERR_INDEX_OUT_OF_RANGE: return "IndexOutOfRange";
    case PVM_ERR_SHAPE_MISMATCH: return "ShapeMismatch";
    case PVM_ERR_VERIFICATION_FAILED: return "VerificationFailed";
    case PVM_ERR_KEY_CONFIRM_FAILED: return "KeyConfirmFailed";
    case PVM_ERR_TRANSPORT_CLOSED: return "TransportClosed";
    case PVM_ERR_REFRESH_FAILED: return "RefreshFailed";
    case PVM_ERR_CHUNK_INTEGRITY_FAILURE: return "ChunkIntegrityFailure";
    case PVM_ERR_PEER_ABORT: return "PeerAbort";
    case PVM_ERR_DIGEST_MISMATCH: return "DigestMismatch";
    case PVM_ERR_REMOTE_RESTORE_FAILED: return "RemoteRestoreFailed";
    case PVM_ERR_UNKNOWN_LABEL: return "UnknownLabel";
    case PVM_ERR_NO_REPLICA_AVAILABLE: return "NoReplicaAvailable";
    case PVM_ERR_CLOCK_ORDER: return "ClockOrder";
    case PVM_ERR_SLOW_PATH_TRAP: return "SlowPathTrap";
    case PVM_ERR_EMPTY_CORPUS: return "EmptyCorpus";
    case PVM_ERR_SCENARIO_PARSE: return "ScenarioParseError";
    case PVM_ERR_ASSERTION_FAILED: return "AssertionFailed";
  }
  return "Unknown";
}

}  // namespace pvm

/* portvm — portable stack-machine VM with checkpointed live migration.
 *
 * C API for the portvm shared library. All functions return a pvm_status;
 * handles are opaque and must be released with the matching _free call.
 * A human-readable message for the most recent failure on the calling
 * thread is available via pvm_last_error().
 */
#ifndef PORTVM_H
#define PORTVM_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#ifndef PVM_API
#define PVM_API __attribute__((visibility("default")))
#endif

/* ------------------------------------------------------------------ */
/* Status codes                                                       */
/* ------------------------------------------------------------------ */

typedef enum pvm_status {
  PVM_OK = 0,
  PVM_ERR_INTERNAL = 1,
  PVM_ERR_USAGE = 2,
  PVM_ERR_IO = 3,

  /* vm */
  PVM_ERR_PARSE = 10,
  PVM_ERR_VALIDATION = 11,
  PVM_ERR_TRAP = 12,
  PVM_ERR_NOT_AT_STABLE_POINT = 13,
  PVM_ERR_MEASUREMENT_MISMATCH = 14,
  PVM_ERR_MALFORMED_STATE = 15,
  PVM_ERR_NOT_RUNNABLE = 16,

  /* snapshot */
  PVM_ERR_UNSUPPORTED_VERSION = 20,
  PVM_ERR_AUTHENTICATION_FAILURE = 21,
  PVM_ERR_INTEGRITY_FAILURE = 22,
  PVM_ERR_TRUNCATED_BLOB = 23,
  PVM_ERR_BASE_MISMATCH = 24,

  /* attestation */
  PVM_ERR_BAD_SIGNATURE = 30,
  PVM_ERR_UNKNOWN_MEASUREMENT = 31,
  PVM_ERR_NONCE_MISMATCH = 32,
  PVM_ERR_STALE_QUOTE = 33,
  PVM_ERR_COUNTER_REPLAY = 34,
  PVM_ERR_CAPABILITY_MISMATCH = 35,
  PVM_ERR_BROKEN_LINK = 36,
  PVM_ERR_INDEX_OUT_OF_RANGE = 37,
  PVM_ERR_SHAPE_MISMATCH = 38,

  /* migration */
  PVM_ERR_VERIFICATION_FAILED = 40,
  PVM_ERR_KEY_CONFIRM_FAILED = 41,
  PVM_ERR_TRANSPORT_CLOSED = 42,
  PVM_ERR_REFRESH_FAILED = 43,
  PVM_ERR_CHUNK_INTEGRITY_FAILURE = 44,
  PVM_ERR_PEER_ABORT = 45,
  PVM_ERR_DIGEST_MISMATCH = 46,
  PVM_ERR_REMOTE_RESTORE_FAILED = 47,

  /* scheduler / replication */
  PVM_ERR_UNKNOWN_LABEL = 50,
  PVM_ERR_NO_REPLICA_AVAILABLE = 51,
  PVM_ERR_CLOCK_ORDER = 52,

  /* speculation / validation */
  PVM_ERR_SLOW_PATH_TRAP = 60,
  PVM_ERR_EMPTY_CORPUS = 61,

  /* harness */
  PVM_ERR_SCENARIO_PARSE = 70,
  PVM_ERR_ASSERTION_FAILED = 71
} pvm_status;

PVM_API const char *pvm_version(void);
PVM_API const char *pvm_status_name(pvm_status status);

/* Message for the last failing call on this thread. Never NULL. */
PVM_API const char *pvm_last_error(void);

/* Frees strings returned through char** out-parameters. */
PVM_API void pvm_string_free(char *s);

/* ------------------------------------------------------------------ */
/* Modules and instances                                              */
/* ------------------------------------------------------------------ */

typedef struct pvm_module pvm_module;
typedef struct pvm_instance pvm_instance;
typedef struct pvm_state pvm_state;

typedef enum pvm_policy {
  PVM_POLICY_FUNCTION = 0,
  PVM_POLICY_LOOP = 1,
  PVM_POLICY_EXPLICIT = 2
} pvm_policy;

typedef enum pvm_outcome_kind {
  PVM_OUTCOME_HALTED = 0,
  PVM_OUTCOME_CHECKPOINT = 1,
  PVM_OUTCOME_FUEL_EXHAUSTED = 2,
  PVM_OUTCOME_TRAP = 3
} pvm_outcome_kind;

typedef struct pvm_run_outcome {
  pvm_outcome_kind kind;
  int64_t value;        /* valid when kind == HALTED */
  uint32_t function;    /* valid when kind == CHECKPOINT */
  uint32_t offset;      /* valid when kind == CHECKPOINT */
  const char *trap;     /* static string, valid when kind == TRAP */
} pvm_run_outcome;

PVM_API pvm_status pvm_assemble(const char *source, pvm_module **out);
PVM_API pvm_status pvm_assemble_file(const char *path, pvm_module **out);
PVM_API void pvm_module_free(pvm_module *m);
PVM_API void pvm_module_measurement(const pvm_module *m, uint8_t out[32]);

PVM_API pvm_status pvm_instantiate(const pvm_module *m, pvm_policy policy,
                                   pvm_instance **out);
/* fuel < 0 means unlimited. */
PVM_API pvm_status pvm_run(pvm_instance *inst, int64_t fuel,
                           int stop_at_checkpoint, pvm_run_outcome *out);
PVM_API pvm_status pvm_capture(pvm_instance *inst, pvm_state **out);
PVM_API pvm_status pvm_restore(const pvm_module *m, const pvm_state *s,
                               pvm_policy policy, pvm_instance **out);
PVM_API uint64_t pvm_steps_executed(const pvm_instance *inst);
PVM_API void pvm_instance_free(pvm_instance *inst);

/* ------------------------------------------------------------------ */
/* Snapshots (.psnp) and deltas                                       */
/* ------------------------------------------------------------------ */

PVM_API void pvm_state_free(pvm_state *s);
PVM_API void pvm_state_digest(const pvm_state *s, uint8_t out[32]);
PVM_API pvm_status pvm_snapshot_save(const pvm_state *s,
                                     const uint8_t key[32], const char *path);
PVM_API pvm_status pvm_snapshot_load(const char *path, const uint8_t key[32],
                                     pvm_state **out);
PVM_API pvm_status pvm_delta_save(const pvm_state *base,
                                  const pvm_state *target,
                                  const uint8_t key[32], const char *path);
PVM_API pvm_status pvm_delta_apply(const pvm_state *base, const char *path,
                                   const uint8_t key[32], pvm_state **out);

/* ------------------------------------------------------------------ */
/* Node identities                                                    */
/* ------------------------------------------------------------------ */

/* Deterministic P-256 identity from a 32-byte seed (hex). Outputs are
 * hex strings; pass NULL for any output not wanted. */
PVM_API pvm_status pvm_keygen(const char *seed_hex, char **pub_hex_out,
                              char **node_id_hex_out);

/* Measurement this runtime reports for itself in attestation quotes. */
PVM_API void pvm_runtime_measurement(uint8_t out[32]);

/* ------------------------------------------------------------------ */
/* Migration endpoints                                                */
/* ------------------------------------------------------------------ */

typedef struct pvm_server pvm_server;

typedef struct pvm_serve_options {
  const char *host;            /* default "127.0.0.1" */
  int port;                    /* 0 picks an ephemeral port */
  const char *module_path;     /* workload module expected to arrive */
  const char *whitelist_path;  /* trusted measurement hex lines */
  const char *trust_keys_path; /* trusted peer public key hex lines */
  const char *identity_seed_hex;
  const char *caps;            /* advertised entry ids, "1001,1003" */
  const char *required_caps;   /* entry ids required of the peer */
  const char *measurement_hex; /* override own measurement (testing) */
  int run_after_restore;       /* run restored instance to completion */
} pvm_serve_options;

PVM_API pvm_status pvm_server_start(const pvm_serve_options *opts,
                                    pvm_server **out);
PVM_API int pvm_server_port(const pvm_server *srv);
/* Accepts one migration; report receives a human-readable summary. */
PVM_API pvm_status pvm_server_serve_once(pvm_server *srv, char **report_out);
PVM_API void pvm_server_free(pvm_server *srv);

typedef struct pvm_migrate_options {
  const char *host;
  int port;
  const char *module_path;
  const char *snapshot_path; /* NULL: live-checkpoint the module instead */
  const char *key_hex;       /* storage key of snapshot_path */
  pvm_policy policy;         /* live mode: checkpoint policy */
  const char *whitelist_path;
  const char *trust_keys_path;
  const char *identity_seed_hex;
  const char *caps;
  const char *required_caps;
  const char *measurement_hex;
  double refresh_interval_s; /* <= 0: default 300 */
  double bandwidth_bps;      /* > 0: pace the link at this rate */
} pvm_migrate_options;

PVM_API pvm_status pvm_migrate(const pvm_migrate_options *opts,
                               char **stage_report_out);

/* ------------------------------------------------------------------ */
/* Placement decisions                                                */
/* ------------------------------------------------------------------ */

typedef struct pvm_decide_options {
  double t_local_s;
  double t_remote_s;
  double migration_time_s; /* < 0: estimate from size and calibration */
  uint64_t snapshot_bytes;
  double bandwidth_bps;
  const char *labels;           /* comma-separated data-class tags */
  int target_trusted;           /* 1: trusted enclave tier */
  const char *labels_path;      /* optional registry override */
  const char *calibration_path; /* optional calibration table */
} pvm_decide_options;

/* migrate_out receives 1 for Migrate, 0 for Stay. */
PVM_API pvm_status pvm_decide(const pvm_decide_options *opts,
                              char **report_out, int *migrate_out);

PVM_API pvm_status pvm_calibrate(const char *out_path, char **summary_out);

/* ------------------------------------------------------------------ */
/* Harness: scenarios, validation, speculation                        */
/* ------------------------------------------------------------------ */

PVM_API pvm_status pvm_simulate(const char *scenario_path,
                                const char *event_log_path,
                                const char *metrics_path, char **summary_out);

typedef struct pvm_validate_options {
  const char *corpus_path;
  const char *rules_dir;
  double per_validator_cost_ms; /* synthetic validator cost for overhead runs */
  double gen_delay_ms;          /* synthetic generation delay per chunk */
} pvm_validate_options;

PVM_API pvm_status pvm_validate_corpus(const pvm_validate_options *opts,
                                       char **table_out);

typedef struct pvm_specbench_options {
  const char *config_path; /* NULL: built-in default suite */
  uint64_t seed;
} pvm_specbench_options;

PVM_API pvm_status pvm_speculate_bench(const pvm_specbench_options *opts,
                                       char **table_out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* PORTVM_H */

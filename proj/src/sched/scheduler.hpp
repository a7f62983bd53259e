#ifndef PVM_SCHED_SCHEDULER_HPP
#define PVM_SCHED_SCHEDULER_HPP

#include <map>
#include <set>
#include <string>

#include "support/bytes.hpp"

namespace pvm::sched {

// Placement logic of the privacy-aware daemon: classify the data, price
// the move, and migrate only when every rule holds.

enum class Sensitivity { Public = 0, Internal = 1, Confidential = 2, Restricted = 3 };
const char* sensitivity_name(Sensitivity s);

using LabelRegistry = std::map<std::string, Sensitivity>;

// Built-in label table; deployments override with a registry file of
// "<label> <class>" lines.
const LabelRegistry& builtin_labels();
LabelRegistry load_labels(const std::string& path);

// Maximum class across the labels; the empty set is Public.
// Throws UnknownLabel.
Sensitivity classify(const std::set<std::string>& labels,
                     const LabelRegistry& registry = builtin_labels());

// Per-byte stage rates measured on this machine by `portvm calibrate`,
// plus the measured compression ratio.
struct CalibrationTable {
  double checkpoint_s_per_byte = 2.0e-10;
  double checkpoint_fixed_s = 0.0005;
  double compress_s_per_byte = 9.0e-9;
  double compress_fixed_s = 0.0005;
  double restore_s_per_byte = 6.0e-9;
  double restore_fixed_s = 0.0005;
  double compression_ratio = 0.45;  // compressed / raw

  void save(const std::string& path) const;
  static CalibrationTable load(const std::string& path);
};

// Runs capture/encode/decode on a synthetic workspace and fits the
// per-byte rates. Deterministic input, wall-clock timings.
CalibrationTable measure_calibration();

enum class TierTrust { TrustedEnclave, Untrusted };

struct WorkloadProfile {
  double t_local_s = 0;       // estimated local remaining time
  double t_remote_s = 0;      // estimated remote remaining time
  uint64_t snapshot_bytes = 0;
  double bandwidth_bps = 1e9;
  Sensitivity sensitivity = Sensitivity::Public;
  TierTrust target_trust = TierTrust::Untrusted;
};

// M = t_checkpoint + t_compress + compressed/bandwidth + t_restore.
double estimate_migration_time(const WorkloadProfile& profile,
                               const CalibrationTable& calibration);

struct Placement {
  enum class Action { Stay, Migrate };
  Action action = Action::Stay;
  std::string reason;      // first failing rule when staying
  double migration_s = 0;  // M used by the decision
  double speedup_ratio = 0;        // T_local / T_remote
  double net_speedup = 0;          // T_local / (T_remote + M)
  bool sensitivity_ok = false;     // rule (a)
  bool ratio_ok = false;           // rule (b): ratio >= 1.5
  bool duration_ok = false;        // rule (c): T_local > 2M

  std::string describe() const;
};

inline constexpr double kSpeedupThreshold = 1.5;

// Migrate iff (a) Restricted data only moves to a trusted enclave,
// (b) T_local / T_remote >= 1.5, and (c) T_local > 2M. The first
// failing rule becomes the Stay reason.
Placement decide(const WorkloadProfile& profile, double migration_time_s);
Placement decide(const WorkloadProfile& profile,
                 const CalibrationTable& calibration);

}  // namespace pvm::sched

#endif

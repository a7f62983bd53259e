#include "sched/scheduler.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include "snapshot/snapshot.hpp"
#include "support/crypto.hpp"
#include "support/error.hpp"
#include "vm/module.hpp"

namespace pvm::sched {

const char* sensitivity_name(Sensitivity s) {
  switch (s) {
    case Sensitivity::Public: return "Public";
    case Sensitivity::Internal: return "Internal";
    case Sensitivity::Confidential: return "Confidential";
    case Sensitivity::Restricted: return "Restricted";
  }
  return "?";
}

const LabelRegistry& builtin_labels() {
  static const LabelRegistry table = {
      {"public-doc", Sensitivity::Public},
      {"telemetry", Sensitivity::Internal},
      {"usage-metrics", Sensitivity::Internal},
      {"personal-note", Sensitivity::Confidential},
      {"conversation-history", Sensitivity::Confidential},
      {"location-trace", Sensitivity::Confidential},
      {"medical-record", Sensitivity::Restricted},
      {"financial-account", Sensitivity::Restricted},
      {"credential", Sensitivity::Restricted},
  };
  return table;
}

static Sensitivity sensitivity_from_name(const std::string& name,
                                         const std::string& where) {
  if (name == "public") return Sensitivity::Public;
  if (name == "internal") return Sensitivity::Internal;
  if (name == "confidential") return Sensitivity::Confidential;
  if (name == "restricted") return Sensitivity::Restricted;
  fail(PVM_ERR_PARSE, where + ": unknown sensitivity class '" + name + "'");
}

LabelRegistry load_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(PVM_ERR_IO, "cannot open label registry: " + path);
  LabelRegistry out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    std::istringstream ls(line);
    std::string label, klass;
    if (!(ls >> label) || label[0] == '#') continue;
    if (!(ls >> klass))
      fail(PVM_ERR_PARSE,
           path + ":" + std::to_string(lineno) + ": expected '<label> <class>'");
    out[label] = sensitivity_from_name(klass, path + ":" + std::to_string(lineno));
  }
  return out;
}

Sensitivity classify(const std::set<std::string>& labels,
                     const LabelRegistry& registry) {
  Sensitivity out = Sensitivity::Public;
  for (const std::string& label : labels) {
    auto it = registry.find(label);
    if (it == registry.end())
      fail(PVM_ERR_UNKNOWN_LABEL, "label '" + label + "' is not registered");
    if (it->second > out) out = it->second;
  }
  return out;
}

/* ------------------------------------------------------------------ */
/* Calibration                                                        */
/* ------------------------------------------------------------------ */

void CalibrationTable::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) fail(PVM_ERR_IO, "cannot write calibration table: " + path);
  out << "pvmcal 1\n";
  out << "checkpoint_s_per_byte " << checkpoint_s_per_byte << "\n";
  out << "checkpoint_fixed_s " << checkpoint_fixed_s << "\n";
  out << "compress_s_per_byte " << compress_s_per_byte << "\n";
  out << "compress_fixed_s " << compress_fixed_s << "\n";
  out << "restore_s_per_byte " << restore_s_per_byte << "\n";
  out << "restore_fixed_s " << restore_fixed_s << "\n";
  out << "compression_ratio " << compression_ratio << "\n";
}

CalibrationTable CalibrationTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(PVM_ERR_IO, "cannot open calibration table: " + path);
  std::string header;
  std::getline(in, header);
  if (header.rfind("pvmcal 1", 0) != 0)
    fail(PVM_ERR_PARSE, path + ": not a calibration table");
  CalibrationTable t;
  std::string key;
  double value;
  while (in >> key >> value) {
    if (key == "checkpoint_s_per_byte") t.checkpoint_s_per_byte = value;
    else if (key == "checkpoint_fixed_s") t.checkpoint_fixed_s = value;
    else if (key == "compress_s_per_byte") t.compress_s_per_byte = value;
    else if (key == "compress_fixed_s") t.compress_fixed_s = value;
    else if (key == "restore_s_per_byte") t.restore_s_per_byte = value;
    else if (key == "restore_fixed_s") t.restore_fixed_s = value;
    else if (key == "compression_ratio") t.compression_ratio = value;
    else fail(PVM_ERR_PARSE, path + ": unknown calibration key " + key);
  }
  return t;
}

CalibrationTable measure_calibration() {
  using Steady = std::chrono::steady_clock;
  // Synthetic 16 MiB workspace, half compressible.
  constexpr size_t kPages = 256;
  vm::ExecutionState state;
  state.module_measurement = crypto::sha256(
      ByteView(reinterpret_cast<const uint8_t*>("calibration"), 11));
  vm::Frame frame;
  frame.locals = {0, 0};
  state.frames.push_back(frame);
  state.memory.assign(kPages * vm::kPageSize, 0);
  SplitMix64 rng(1234);
  for (size_t i = 0; i < state.memory.size() / 2; i++)
    state.memory[i] = static_cast<uint8_t>(rng.next());

  double bytes = static_cast<double>(state.memory.size());
  Key32 key{};

  // "Checkpoint" at desk scale is the deep copy a capture performs.
  Steady::time_point t0 = Steady::now();
  vm::ExecutionState copy = state;
  double checkpoint_s = std::chrono::duration<double>(Steady::now() - t0).count();

  t0 = Steady::now();
  Bytes blob = snapshot::encode(copy, key);
  double compress_s = std::chrono::duration<double>(Steady::now() - t0).count();

  t0 = Steady::now();
  vm::ExecutionState back = snapshot::decode(blob, key);
  double restore_s = std::chrono::duration<double>(Steady::now() - t0).count();
  if (back.memory.size() != state.memory.size())
    fail(PVM_ERR_INTERNAL, "calibration round-trip lost data");

  CalibrationTable t;
  t.checkpoint_s_per_byte = checkpoint_s / bytes;
  t.compress_s_per_byte = compress_s / bytes;
  t.restore_s_per_byte = restore_s / bytes;
  t.checkpoint_fixed_s = t.compress_fixed_s = t.restore_fixed_s = 0.0005;
  t.compression_ratio = static_cast<double>(blob.size()) / bytes;
  return t;
}

double estimate_migration_time(const WorkloadProfile& profile,
                               const CalibrationTable& c) {
  double bytes = static_cast<double>(profile.snapshot_bytes);
  double compressed = bytes * c.compression_ratio;
  double transfer_s = compressed * 8.0 / profile.bandwidth_bps;
  return c.checkpoint_fixed_s + bytes * c.checkpoint_s_per_byte +
         c.compress_fixed_s + bytes * c.compress_s_per_byte + transfer_s +
         c.restore_fixed_s + bytes * c.restore_s_per_byte;
}

/* ------------------------------------------------------------------ */
/* Decision rule                                                      */
/* ------------------------------------------------------------------ */

std::string Placement::describe() const {
  std::ostringstream out;
  out << (action == Action::Migrate ? "MIGRATE" : "STAY");
  if (action == Action::Stay) out << " (" << reason << ")";
  out << "\n";
  char line[128];
  std::snprintf(line, sizeof line, "  sensitivity rule      %s\n",
                sensitivity_ok ? "ok" : "violated");
  out << line;
  std::snprintf(line, sizeof line, "  speedup ratio         %.3f (>= %.1f %s)\n",
                speedup_ratio, kSpeedupThreshold, ratio_ok ? "ok" : "violated");
  out << line;
  std::snprintf(line, sizeof line, "  duration vs 2x move   %s (M = %.3f s)\n",
                duration_ok ? "ok" : "violated", migration_s);
  out << line;
  std::snprintf(line, sizeof line, "  expected net speedup  %.3f\n", net_speedup);
  out << line;
  return out.str();
}

Placement decide(const WorkloadProfile& profile, double migration_time_s) {
  Placement p;
  p.migration_s = migration_time_s;
  p.speedup_ratio = profile.t_local_s / profile.t_remote_s;
  p.net_speedup = profile.t_local_s / (profile.t_remote_s + migration_time_s);
  p.sensitivity_ok = !(profile.sensitivity == Sensitivity::Restricted &&
                       profile.target_trust != TierTrust::TrustedEnclave);
  p.ratio_ok = p.speedup_ratio >= kSpeedupThreshold;
  p.duration_ok = profile.t_local_s > 2.0 * migration_time_s;

  if (!p.sensitivity_ok) {
    p.reason = "sensitivity";
  } else if (!p.ratio_ok) {
    p.reason = "speedup-threshold";
  } else if (!p.duration_ok) {
    p.reason = "duration-threshold";
  } else {
    p.action = Placement::Action::Migrate;
  }
  return p;
}

Placement decide(const WorkloadProfile& profile,
                 const CalibrationTable& calibration) {
  return decide(profile, estimate_migration_time(profile, calibration));
}

}  // namespace pvm::sched

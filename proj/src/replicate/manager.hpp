#ifndef PVM_REPLICATE_MANAGER_HPP
#define PVM_REPLICATE_MANAGER_HPP

#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "replicate/clock.hpp"
#include "vm/interpreter.hpp"

namespace pvm::replicate {

enum class Tier { Cloud, Edge, Local };
const char* tier_name(Tier tier);
double tier_quality(Tier tier);  // 1.0 / 0.6 / 0.35

inline constexpr double kLossThreshold = 0.25;

struct Health {
  bool reachable = true;
  double latency_ms = 0;
  double loss = 0;
  double bandwidth_bps = 1e9;

  static Health unreachable() { return {false, 0, 1.0, 0}; }
};

struct ReplicaDescriptor {
  uint32_t id = 0;
  Tier tier = Tier::Local;
  VectorClock clock;
  Digest32 state_digest{};
  Health health;
  double updated_at = 0;  // scenario time of the last state change
};

// Highest-quality replica that is reachable within the latency budget
// and under the loss threshold; the Local replica is the fallback when
// nothing qualifies. Ties break to the lower id. Throws
// NoReplicaAvailable when there is no Local replica and nothing
// reachable qualifies.
uint32_t select_active(const std::vector<ReplicaDescriptor>& replicas,
                       double latency_budget_ms);

struct SyncReport {
  uint32_t pages_transferred = 0;
  uint32_t total_pages = 0;
  double fraction = 0;
  double duration_ms = 0;
  VectorClock resulting_clock;
  bool conflict = false;  // clocks were concurrent; resolution applied
};

// One workspace, many replicas at different tiers. Descriptor mutations
// are serialized; reads return snapshots.
class ReplicaManager {
 public:
  explicit ReplicaManager(std::shared_ptr<const vm::Module> module);

  uint32_t register_replica(Tier tier, vm::ExecutionState state);
  std::vector<ReplicaDescriptor> descriptors() const;
  void set_health(uint32_t id, const Health& health, double at = 0);
  uint32_t active(double latency_budget_ms) const;

  // Scenario hook: the active replica's workload dirties memory.
  void dirty_pages(uint32_t id, const std::vector<uint32_t>& pages,
                   uint64_t seed, double at = 0);

  // Incremental page-delta sync from source to target. Concurrent clocks
  // resolve by tier, then newer update time, then lower id; the merged
  // clock includes the source's increment for this sync event.
  SyncReport sync(uint32_t source, uint32_t target, const Key32& key,
                  double at = 0);

  // Repeated rounds of syncing every replica from the resolution winner
  // until all digests agree. Returns rounds used.
  size_t converge(const Key32& key, size_t max_rounds, double at = 0);

  bool digests_equal() const;
  const vm::ExecutionState& state_of(uint32_t id) const;

 private:
  struct Replica {
    ReplicaDescriptor descriptor;
    vm::ExecutionState state;
  };

  uint32_t resolution_winner_locked() const;
  SyncReport sync_locked(uint32_t source, uint32_t target, const Key32& key,
                         double at);

  std::shared_ptr<const vm::Module> module_;
  Digest32 measurement_;
  mutable std::mutex mutex_;
  std::vector<Replica> replicas_;
};

struct FailoverEvent {
  double sim_time_s = 0;
  std::string cause;
  uint32_t activated = 0;
  bool changed = false;
  double decision_wall_ms = 0;
};

struct HealthChange {
  double at_s = 0;
  uint32_t replica = 0;
  Health health;
  std::string cause;
};

// Replays a schedule of health changes (simulated time), re-running
// selection after each and timing the decision path in wall clock.
std::vector<FailoverEvent> run_failover_monitor(
    ReplicaManager& manager, std::vector<HealthChange> schedule,
    double latency_budget_ms);

}  // namespace pvm::replicate

#endif

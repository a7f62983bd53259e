#include "replicate/manager.hpp"

#include <algorithm>
#include <chrono>

#include "snapshot/snapshot.hpp"

namespace pvm::replicate {

const char* tier_name(Tier tier) {
  switch (tier) {
    case Tier::Cloud: return "cloud";
    case Tier::Edge: return "edge";
    case Tier::Local: return "local";
  }
  return "?";
}

double tier_quality(Tier tier) {
  switch (tier) {
    case Tier::Cloud: return 1.0;
    case Tier::Edge: return 0.6;
    case Tier::Local: return 0.35;
  }
  return 0;
}

uint32_t select_active(const std::vector<ReplicaDescriptor>& replicas,
                       double latency_budget_ms) {
  const ReplicaDescriptor* best = nullptr;
  for (const ReplicaDescriptor& r : replicas) {
    if (!r.health.reachable) continue;
    if (r.health.latency_ms > latency_budget_ms) continue;
    if (r.health.loss > kLossThreshold) continue;
    if (!best || tier_quality(r.tier) > tier_quality(best->tier) ||
        (tier_quality(r.tier) == tier_quality(best->tier) && r.id < best->id))
      best = &r;
  }
  if (best) return best->id;
  // Degraded mode: the on-device replica carries the load.
  const ReplicaDescriptor* local = nullptr;
  for (const ReplicaDescriptor& r : replicas)
    if (r.tier == Tier::Local && (!local || r.id < local->id)) local = &r;
  if (local) return local->id;
  fail(PVM_ERR_NO_REPLICA_AVAILABLE,
       "no reachable replica and no local fallback");
}

ReplicaManager::ReplicaManager(std::shared_ptr<const vm::Module> module)
    : module_(std::move(module)), measurement_(module_->measurement()) {}

uint32_t ReplicaManager::register_replica(Tier tier, vm::ExecutionState state) {
  if (state.module_measurement != measurement_)
    fail(PVM_ERR_MEASUREMENT_MISMATCH,
         "replica state comes from a different module");
  std::lock_guard lock(mutex_);
  uint32_t id = static_cast<uint32_t>(replicas_.size());
  Replica r;
  r.descriptor.id = id;
  r.descriptor.tier = tier;
  r.descriptor.clock.counters[id] = 0;
  r.descriptor.state_digest = state.digest();
  r.descriptor.health = Health{};
  r.state = std::move(state);
  replicas_.push_back(std::move(r));
  return id;
}

std::vector<ReplicaDescriptor> ReplicaManager::descriptors() const {
  std::lock_guard lock(mutex_);
  std::vector<ReplicaDescriptor> out;
  out.reserve(replicas_.size());
  for (const Replica& r : replicas_) out.push_back(r.descriptor);
  return out;
}

void ReplicaManager::set_health(uint32_t id, const Health& health, double at) {
  std::lock_guard lock(mutex_);
  if (id >= replicas_.size()) fail(PVM_ERR_INDEX_OUT_OF_RANGE, "no such replica");
  replicas_[id].descriptor.health = health;
  (void)at;
}

uint32_t ReplicaManager::active(double latency_budget_ms) const {
  return select_active(descriptors(), latency_budget_ms);
}

void ReplicaManager::dirty_pages(uint32_t id, const std::vector<uint32_t>& pages,
                                 uint64_t seed, double at) {
  std::lock_guard lock(mutex_);
  if (id >= replicas_.size()) fail(PVM_ERR_INDEX_OUT_OF_RANGE, "no such replica");
  Replica& r = replicas_[id];
  SplitMix64 rng(seed);
  for (uint32_t page : pages) {
    size_t base = static_cast<size_t>(page) * vm::kPageSize;
    if (base + vm::kPageSize > r.state.memory.size())
      fail(PVM_ERR_INDEX_OUT_OF_RANGE, "dirty page beyond replica memory");
    for (int i = 0; i < 64; i++)
      r.state.memory[base + rng.below(vm::kPageSize)] =
          static_cast<uint8_t>(rng.next());
  }
  r.descriptor.clock.bump(id);
  r.descriptor.state_digest = r.state.digest();
  r.descriptor.updated_at = at;
}

uint32_t ReplicaManager::resolution_winner_locked() const {
  // Dominant clock wins outright; concurrent states resolve by tier,
  // then newer update, then lower id.
  const Replica* winner = &replicas_[0];
  for (size_t i = 1; i < replicas_.size(); i++) {
    const Replica& r = replicas_[i];
    VectorClock::Order order = VectorClock::compare(r.descriptor.clock,
                                                    winner->descriptor.clock);
    bool take = false;
    if (order == VectorClock::Order::After) {
      take = true;
    } else if (order == VectorClock::Order::Concurrent) {
      double qa = tier_quality(r.descriptor.tier);
      double qb = tier_quality(winner->descriptor.tier);
      if (qa != qb) take = qa > qb;
      else if (r.descriptor.updated_at != winner->descriptor.updated_at)
        take = r.descriptor.updated_at > winner->descriptor.updated_at;
      else
        take = r.descriptor.id < winner->descriptor.id;
    }
    if (take) winner = &r;
  }
  return winner->descriptor.id;
}

SyncReport ReplicaManager::sync(uint32_t source, uint32_t target,
                                const Key32& key, double at) {
  std::lock_guard lock(mutex_);
  return sync_locked(source, target, key, at);
}

SyncReport ReplicaManager::sync_locked(uint32_t source, uint32_t target,
                                       const Key32& key, double at) {
  if (source >= replicas_.size() || target >= replicas_.size())
    fail(PVM_ERR_INDEX_OUT_OF_RANGE, "no such replica");
  if (source == target) fail(PVM_ERR_USAGE, "replica cannot sync with itself");
  Replica& src = replicas_[source];
  Replica& tgt = replicas_[target];

  using Order = VectorClock::Order;
  Order order = VectorClock::compare(src.descriptor.clock, tgt.descriptor.clock);
  if (order == Order::Before)
    fail(PVM_ERR_CLOCK_ORDER, "source clock is strictly behind the target");

  SyncReport report;
  report.conflict = order == Order::Concurrent;
  report.total_pages =
      static_cast<uint32_t>(tgt.state.memory.size() / vm::kPageSize);

  auto t0 = std::chrono::steady_clock::now();
  bool source_wins = true;
  if (report.conflict) {
    double qs = tier_quality(src.descriptor.tier);
    double qt = tier_quality(tgt.descriptor.tier);
    if (qs != qt) source_wins = qs > qt;
    else if (src.descriptor.updated_at != tgt.descriptor.updated_at)
      source_wins = src.descriptor.updated_at > tgt.descriptor.updated_at;
    else
      source_wins = src.descriptor.id < tgt.descriptor.id;
  }
  if (source_wins && src.descriptor.state_digest != tgt.descriptor.state_digest) {
    Bytes delta = snapshot::make_delta(tgt.state, src.state, key);
    report.pages_transferred =
        static_cast<uint32_t>(snapshot::delta_pages(delta).size());
    tgt.state = snapshot::apply_delta(tgt.state, delta, key);
    tgt.descriptor.state_digest = tgt.state.digest();
    tgt.descriptor.updated_at = at;
  }
  report.duration_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                t0)
          .count();
  report.fraction = report.total_pages == 0
                        ? 0.0
                        : static_cast<double>(report.pages_transferred) /
                              report.total_pages;

  // The sync itself is an event at the source; stamp then merge.
  src.descriptor.clock.bump(source);
  VectorClock merged =
      VectorClock::merge(src.descriptor.clock, tgt.descriptor.clock);
  tgt.descriptor.clock = merged;
  src.descriptor.clock = merged;
  report.resulting_clock = merged;
  return report;
}

size_t ReplicaManager::converge(const Key32& key, size_t max_rounds, double at) {
  for (size_t round = 1; round <= max_rounds; round++) {
    uint32_t winner;
    {
      std::lock_guard lock(mutex_);
      if (replicas_.empty()) return 0;
      winner = resolution_winner_locked();
      for (Replica& r : replicas_) {
        if (r.descriptor.id == winner) continue;
        VectorClock::Order order = VectorClock::compare(
            replicas_[winner].descriptor.clock, r.descriptor.clock);
        if (order != VectorClock::Order::Before)
          sync_locked(winner, r.descriptor.id, key, at);
      }
    }
    if (digests_equal()) return round;
  }
  return max_rounds;
}

bool ReplicaManager::digests_equal() const {
  std::lock_guard lock(mutex_);
  for (size_t i = 1; i < replicas_.size(); i++)
    if (replicas_[i].descriptor.state_digest !=
        replicas_[0].descriptor.state_digest)
      return false;
  return true;
}

const vm::ExecutionState& ReplicaManager::state_of(uint32_t id) const {
  std::lock_guard lock(mutex_);
  if (id >= replicas_.size()) fail(PVM_ERR_INDEX_OUT_OF_RANGE, "no such replica");
  return replicas_[id].state;
}

std::vector<FailoverEvent> run_failover_monitor(
    ReplicaManager& manager, std::vector<HealthChange> schedule,
    double latency_budget_ms) {
  std::stable_sort(schedule.begin(), schedule.end(),
                   [](const HealthChange& a, const HealthChange& b) {
                     return a.at_s < b.at_s;
                   });
  std::vector<FailoverEvent> log;
  uint32_t current = manager.active(latency_budget_ms);
  for (const HealthChange& change : schedule) {
    manager.set_health(change.replica, change.health, change.at_s);
    auto t0 = std::chrono::steady_clock::now();
    uint32_t chosen = manager.active(latency_budget_ms);
    double wall_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
    FailoverEvent event;
    event.sim_time_s = change.at_s;
    event.cause = change.cause;
    event.activated = chosen;
    event.changed = chosen != current;
    event.decision_wall_ms = wall_ms;
    log.push_back(event);
    current = chosen;
  }
  return log;
}

}  // namespace pvm::replicate

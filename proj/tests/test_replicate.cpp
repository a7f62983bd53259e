#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "replicate/manager.hpp"
#include "support/migrate_harness.hpp"

using namespace pvm;
using namespace pvm::replicate;
using pvm::testsupport::fixture_module;

static pvm_status code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return PVM_OK;
}

static Key32 sync_key() {
  Key32 k{};
  k[0] = 9;
  return k;
}

namespace {

// Manager pre-loaded with one replica per tier, all from the same
// captured workspace state.
struct Fleet {
  std::shared_ptr<const vm::Module> module = fixture_module("memfill.pasm");
  ReplicaManager manager{module};
  uint32_t cloud, edge, local;

  Fleet() {
    vm::Instance inst(module, vm::PolicyMode::Loop);
    inst.run(vm::kNoFuelLimit, true);
    vm::ExecutionState state = inst.capture();
    cloud = manager.register_replica(Tier::Cloud, state);
    edge = manager.register_replica(Tier::Edge, state);
    local = manager.register_replica(Tier::Local, state);
  }
};

}  // namespace

/* ------------------------------------------------------------------ */
/* Vector clocks                                                      */
/* ------------------------------------------------------------------ */

TEST_CASE("clock merge follows element-wise max") {
  VectorClock a, b;
  a.counters = {{0, 1}, {1, 2}};
  b.counters = {{0, 2}, {1, 1}};
  VectorClock m = VectorClock::merge(a, b);
  CHECK(m.get(0) == 2);
  CHECK(m.get(1) == 2);
  CHECK(VectorClock::compare(a, b) == VectorClock::Order::Concurrent);

  CHECK(VectorClock::merge(a, a) == a);   // idempotent
  VectorClock empty, c;
  c.counters = {{2, 5}};
  CHECK(VectorClock::merge(empty, c) == c);  // identity
}

TEST_CASE("clock merge forms a join-semilattice") {
  SplitMix64 rng(321);
  auto random_clock = [&] {
    VectorClock c;
    for (uint32_t id = 0; id < 4; id++)
      if (rng.below(2)) c.counters[id] = rng.below(8);
    return c;
  };
  for (int trial = 0; trial < 200; trial++) {
    VectorClock a = random_clock(), b = random_clock(), c = random_clock();
    REQUIRE(VectorClock::merge(a, b) == VectorClock::merge(b, a));
    REQUIRE(VectorClock::merge(VectorClock::merge(a, b), c) ==
            VectorClock::merge(a, VectorClock::merge(b, c)));
    REQUIRE(VectorClock::merge(a, a) == a);
    // The merge dominates both inputs.
    VectorClock m = VectorClock::merge(a, b);
    REQUIRE(VectorClock::compare(m, a) != VectorClock::Order::Before);
    REQUIRE(VectorClock::compare(m, a) != VectorClock::Order::Concurrent);
  }
}

/* ------------------------------------------------------------------ */
/* Registration and selection                                         */
/* ------------------------------------------------------------------ */

TEST_CASE("registration assigns ids and fresh clocks") {
  Fleet fleet;
  auto descriptors = fleet.manager.descriptors();
  REQUIRE(descriptors.size() == 3);
  CHECK(descriptors[0].tier == Tier::Cloud);
  CHECK(descriptors[1].tier == Tier::Edge);
  CHECK(descriptors[2].tier == Tier::Local);
  CHECK(descriptors[0].clock.get(0) == 0);
  CHECK(fleet.manager.digests_equal());
}

TEST_CASE("mismatched module measurement cannot join") {
  Fleet fleet;
  auto other = fixture_module("sum10.pasm");
  vm::Instance inst(other, vm::PolicyMode::Loop);
  vm::ExecutionState state = inst.capture();
  CHECK(code_of([&] { fleet.manager.register_replica(Tier::Edge, state); }) ==
        PVM_ERR_MEASUREMENT_MISMATCH);
}

TEST_CASE("selection prefers the highest healthy tier") {
  Fleet fleet;
  CHECK(fleet.manager.active(200) == fleet.cloud);
}

TEST_CASE("lossy cloud degrades to edge") {
  Fleet fleet;
  fleet.manager.set_health(fleet.cloud, {true, 20, 0.30, 1e9});
  CHECK(fleet.manager.active(200) == fleet.edge);
}

TEST_CASE("total disconnection falls back to local") {
  Fleet fleet;
  fleet.manager.set_health(fleet.cloud, Health::unreachable());
  fleet.manager.set_health(fleet.edge, Health::unreachable());
  // Local's own link is also marked unreachable: the on-device replica
  // still serves.
  fleet.manager.set_health(fleet.local, Health::unreachable());
  CHECK(fleet.manager.active(200) == fleet.local);
}

TEST_CASE("latency budget filters replicas") {
  Fleet fleet;
  fleet.manager.set_health(fleet.cloud, {true, 500, 0.0, 1e9});
  CHECK(fleet.manager.active(200) == fleet.edge);
}

TEST_CASE("no local and nothing reachable is an error") {
  std::vector<ReplicaDescriptor> descriptors(2);
  descriptors[0] = {0, Tier::Cloud, {}, {}, Health::unreachable(), 0};
  descriptors[1] = {1, Tier::Edge, {}, {}, Health::unreachable(), 0};
  CHECK(code_of([&] { select_active(descriptors, 200); }) ==
        PVM_ERR_NO_REPLICA_AVAILABLE);
}

TEST_CASE("selection is deterministic under ties") {
  std::vector<ReplicaDescriptor> descriptors(3);
  descriptors[0] = {0, Tier::Edge, {}, {}, Health{}, 0};
  descriptors[1] = {1, Tier::Edge, {}, {}, Health{}, 0};
  descriptors[2] = {2, Tier::Edge, {}, {}, Health{}, 0};
  for (int i = 0; i < 5; i++) CHECK(select_active(descriptors, 200) == 0);
}

/* ------------------------------------------------------------------ */
/* Sync                                                               */
/* ------------------------------------------------------------------ */

TEST_CASE("identical states sync zero pages") {
  Fleet fleet;
  SyncReport report = fleet.manager.sync(fleet.cloud, fleet.edge, sync_key());
  CHECK(report.pages_transferred == 0);
  CHECK(report.fraction == 0);
  CHECK(report.resulting_clock.get(fleet.cloud) == 1);
}

TEST_CASE("a 120-of-1000-page workload syncs a 12% fraction") {
  // Dedicated large-memory module: 1000 pages.
  auto module = std::make_shared<vm::Module>(
      vm::assemble(".func main 0 0\n checkpoint\n const.i64 0\n halt\n.end\n"
                   ".memory 1000"));
  ReplicaManager manager(module);
  vm::Instance inst(module, vm::PolicyMode::Loop);
  vm::ExecutionState state = inst.capture();
  uint32_t cloud = manager.register_replica(Tier::Cloud, state);
  uint32_t edge = manager.register_replica(Tier::Edge, state);

  std::vector<uint32_t> pages;
  SplitMix64 rng(5150);
  while (pages.size() < 120) {
    uint32_t p = static_cast<uint32_t>(rng.below(1000));
    if (std::find(pages.begin(), pages.end(), p) == pages.end())
      pages.push_back(p);
  }
  manager.dirty_pages(cloud, pages, 777);

  SyncReport report = manager.sync(cloud, edge, sync_key());
  CHECK(report.total_pages == 1000);
  CHECK(report.pages_transferred == 120);
  CHECK(report.fraction == doctest::Approx(0.12));
  CHECK(manager.digests_equal());
}

TEST_CASE("sync from a strictly older replica is rejected") {
  Fleet fleet;
  fleet.manager.dirty_pages(fleet.cloud, {0}, 1);
  // Edge's clock is now strictly behind cloud's.
  CHECK(code_of([&] { fleet.manager.sync(fleet.edge, fleet.cloud, sync_key()); }) ==
        PVM_ERR_CLOCK_ORDER);
}

TEST_CASE("concurrent replicas resolve by tier and merge clocks") {
  Fleet fleet;
  fleet.manager.dirty_pages(fleet.cloud, {0}, 1, 1.0);
  fleet.manager.dirty_pages(fleet.edge, {1}, 2, 2.0);
  auto before = fleet.manager.descriptors();
  CHECK(VectorClock::compare(before[fleet.cloud].clock,
                             before[fleet.edge].clock) ==
        VectorClock::Order::Concurrent);

  SyncReport report = fleet.manager.sync(fleet.cloud, fleet.edge, sync_key());
  CHECK(report.conflict);
  // Cloud outranks edge, so cloud's state wins despite edge's newer write.
  auto after = fleet.manager.descriptors();
  CHECK(after[fleet.edge].state_digest == after[fleet.cloud].state_digest);
  // Merged clock covers both sides plus the sync event itself.
  CHECK(report.resulting_clock.get(fleet.cloud) == 2);  // dirty + sync
  CHECK(report.resulting_clock.get(fleet.edge) == 1);
}

TEST_CASE("convergence after divergence within replica-count rounds") {
  Fleet fleet;
  fleet.manager.dirty_pages(fleet.cloud, {0, 1}, 11, 1.0);
  fleet.manager.dirty_pages(fleet.edge, {1}, 12, 1.5);
  fleet.manager.dirty_pages(fleet.local, {0}, 13, 2.0);
  CHECK(!fleet.manager.digests_equal());
  size_t rounds = fleet.manager.converge(sync_key(), 10);
  CHECK(fleet.manager.digests_equal());
  CHECK(rounds <= 3);
}

/* ------------------------------------------------------------------ */
/* Failover monitor                                                   */
/* ------------------------------------------------------------------ */

TEST_CASE("disconnect triggers local activation within 200 ms wall clock") {
  Fleet fleet;
  std::vector<HealthChange> schedule = {
      {10.0, fleet.cloud, Health::unreachable(), "cloud disconnect"},
      {10.0, fleet.edge, Health::unreachable(), "edge disconnect"},
  };
  auto log = run_failover_monitor(fleet.manager, schedule, 200);
  REQUIRE(log.size() == 2);
  CHECK(log[1].activated == fleet.local);
  CHECK(log[1].changed);
  for (const FailoverEvent& event : log) CHECK(event.decision_wall_ms < 200);
}

TEST_CASE("restored connectivity reactivates the cloud and clocks converge") {
  Fleet fleet;
  std::vector<HealthChange> schedule = {
      {5.0, fleet.cloud, Health::unreachable(), "disconnect"},
      {20.0, fleet.cloud, Health{}, "restore"},
  };
  auto log = run_failover_monitor(fleet.manager, schedule, 200);
  REQUIRE(log.size() == 2);
  CHECK(log[0].activated == fleet.edge);
  CHECK(log[1].activated == fleet.cloud);

  // Writes made while degraded flow back after the link returns.
  fleet.manager.dirty_pages(fleet.edge, {1}, 31, 12.0);
  size_t rounds = fleet.manager.converge(sync_key(), 10, 21.0);
  CHECK(rounds <= 3);
  CHECK(fleet.manager.digests_equal());
  auto descriptors = fleet.manager.descriptors();
  CHECK(VectorClock::compare(descriptors[fleet.cloud].clock,
                             descriptors[fleet.edge].clock) !=
        VectorClock::Order::Concurrent);
}

TEST_CASE("no health changes produce an empty event log") {
  Fleet fleet;
  CHECK(run_failover_monitor(fleet.manager, {}, 200).empty());
}

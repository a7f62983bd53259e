#ifndef PVM_REPLICATE_CLOCK_HPP
#define PVM_REPLICATE_CLOCK_HPP

#include <map>
#include <string>

#include <cstdint>

namespace pvm::replicate {

// Per-replica counter map merged by element-wise max. Absent entries
// read as zero, so the merge forms a join-semilattice.
struct VectorClock {
  std::map<uint32_t, uint64_t> counters;

  uint64_t get(uint32_t id) const {
    auto it = counters.find(id);
    return it == counters.end() ? 0 : it->second;
  }
  void bump(uint32_t id) { counters[id]++; }

  enum class Order { Equal, Before, After, Concurrent };

  static VectorClock merge(const VectorClock& a, const VectorClock& b);
  static Order compare(const VectorClock& a, const VectorClock& b);

  bool operator==(const VectorClock&) const = default;
  std::string str() const;
};

}  // namespace pvm::replicate

#endif

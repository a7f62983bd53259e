#include "replicate/clock.hpp"

#include <sstream>

namespace pvm::replicate {

VectorClock VectorClock::merge(const VectorClock& a, const VectorClock& b) {
  VectorClock out = a;
  for (const auto& [id, count] : b.counters) {
    uint64_t& slot = out.counters[id];
    if (count > slot) slot = count;
  }
  return out;
}

VectorClock::Order VectorClock::compare(const VectorClock& a,
                                        const VectorClock& b) {
  bool a_ahead = false, b_ahead = false;
  auto scan = [&](const VectorClock& x, const VectorClock& y, bool& ahead) {
    for (const auto& [id, count] : x.counters)
      if (count > y.get(id)) {
        ahead = true;
        return;
      }
  };
  scan(a, b, a_ahead);
  scan(b, a, b_ahead);
  if (a_ahead && b_ahead) return Order::Concurrent;
  if (a_ahead) return Order::After;
  if (b_ahead) return Order::Before;
  return Order::Equal;
}

std::string VectorClock::str() const {
  std::ostringstream out;
  out << "{";
  bool first = true;
  for (const auto& [id, count] : counters) {
    if (count == 0) continue;
    if (!first) out << ",";
    out << "r" << id << ":" << count;
    first = false;
  }
  out << "}";
  return out.str();
}

}  // namespace pvm::replicate

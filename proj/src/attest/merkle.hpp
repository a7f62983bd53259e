#ifndef PVM_ATTEST_MERKLE_HPP
#define PVM_ATTEST_MERKLE_HPP

#include <string>
#include <utility>
#include <vector>

#include "support/bytes.hpp"

namespace pvm::attest {

// Merkle tree over model components for incremental attestation. The
// shape is the canonical complete binary tree over the leaves in order,
// duplicating the last node at odd levels; a single-leaf tree's root is
// that leaf's digest.
class ComponentTree {
 public:
  static ComponentTree build(
      std::vector<std::pair<std::string, Digest32>> leaves);

  const Digest32& root() const { return levels_.back()[0]; }
  size_t leaf_count() const { return levels_[0].size(); }
  const Digest32& leaf(size_t index) const { return levels_[0][index]; }
  const std::string& name(size_t index) const { return names_[index]; }

  // Replaces one leaf digest and recomputes only the path to the root.
  // Returns the number of internal nodes recomputed (at most the tree
  // height). Throws IndexOutOfRange.
  size_t update_leaf(size_t index, const Digest32& digest);

 private:
  ComponentTree() = default;
  void rebuild_level(size_t level, size_t index);

  std::vector<std::string> names_;
  std::vector<std::vector<Digest32>> levels_;  // [0] = leaves, back() = root
};

}  // namespace pvm::attest

#endif

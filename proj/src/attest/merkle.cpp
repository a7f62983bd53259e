#include "attest/merkle.hpp"

#include "support/crypto.hpp"

namespace pvm::attest {

namespace {

Digest32 join(const Digest32& left, const Digest32& right) {
  Bytes cat;
  cat.reserve(64);
  cat.insert(cat.end(), left.begin(), left.end());
  cat.insert(cat.end(), right.begin(), right.end());
  return crypto::sha256(cat);
}

}  // namespace

ComponentTree ComponentTree::build(
    std::vector<std::pair<std::string, Digest32>> leaves) {
  if (leaves.empty())
    fail(PVM_ERR_INDEX_OUT_OF_RANGE, "component tree needs at least one leaf");
  ComponentTree tree;
  tree.levels_.emplace_back();
  for (auto& [name, digest] : leaves) {
    tree.names_.push_back(std::move(name));
    tree.levels_[0].push_back(digest);
  }
  size_t level = 0;
  while (tree.levels_[level].size() > 1) {
    const auto& cur = tree.levels_[level];
    std::vector<Digest32> next((cur.size() + 1) / 2);
    for (size_t i = 0; i < next.size(); i++) {
      const Digest32& left = cur[2 * i];
      const Digest32& right = (2 * i + 1 < cur.size()) ? cur[2 * i + 1] : left;
      next[i] = join(left, right);
    }
    tree.levels_.push_back(std::move(next));
    level++;
  }
  return tree;
}

void ComponentTree::rebuild_level(size_t level, size_t index) {
  const auto& cur = levels_[level];
  const Digest32& left = cur[2 * index];
  const Digest32& right =
      (2 * index + 1 < cur.size()) ? cur[2 * index + 1] : left;
  levels_[level + 1][index] = join(left, right);
}

size_t ComponentTree::update_leaf(size_t index, const Digest32& digest) {
  if (index >= leaf_count())
    fail(PVM_ERR_INDEX_OUT_OF_RANGE,
         "leaf index " + std::to_string(index) + " out of range");
  levels_[0][index] = digest;
  size_t recomputed = 0;
  size_t node = index;
  for (size_t level = 0; level + 1 < levels_.size(); level++) {
    node /= 2;
    rebuild_level(level, node);
    recomputed++;
  }
  return recomputed;
}

}  // namespace pvm::attest

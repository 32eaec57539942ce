#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sucm/common.hpp"
#include "sucm/taxonomy.hpp"

namespace sucm {

enum class HsStrategy : std::uint8_t { balanced = 0, huffman = 1 };

struct HsStep {
  std::int32_t node = -1;  // HS internal node id (forest-global inside HsForest paths)
  bool left = true;        // encodes the +/-1 sign of the sigmoid decision
};

struct HsPath {
  std::vector<HsStep> steps;  // L(i)-1 decisions; empty for a singleton subcategory
};

// Strictly binary tree over the apps of one subcategory. Internal node ids are
// tree-local 0..num_internal-1; a child slot addresses either another internal
// node or a leaf position in the ordered app list the tree was built over.
class HsTree {
 public:
  struct Node {
    std::int32_t left = -1;
    std::int32_t right = -1;
    bool left_is_leaf = false;
    bool right_is_leaf = false;
  };

  static HsTree build_balanced(std::size_t num_apps);
  // freq per leaf position; tie_ids break equal-frequency merges (smallest
  // contained id ranks first and the lower-ranked subtree goes left).
  static HsTree build_huffman(std::span<const double> freq, std::span<const std::int64_t> tie_ids);
  static HsTree from_parts(int num_leaves, std::int32_t root, std::vector<Node> nodes);

  int num_internal() const { return static_cast<int>(nodes_.size()); }
  int num_leaves() const { return num_leaves_; }
  std::int32_t root() const { return root_; }  // -1 for a single-leaf tree
  const Node& node(std::int32_t id) const { return nodes_[static_cast<std::size_t>(id)]; }
  const HsPath& path(std::size_t leaf_pos) const;
  int max_depth() const;

 private:
  void build_paths();

  std::vector<Node> nodes_;
  std::int32_t root_ = -1;
  int num_leaves_ = 0;
  std::vector<HsPath> paths_;  // per leaf position
};

// One HS tree per leaf-level subcategory z_M, in taxonomy load order; the
// trees' internal nodes share one dense global index space for parameters.
class HsForest {
 public:
  static HsForest build(const CategoryTree& tree, HsStrategy strategy,
                        std::span<const std::int64_t> freq_by_app = {});
  static HsForest from_parts(HsStrategy strategy, std::vector<HsTree> trees,
                             std::vector<NodeId> owners, const CategoryTree& tree);

  HsStrategy strategy() const { return strategy_; }
  int total_internal() const { return total_internal_; }
  std::size_t num_trees() const { return trees_.size(); }
  const HsTree& tree_at(std::size_t t) const { return trees_[t]; }
  NodeId owner_at(std::size_t t) const { return owners_[t]; }
  int base_at(std::size_t t) const { return bases_[t]; }
  const HsPath& path(AppIdx a) const;  // steps carry global node ids

 private:
  void index(const CategoryTree& tree);

  HsStrategy strategy_ = HsStrategy::balanced;
  std::vector<HsTree> trees_;
  std::vector<NodeId> owners_;
  std::vector<int> bases_;
  std::vector<HsPath> global_paths_;  // per AppIdx
  int total_internal_ = 0;
};

// Builds the binary tree for one subcategory's ordered app list; huffman
// requires a frequency per app (zero allowed).
HsTree build_hs_tree(std::span<const std::int64_t> app_ids, HsStrategy strategy,
                     std::span<const double> freq = {});

}  // namespace sucm

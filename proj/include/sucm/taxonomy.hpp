#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sucm/common.hpp"

namespace sucm {

enum class NodeKind : std::uint8_t { internal = 0, leaf = 1 };

struct TaxonomyEdge {
  std::int64_t id = 0;
  std::optional<std::int64_t> parent;  // empty for the root
  NodeKind kind = NodeKind::internal;
  std::string name;
};

// Unique root-to-app path. internal_nodes holds [z_1 .. z_M]; the root is the
// implicit origin and the last entry is the app's parent subcategory. The list
// is empty when the app hangs directly off the root.
struct ChoicePath {
  std::vector<NodeId> internal_nodes;
  NodeId leaf = kNoNode;
  std::int64_t app_id = -1;
};

// Immutable rooted category taxonomy with apps as leaves. Node ids are dense
// and follow load order, so every traversal below is reproducible run to run.
class CategoryTree {
 public:
  static CategoryTree build(std::span<const TaxonomyEdge> edges);

  // One node per line: node_id<TAB>parent_id<TAB>kind<TAB>name, root parent
  // is "-", kind in {internal, app}; lines starting with '#' are comments.
  static CategoryTree load_tsv(const std::string& path);
  void save_tsv(const std::string& path) const;

  NodeId root() const { return root_; }
  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  int num_apps() const { return static_cast<int>(leaves_.size()); }
  int num_internal() const { return static_cast<int>(internal_nodes_.size()); }

  NodeKind kind(NodeId n) const { return checked(n).kind; }
  const std::string& name(NodeId n) const { return checked(n).name; }
  int level(NodeId n) const { return checked(n).level; }
  std::int64_t ext_id(NodeId n) const { return checked(n).ext_id; }
  std::optional<NodeId> parent(NodeId n) const;
  std::span<const NodeId> children(NodeId n) const;
  std::vector<NodeId> siblings(NodeId n) const;  // excludes n itself

  std::span<const NodeId> leaves() const { return leaves_; }
  std::span<const NodeId> leaf_parents() const { return leaf_parents_; }
  bool is_leaf_parent(NodeId n) const;

  NodeId leaf_of_app(std::int64_t app_id) const;
  AppIdx app_index(std::int64_t app_id) const;
  AppIdx app_index_of_leaf(NodeId leaf) const;
  std::int64_t app_id_at(AppIdx a) const;
  NodeId leaf_at(AppIdx a) const;

  // Dense index over internal nodes (root included), used for parameter blocks.
  int internal_index(NodeId n) const;
  NodeId internal_at(int idx) const { return internal_nodes_.at(idx); }

  const ChoicePath& path_of(AppIdx a) const;
  ChoicePath choice_path(std::int64_t app_id) const;

  int max_level() const { return max_level_; }

 private:
  struct Node {
    std::int64_t ext_id = 0;
    NodeId parent = kNoNode;
    std::vector<NodeId> children;
    NodeKind kind = NodeKind::internal;
    std::string name;
    int level = 0;
  };

  const Node& checked(NodeId n) const;

  std::vector<Node> nodes_;
  NodeId root_ = kNoNode;
  std::vector<NodeId> leaves_;
  std::vector<NodeId> leaf_parents_;
  std::vector<NodeId> internal_nodes_;
  std::vector<int> internal_index_;       // NodeId -> dense internal idx, -1 for leaves
  std::vector<AppIdx> leaf_app_index_;    // NodeId -> AppIdx, -1 for internal
  std::vector<ChoicePath> paths_;         // per AppIdx
  std::unordered_map<std::int64_t, NodeId> leaf_by_app_id_;
  int max_level_ = 0;
};

}  // namespace sucm

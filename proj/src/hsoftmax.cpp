#include "sucm/hsoftmax.hpp"

#include <algorithm>
#include <queue>
#include <tuple>
#include <unordered_set>

namespace sucm {

namespace {

// recursive layout over [lo, hi): left subtree takes ceil(n/2) apps, which
// keeps the max path length at exactly ceil(log2 n)
std::pair<std::int32_t, bool> build_balanced_range(std::vector<HsTree::Node>& nodes,
                                                   std::int32_t lo, std::int32_t hi) {
  if (hi - lo == 1) return {lo, true};
  const std::int32_t id = static_cast<std::int32_t>(nodes.size());
  nodes.emplace_back();
  const std::int32_t mid = lo + (hi - lo + 1) / 2;
  auto [l, l_leaf] = build_balanced_range(nodes, lo, mid);
  auto [r, r_leaf] = build_balanced_range(nodes, mid, hi);
  nodes[static_cast<std::size_t>(id)] = {l, r, l_leaf, r_leaf};
  return {id, false};
}

}  // namespace

HsTree HsTree::build_balanced(std::size_t num_apps) {
  if (num_apps == 0) raise(Errc::EmptyAppList, "cannot build a binary tree over zero apps");
  HsTree t;
  t.num_leaves_ = static_cast<int>(num_apps);
  if (num_apps == 1) {
    t.build_paths();
    return t;
  }
  auto [root, is_leaf] = build_balanced_range(t.nodes_, 0, static_cast<std::int32_t>(num_apps));
  (void)is_leaf;
  t.root_ = root;
  t.build_paths();
  return t;
}

HsTree HsTree::build_huffman(std::span<const double> freq, std::span<const std::int64_t> tie_ids) {
  if (freq.empty()) raise(Errc::EmptyAppList, "cannot build a binary tree over zero apps");
  if (freq.size() != tie_ids.size())
    raise(Errc::InvalidArgument, "huffman needs one frequency per app");
  HsTree t;
  t.num_leaves_ = static_cast<int>(freq.size());
  if (freq.size() == 1) {
    t.build_paths();
    return t;
  }

  // subtree = (frequency, smallest contained app id, ref); smaller key is
  // merged first and goes left, which pins the tree bit-for-bit across runs
  struct Entry {
    double freq;
    std::int64_t min_id;
    std::int32_t ref;
    bool is_leaf;
    bool operator>(const Entry& o) const {
      return std::tie(freq, min_id) > std::tie(o.freq, o.min_id);
    }
  };
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> pq;
  for (std::size_t i = 0; i < freq.size(); ++i)
    pq.push({freq[i], tie_ids[i], static_cast<std::int32_t>(i), true});
  while (pq.size() > 1) {
    Entry a = pq.top();
    pq.pop();
    Entry b = pq.top();
    pq.pop();
    const std::int32_t id = static_cast<std::int32_t>(t.nodes_.size());
    t.nodes_.push_back({a.ref, b.ref, a.is_leaf, b.is_leaf});
    pq.push({a.freq + b.freq, std::min(a.min_id, b.min_id), id, false});
  }
  t.root_ = pq.top().ref;
  t.build_paths();
  return t;
}

HsTree HsTree::from_parts(int num_leaves, std::int32_t root, std::vector<Node> nodes) {
  HsTree t;
  t.num_leaves_ = num_leaves;
  t.root_ = root;
  t.nodes_ = std::move(nodes);
  if (t.num_leaves_ < 1 || t.num_internal() != t.num_leaves_ - 1)
    raise(Errc::CorruptFile, "hs tree node count does not match leaf count");
  t.build_paths();
  return t;
}

void HsTree::build_paths() {
  paths_.assign(static_cast<std::size_t>(num_leaves_), {});
  if (root_ < 0) return;  // singleton: the lone app keeps an empty path
  std::vector<std::pair<std::int32_t, HsPath>> stack;
  stack.push_back({root_, {}});
  std::size_t leaves_seen = 0;
  std::size_t internal_seen = 0;
  while (!stack.empty()) {
    auto [id, prefix] = std::move(stack.back());
    stack.pop_back();
    if (id < 0 || id >= num_internal() || ++internal_seen > nodes_.size())
      raise(Errc::CorruptFile, "hs tree internal links are not a tree");
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    for (int side = 0; side < 2; ++side) {
      const bool left = (side == 0);
      const std::int32_t child = left ? n.left : n.right;
      const bool is_leaf = left ? n.left_is_leaf : n.right_is_leaf;
      HsPath p = prefix;
      p.steps.push_back({id, left});
      if (is_leaf) {
        if (child < 0 || child >= num_leaves_ || !paths_[static_cast<std::size_t>(child)].steps.empty())
          raise(Errc::CorruptFile, "hs tree leaf slots are not a permutation");
        paths_[static_cast<std::size_t>(child)] = std::move(p);
        ++leaves_seen;
      } else {
        stack.push_back({child, std::move(p)});
      }
    }
  }
  if (leaves_seen != static_cast<std::size_t>(num_leaves_))
    raise(Errc::CorruptFile, "hs tree does not reach every app exactly once");
}

const HsPath& HsTree::path(std::size_t leaf_pos) const {
  if (leaf_pos >= paths_.size()) raise(Errc::UnknownApp, "leaf position " + std::to_string(leaf_pos));
  return paths_[leaf_pos];
}

int HsTree::max_depth() const {
  std::size_t d = 0;
  for (const auto& p : paths_) d = std::max(d, p.steps.size());
  return static_cast<int>(d);
}

HsForest HsForest::build(const CategoryTree& tree, HsStrategy strategy,
                         std::span<const std::int64_t> freq_by_app) {
  if (strategy == HsStrategy::huffman && freq_by_app.size() != static_cast<std::size_t>(tree.num_apps()))
    raise(Errc::InvalidArgument, "huffman needs one frequency per app in the taxonomy");
  HsForest f;
  f.strategy_ = strategy;
  for (NodeId zm : tree.leaf_parents()) {
    const auto kids = tree.children(zm);
    if (strategy == HsStrategy::balanced) {
      f.trees_.push_back(HsTree::build_balanced(kids.size()));
    } else {
      std::vector<double> freq(kids.size());
      std::vector<std::int64_t> ids(kids.size());
      for (std::size_t j = 0; j < kids.size(); ++j) {
        freq[j] = static_cast<double>(freq_by_app[static_cast<std::size_t>(tree.app_index_of_leaf(kids[j]))]);
        ids[j] = tree.ext_id(kids[j]);
      }
      f.trees_.push_back(HsTree::build_huffman(freq, ids));
    }
    f.owners_.push_back(zm);
  }
  f.index(tree);
  return f;
}

HsForest HsForest::from_parts(HsStrategy strategy, std::vector<HsTree> trees,
                              std::vector<NodeId> owners, const CategoryTree& tree) {
  if (trees.size() != owners.size()) raise(Errc::CorruptFile, "forest owner list size mismatch");
  HsForest f;
  f.strategy_ = strategy;
  f.trees_ = std::move(trees);
  f.owners_ = std::move(owners);
  f.index(tree);
  return f;
}

void HsForest::index(const CategoryTree& tree) {
  bases_.resize(trees_.size());
  total_internal_ = 0;
  global_paths_.assign(static_cast<std::size_t>(tree.num_apps()), {});
  std::vector<bool> covered(static_cast<std::size_t>(tree.num_apps()), false);
  for (std::size_t t = 0; t < trees_.size(); ++t) {
    bases_[t] = total_internal_;
    total_internal_ += trees_[t].num_internal();
    const auto kids = tree.children(owners_[t]);
    if (kids.size() != static_cast<std::size_t>(trees_[t].num_leaves()))
      raise(Errc::CorruptFile, "hs tree leaf count does not match its subcategory");
    for (std::size_t pos = 0; pos < kids.size(); ++pos) {
      const AppIdx a = tree.app_index_of_leaf(kids[pos]);
      if (covered[static_cast<std::size_t>(a)])
        raise(Errc::DuplicateApp, "app " + std::to_string(tree.app_id_at(a)) + " in two hs trees");
      covered[static_cast<std::size_t>(a)] = true;
      HsPath p = trees_[t].path(pos);
      for (HsStep& s : p.steps) s.node += bases_[t];
      global_paths_[static_cast<std::size_t>(a)] = std::move(p);
    }
  }
  for (std::size_t a = 0; a < covered.size(); ++a)
    if (!covered[a]) raise(Errc::UnknownApp, "app index " + std::to_string(a) + " missing from the forest");
}

const HsPath& HsForest::path(AppIdx a) const {
  if (a < 0 || static_cast<std::size_t>(a) >= global_paths_.size())
    raise(Errc::UnknownApp, "app index " + std::to_string(a));
  return global_paths_[static_cast<std::size_t>(a)];
}

HsTree build_hs_tree(std::span<const std::int64_t> app_ids, HsStrategy strategy,
                     std::span<const double> freq) {
  if (app_ids.empty()) raise(Errc::EmptyAppList, "empty app list");
  std::unordered_set<std::int64_t> seen;
  for (std::int64_t id : app_ids)
    if (!seen.insert(id).second) raise(Errc::DuplicateApp, "app " + std::to_string(id) + " listed twice");
  if (strategy == HsStrategy::balanced) return HsTree::build_balanced(app_ids.size());
  if (freq.size() != app_ids.size())
    raise(Errc::InvalidArgument, "huffman needs one frequency per app");
  return HsTree::build_huffman(freq, app_ids);
}

}  // namespace sucm

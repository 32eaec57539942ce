#include "sucm/taxonomy.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <sstream>

namespace sucm {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

}  // namespace

const CategoryTree::Node& CategoryTree::checked(NodeId n) const {
  if (n < 0 || n >= num_nodes()) raise(Errc::UnknownNode, "node id " + std::to_string(n));
  return nodes_[static_cast<std::size_t>(n)];
}

CategoryTree CategoryTree::build(std::span<const TaxonomyEdge> edges) {
  if (edges.empty()) raise(Errc::InvalidArgument, "empty edge list");

  CategoryTree t;
  t.nodes_.resize(edges.size());
  std::unordered_map<std::int64_t, NodeId> by_ext;
  by_ext.reserve(edges.size());

  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto& e = edges[i];
    if (e.id < 0) raise(Errc::InvalidArgument, "negative node id " + std::to_string(e.id));
    auto [it, inserted] = by_ext.emplace(e.id, static_cast<NodeId>(i));
    if (!inserted) {
      if (e.kind == NodeKind::leaf || t.nodes_[static_cast<std::size_t>(it->second)].kind == NodeKind::leaf)
        raise(Errc::DuplicateApp, "app id " + std::to_string(e.id) + " defined twice");
      raise(Errc::InvalidArgument, "node id " + std::to_string(e.id) + " defined twice");
    }
    Node& n = t.nodes_[i];
    n.ext_id = e.id;
    n.kind = e.kind;
    n.name = e.name;
  }

  // resolve parents in load order so children keep a stable order
  int roots = 0;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto& e = edges[i];
    if (!e.parent.has_value()) {
      ++roots;
      if (roots > 1) raise(Errc::MultipleRoots, "node " + std::to_string(e.id) + " is a second root");
      t.root_ = static_cast<NodeId>(i);
      continue;
    }
    if (*e.parent == e.id) raise(Errc::CycleDetected, "node " + std::to_string(e.id) + " is its own parent");
    auto it = by_ext.find(*e.parent);
    if (it == by_ext.end())
      raise(Errc::OrphanNode, "node " + std::to_string(e.id) + " references missing parent " + std::to_string(*e.parent));
    NodeId p = it->second;
    if (t.nodes_[static_cast<std::size_t>(p)].kind == NodeKind::leaf)
      raise(Errc::MixedChildKinds, "app " + std::to_string(*e.parent) + " used as a parent");
    t.nodes_[i].parent = p;
    t.nodes_[static_cast<std::size_t>(p)].children.push_back(static_cast<NodeId>(i));
  }
  if (roots == 0) raise(Errc::CycleDetected, "no root; parent links form a cycle");
  if (t.nodes_[static_cast<std::size_t>(t.root_)].kind == NodeKind::leaf)
    raise(Errc::InvalidArgument, "root must be an internal node");

  // levels via BFS; anything unreachable sits on a cycle
  std::vector<bool> seen(t.nodes_.size(), false);
  std::deque<NodeId> queue{t.root_};
  seen[static_cast<std::size_t>(t.root_)] = true;
  std::size_t visited = 0;
  while (!queue.empty()) {
    NodeId n = queue.front();
    queue.pop_front();
    ++visited;
    Node& node = t.nodes_[static_cast<std::size_t>(n)];
    t.max_level_ = std::max(t.max_level_, node.level);
    for (NodeId c : node.children) {
      seen[static_cast<std::size_t>(c)] = true;
      t.nodes_[static_cast<std::size_t>(c)].level = node.level + 1;
      queue.push_back(c);
    }
  }
  if (visited != t.nodes_.size())
    raise(Errc::CycleDetected, std::to_string(t.nodes_.size() - visited) + " nodes unreachable from the root");

  // children of an internal node must be all internal or all apps
  for (std::size_t i = 0; i < t.nodes_.size(); ++i) {
    const Node& n = t.nodes_[i];
    if (n.kind == NodeKind::leaf || n.children.empty()) continue;
    const NodeKind first = t.nodes_[static_cast<std::size_t>(n.children.front())].kind;
    for (NodeId c : n.children) {
      if (t.nodes_[static_cast<std::size_t>(c)].kind != first)
        raise(Errc::MixedChildKinds,
              "node " + std::to_string(n.ext_id) + " mixes app and subcategory children");
    }
  }

  // dense indices and cached choice paths, all in load order
  t.internal_index_.assign(t.nodes_.size(), -1);
  t.leaf_app_index_.assign(t.nodes_.size(), -1);
  for (std::size_t i = 0; i < t.nodes_.size(); ++i) {
    const Node& n = t.nodes_[i];
    const NodeId id = static_cast<NodeId>(i);
    if (n.kind == NodeKind::internal) {
      t.internal_index_[i] = static_cast<int>(t.internal_nodes_.size());
      t.internal_nodes_.push_back(id);
      if (!n.children.empty() &&
          t.nodes_[static_cast<std::size_t>(n.children.front())].kind == NodeKind::leaf)
        t.leaf_parents_.push_back(id);
    } else {
      t.leaf_app_index_[i] = static_cast<AppIdx>(t.leaves_.size());
      t.leaves_.push_back(id);
      t.leaf_by_app_id_.emplace(n.ext_id, id);
    }
  }

  t.paths_.resize(t.leaves_.size());
  for (std::size_t a = 0; a < t.leaves_.size(); ++a) {
    ChoicePath& p = t.paths_[a];
    p.leaf = t.leaves_[a];
    p.app_id = t.nodes_[static_cast<std::size_t>(p.leaf)].ext_id;
    NodeId cur = t.nodes_[static_cast<std::size_t>(p.leaf)].parent;
    while (cur != t.root_) {
      p.internal_nodes.push_back(cur);
      cur = t.nodes_[static_cast<std::size_t>(cur)].parent;
    }
    std::reverse(p.internal_nodes.begin(), p.internal_nodes.end());
  }
  return t;
}

std::optional<NodeId> CategoryTree::parent(NodeId n) const {
  const Node& node = checked(n);
  if (node.parent == kNoNode) return std::nullopt;
  return node.parent;
}

std::span<const NodeId> CategoryTree::children(NodeId n) const { return checked(n).children; }

std::vector<NodeId> CategoryTree::siblings(NodeId n) const {
  const Node& node = checked(n);
  std::vector<NodeId> out;
  if (node.parent == kNoNode) return out;
  for (NodeId c : nodes_[static_cast<std::size_t>(node.parent)].children)
    if (c != n) out.push_back(c);
  return out;
}

bool CategoryTree::is_leaf_parent(NodeId n) const {
  const Node& node = checked(n);
  return node.kind == NodeKind::internal && !node.children.empty() &&
         nodes_[static_cast<std::size_t>(node.children.front())].kind == NodeKind::leaf;
}

NodeId CategoryTree::leaf_of_app(std::int64_t app_id) const {
  auto it = leaf_by_app_id_.find(app_id);
  if (it == leaf_by_app_id_.end()) raise(Errc::UnknownApp, "app " + std::to_string(app_id));
  return it->second;
}

AppIdx CategoryTree::app_index(std::int64_t app_id) const {
  return leaf_app_index_[static_cast<std::size_t>(leaf_of_app(app_id))];
}

AppIdx CategoryTree::app_index_of_leaf(NodeId leaf) const {
  checked(leaf);
  const AppIdx a = leaf_app_index_[static_cast<std::size_t>(leaf)];
  if (a < 0) raise(Errc::UnknownApp, "node " + std::to_string(leaf) + " is not an app leaf");
  return a;
}

std::int64_t CategoryTree::app_id_at(AppIdx a) const {
  if (a < 0 || a >= num_apps()) raise(Errc::UnknownApp, "app index " + std::to_string(a));
  return nodes_[static_cast<std::size_t>(leaves_[static_cast<std::size_t>(a)])].ext_id;
}

NodeId CategoryTree::leaf_at(AppIdx a) const {
  if (a < 0 || a >= num_apps()) raise(Errc::UnknownApp, "app index " + std::to_string(a));
  return leaves_[static_cast<std::size_t>(a)];
}

int CategoryTree::internal_index(NodeId n) const {
  checked(n);
  const int idx = internal_index_[static_cast<std::size_t>(n)];
  if (idx < 0) raise(Errc::UnknownNode, "node " + std::to_string(n) + " is not internal");
  return idx;
}

const ChoicePath& CategoryTree::path_of(AppIdx a) const {
  if (a < 0 || a >= num_apps()) raise(Errc::UnknownApp, "app index " + std::to_string(a));
  return paths_[static_cast<std::size_t>(a)];
}

ChoicePath CategoryTree::choice_path(std::int64_t app_id) const {
  return path_of(leaf_app_index_[static_cast<std::size_t>(leaf_of_app(app_id))]);
}

CategoryTree CategoryTree::load_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::ParseError, "cannot open taxonomy file " + path);
  std::vector<TaxonomyEdge> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_tabs(line);
    if (fields.size() != 4)
      raise(Errc::ParseError, path + ":" + std::to_string(lineno) + ": expected 4 tab-separated fields");
    TaxonomyEdge e;
    try {
      e.id = std::stoll(fields[0]);
      if (fields[1] != "-") e.parent = std::stoll(fields[1]);
    } catch (const std::exception&) {
      raise(Errc::ParseError, path + ":" + std::to_string(lineno) + ": bad node/parent id");
    }
    if (fields[2] == "internal") {
      e.kind = NodeKind::internal;
    } else if (fields[2] == "app") {
      e.kind = NodeKind::leaf;
    } else {
      raise(Errc::ParseError, path + ":" + std::to_string(lineno) + ": kind must be internal|app");
    }
    e.name = fields[3];
    edges.push_back(std::move(e));
  }
  return build(edges);
}

void CategoryTree::save_tsv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) raise(Errc::ParseError, "cannot write taxonomy file " + path);
  for (const Node& n : nodes_) {
    out << n.ext_id << '\t';
    if (n.parent == kNoNode)
      out << '-';
    else
      out << nodes_[static_cast<std::size_t>(n.parent)].ext_id;
    out << '\t' << (n.kind == NodeKind::internal ? "internal" : "app") << '\t' << n.name << '\n';
  }
}

}  // namespace sucm

#include <cstdio>
#include <functional>
#include <fstream>

#include "doctest.h"
#include "oracles.hpp"
#include "sucm/taxonomy.hpp"

using namespace sucm;

namespace {

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected a sucm::Error");
  return Errc::InvalidArgument;
}

}  // namespace

TEST_CASE("two-level tree: counts, levels, kinds") {
  const CategoryTree t = CategoryTree::build(oracle::two_by_two_edges());
  CHECK(t.num_nodes() == 7);
  CHECK(t.num_apps() == 4);
  CHECK(t.num_internal() == 3);
  CHECK(t.max_level() == 2);
  CHECK(t.level(t.root()) == 0);
  for (NodeId leaf : t.leaves()) {
    CHECK(t.kind(leaf) == NodeKind::leaf);
    CHECK(t.level(leaf) == t.level(*t.parent(leaf)) + 1);
  }
}

TEST_CASE("pure-leaf root is a valid degenerate taxonomy") {
  std::vector<TaxonomyEdge> edges{{0, std::nullopt, NodeKind::internal, "root"},
                                  {1, 0, NodeKind::leaf, "only_app"}};
  const CategoryTree t = CategoryTree::build(edges);
  CHECK(t.num_apps() == 1);
  const ChoicePath p = t.choice_path(1);
  CHECK(p.internal_nodes.empty());  // M = 0: no category decision above the leaf level
  CHECK(t.is_leaf_parent(t.root()));
}

TEST_CASE("build errors") {
  SUBCASE("cycle of parents, unreachable from the root") {
    std::vector<TaxonomyEdge> edges{{0, std::nullopt, NodeKind::internal, "root"},
                                    {1, 2, NodeKind::internal, "a"},
                                    {2, 1, NodeKind::internal, "b"}};
    CHECK(code_of([&] { CategoryTree::build(edges); }) == Errc::CycleDetected);
  }
  SUBCASE("node as its own parent") {
    std::vector<TaxonomyEdge> edges{{0, std::nullopt, NodeKind::internal, "root"},
                                    {1, 1, NodeKind::internal, "a"}};
    CHECK(code_of([&] { CategoryTree::build(edges); }) == Errc::CycleDetected);
  }
  SUBCASE("multiple roots") {
    std::vector<TaxonomyEdge> edges{{0, std::nullopt, NodeKind::internal, "r1"},
                                    {1, std::nullopt, NodeKind::internal, "r2"}};
    CHECK(code_of([&] { CategoryTree::build(edges); }) == Errc::MultipleRoots);
  }
  SUBCASE("mixed internal and app children") {
    std::vector<TaxonomyEdge> edges{{0, std::nullopt, NodeKind::internal, "root"},
                                    {1, 0, NodeKind::internal, "cat"},
                                    {2, 0, NodeKind::leaf, "app"},
                                    {3, 1, NodeKind::leaf, "leafy"}};
    CHECK(code_of([&] { CategoryTree::build(edges); }) == Errc::MixedChildKinds);
  }
  SUBCASE("orphan: parent never defined") {
    std::vector<TaxonomyEdge> edges{{0, std::nullopt, NodeKind::internal, "root"},
                                    {1, 7, NodeKind::leaf, "app"}};
    CHECK(code_of([&] { CategoryTree::build(edges); }) == Errc::OrphanNode);
  }
  SUBCASE("duplicate app id") {
    std::vector<TaxonomyEdge> edges{{0, std::nullopt, NodeKind::internal, "root"},
                                    {1, 0, NodeKind::leaf, "a"},
                                    {1, 0, NodeKind::leaf, "b"}};
    CHECK(code_of([&] { CategoryTree::build(edges); }) == Errc::DuplicateApp);
  }
  SUBCASE("app used as a parent") {
    std::vector<TaxonomyEdge> edges{{0, std::nullopt, NodeKind::internal, "root"},
                                    {1, 0, NodeKind::leaf, "app"},
                                    {2, 1, NodeKind::leaf, "child_of_app"}};
    CHECK_THROWS_AS(CategoryTree::build(edges), Error);
  }
}

TEST_CASE("choice paths on the market-shaped taxonomy") {
  const CategoryTree t = CategoryTree::build(oracle::market_edges());
  SUBCASE("app two levels down traverses [Games, Arcade]") {
    const ChoicePath p = t.choice_path(100);
    REQUIRE(p.internal_nodes.size() == 2);
    CHECK(t.name(p.internal_nodes[0]) == "Games");
    CHECK(t.name(p.internal_nodes[1]) == "Arcade");
    CHECK(t.ext_id(p.leaf) == 100);
  }
  SUBCASE("app directly under a root-level category: one internal node") {
    const ChoicePath p = t.choice_path(200);
    REQUIRE(p.internal_nodes.size() == 1);
    CHECK(t.name(p.internal_nodes[0]) == "Tools");
  }
  SUBCASE("unknown app") {
    CHECK(code_of([&] { t.choice_path(999); }) == Errc::UnknownApp);
  }
}

TEST_CASE("accessors") {
  const CategoryTree t = CategoryTree::build(oracle::market_edges());
  const NodeId tools_app = t.leaf_of_app(200);
  CHECK(t.siblings(tools_app).size() == 2);
  CHECK(!t.parent(t.root()).has_value());
  CHECK(t.children(t.leaf_of_app(100)).empty());
  CHECK(code_of([&] { t.name(static_cast<NodeId>(99)); }) == Errc::UnknownNode);
  CHECK(t.siblings(t.root()).empty());
}

TEST_CASE("property: top-down path equals bottom-up parent walk") {
  for (const auto& edges : {oracle::two_by_two_edges(), oracle::market_edges()}) {
    const CategoryTree t = CategoryTree::build(edges);
    for (AppIdx a = 0; a < t.num_apps(); ++a) {
      const ChoicePath& p = t.path_of(a);
      std::vector<NodeId> up;
      NodeId cur = *t.parent(t.leaf_at(a));
      while (cur != t.root()) {
        up.push_back(cur);
        cur = *t.parent(cur);
      }
      std::reverse(up.begin(), up.end());
      CHECK(up == p.internal_nodes);
      if (!p.internal_nodes.empty())
        CHECK(static_cast<int>(p.internal_nodes.size()) == t.level(p.internal_nodes.back()));
    }
  }
}

TEST_CASE("property: exhaustive traversal reaches every app exactly once") {
  const CategoryTree t = CategoryTree::build(oracle::market_edges());
  std::vector<int> seen(static_cast<std::size_t>(t.num_apps()), 0);
  std::vector<NodeId> stack{t.root()};
  while (!stack.empty()) {
    const NodeId n = stack.back();
    stack.pop_back();
    if (t.kind(n) == NodeKind::leaf)
      ++seen[static_cast<std::size_t>(t.app_index_of_leaf(n))];
    else
      for (NodeId c : t.children(n)) stack.push_back(c);
  }
  for (int s : seen) CHECK(s == 1);
}

TEST_CASE("property: parent/child consistency") {
  const CategoryTree t = CategoryTree::build(oracle::market_edges());
  for (NodeId n = 0; n < t.num_nodes(); ++n) {
    for (NodeId c : t.children(n)) {
      CHECK(*t.parent(c) == n);
      const auto kids = t.children(n);
      CHECK(std::find(kids.begin(), kids.end(), c) != kids.end());
    }
  }
}

TEST_CASE("tsv round trip, comments, parse errors") {
  const std::string path = "test_taxonomy_tmp.tsv";
  {
    const CategoryTree t = CategoryTree::build(oracle::market_edges());
    t.save_tsv(path);
    const CategoryTree back = CategoryTree::load_tsv(path);
    REQUIRE(back.num_nodes() == t.num_nodes());
    for (NodeId n = 0; n < t.num_nodes(); ++n) {
      CHECK(back.ext_id(n) == t.ext_id(n));
      CHECK(back.kind(n) == t.kind(n));
      CHECK(back.name(n) == t.name(n));
      CHECK(back.parent(n) == t.parent(n));
    }
  }
  {
    std::ofstream f(path);
    f << "# a comment line\n0\t-\tinternal\troot\n\n1\t0\tapp\tapp_one\n";
  }
  CHECK(CategoryTree::load_tsv(path).num_apps() == 1);
  {
    std::ofstream f(path);
    f << "0\t-\tinternal\n";  // missing name column
  }
  CHECK(code_of([&] { CategoryTree::load_tsv(path); }) == Errc::ParseError);
  {
    std::ofstream f(path);
    f << "0\t-\tneither\troot\n";
  }
  CHECK_THROWS_AS(CategoryTree::load_tsv(path), Error);
  std::remove(path.c_str());
}

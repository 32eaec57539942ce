#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "sucm/model.hpp"
#include "sucm/synth.hpp"

using namespace sucm;

namespace {

struct Fixture {
  std::shared_ptr<const CategoryTree> tree;
  std::shared_ptr<const HsForest> forest;
  ModelParams mp;
  Fixture(const std::vector<TaxonomyEdge>& edges, int k, std::uint64_t seed, double scale)
      : tree(oracle::make_tree(edges)),
        forest(oracle::make_forest(tree)),
        mp(oracle::random_model(tree, forest, k, seed, scale)) {}
};

}  // namespace

TEST_CASE("affinity_node") {
  Fixture f(oracle::two_by_two_edges(), 4, 1, 0.0);
  const NodeId c1 = f.tree->leaf_of_app(11);
  const NodeId z = *f.tree->parent(c1);
  SUBCASE("all-zero parameters give zero affinity") { CHECK(affinity_node(f.mp, 0, z) == 0.0); }
  SUBCASE("unit vectors plus bias") {
    const int zi = f.tree->internal_index(z);
    for (int r = 0; r < 4; ++r) {
      f.mp.P(r, 0) = 0.5;  // (1,1,1,1)/sqrt(4)
      f.mp.Qz(r, zi) = 0.5;
    }
    f.mp.bz(zi) = 0.5;
    CHECK(affinity_node(f.mp, 0, z) == doctest::Approx(1.5).epsilon(1e-12));
  }
  SUBCASE("bias dominates when the node vector is zero") {
    const int zi = f.tree->internal_index(z);
    f.mp.bz(zi) = 3.0;
    f.mp.P.col(0).setRandom();
    CHECK(affinity_node(f.mp, 0, z) == doctest::Approx(3.0).epsilon(1e-12));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(affinity_node(f.mp, 99, z), Error);
    CHECK_THROWS_AS(affinity_node(f.mp, 0, f.tree->leaf_of_app(11)), Error);
  }
}

TEST_CASE("step_prob_category") {
  Fixture f(oracle::two_by_two_edges(), 3, 2, 0.0);
  const NodeId z1 = 1, z2 = 2;  // dense load order: root, c1, c2
  SUBCASE("equal affinities split uniformly") {
    CHECK(step_prob_category(f.mp, 0, z1) == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("affinities (1, 0) give e/(e+1)") {
    f.mp.bz(f.tree->internal_index(z1)) = 1.0;
    const double expected = std::exp(1.0) / (std::exp(1.0) + 1.0);
    CHECK(step_prob_category(f.mp, 0, z1) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(step_prob_category(f.mp, 0, z2) == doctest::Approx(1.0 - expected).epsilon(1e-12));
  }
  SUBCASE("extreme affinities stay finite via the max shift") {
    f.mp.bz(f.tree->internal_index(z1)) = 1000.0;
    CHECK(step_prob_category(f.mp, 0, z1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::isfinite(log_step_prob_category(f.mp, 0, z2)));
  }
  SUBCASE("the root is not a choice") {
    try {
      step_prob_category(f.mp, 0, f.tree->root());
      FAIL("expected RootHasNoChoice");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::RootHasNoChoice);
    }
  }
}

TEST_CASE("step_prob_hs") {
  Fixture f(oracle::two_by_two_edges(), 3, 3, 0.0);
  SUBCASE("zero scores split evenly") {
    CHECK(step_prob_hs(f.mp, 0, 0, true) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(step_prob_hs(f.mp, 0, 0, false) == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("score 2 gives sigmoid(2) left and the exact complement right") {
    f.mp.bn(0) = 2.0;
    const double left = step_prob_hs(f.mp, 0, 0, true);
    CHECK(left == doctest::Approx(0.8807970779778823).epsilon(1e-12));
    CHECK(step_prob_hs(f.mp, 0, 0, false) == doctest::Approx(0.1192029220221176).epsilon(1e-12));
    CHECK(left + step_prob_hs(f.mp, 0, 0, false) == 1.0);  // exact
  }
  SUBCASE("left + right is exactly 1 across magnitudes") {
    for (double y : {-50.0, -3.2, -1e-9, 0.0, 1e-12, 0.7, 4.0, 40.0}) {
      f.mp.bn(0) = y;
      CHECK(step_prob_hs(f.mp, 0, 0, true) + step_prob_hs(f.mp, 0, 0, false) == 1.0);
    }
  }
  SUBCASE("unknown node") { CHECK_THROWS_AS(step_prob_hs(f.mp, 0, 99, true), Error); }
}

TEST_CASE("app_prob_hs") {
  SUBCASE("singleton subcategory has probability one") {
    std::vector<TaxonomyEdge> edges{{0, std::nullopt, NodeKind::internal, "root"},
                                    {1, 0, NodeKind::leaf, "only"}};
    auto tree = oracle::make_tree(edges);
    auto forest = oracle::make_forest(tree);
    ModelParams mp = oracle::random_model(tree, forest, 3, 4, 0.8);
    CHECK(app_prob_hs(mp, 0, 0) == 1.0);
  }
  SUBCASE("zero parameters: uniform over the subcategory") {
    Fixture f(oracle::two_by_two_edges(), 3, 5, 0.0);
    CHECK(app_prob_hs(f.mp, 0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    double total = 0.0;
    std::vector<TaxonomyEdge> four{{0, std::nullopt, NodeKind::internal, "root"},
                                   {1, 0, NodeKind::leaf, "a"},
                                   {2, 0, NodeKind::leaf, "b"},
                                   {3, 0, NodeKind::leaf, "c"},
                                   {4, 0, NodeKind::leaf, "d"}};
    auto tree = oracle::make_tree(four);
    auto forest = oracle::make_forest(tree);
    ModelParams mp = oracle::random_model(tree, forest, 3, 6, 0.0);
    for (AppIdx a = 0; a < 4; ++a) {
      CHECK(app_prob_hs(mp, 0, a) == doctest::Approx(0.25).epsilon(1e-15));
      total += app_prob_hs(mp, 0, a);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("exact_softmax and app_prob_exact") {
  SUBCASE("equal scores over five apps") {
    const std::vector<double> s(5, 1.3);
    for (double p : exact_softmax(s)) CHECK(p == doctest::Approx(0.2).epsilon(1e-15));
  }
  SUBCASE("scores (ln 2, 0) give (2/3, 1/3)") {
    const std::vector<double> s{std::log(2.0), 0.0};
    const auto p = exact_softmax(s);
    CHECK(p[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(p[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  }
  SUBCASE("single app") {
    const std::vector<double> s{4.2};
    CHECK(exact_softmax(s)[0] == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("empty competing set") {
    try {
      exact_softmax({});
      FAIL("expected EmptySubcategory");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::EmptySubcategory);
    }
  }
  SUBCASE("sums to one within 1e-12 and matches the two-app logit identity") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> gauss(0.0, 3.0);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> s(2 + rng() % 20);
      for (double& x : s) x = gauss(rng);
      const auto p = exact_softmax(s);
      CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
      if (s.size() == 2) {
        const double logit = 1.0 / (1.0 + std::exp(-(s[0] - s[1])));
        CHECK(p[0] == doctest::Approx(logit).epsilon(1e-12));
      }
    }
  }
  SUBCASE("per-app parameter block over one subcategory") {
    auto tree = oracle::make_tree(oracle::market_edges());
    FlatParams fp;
    fp.k = 2;
    fp.P = Eigen::MatrixXd::Zero(2, 1);
    fp.Q = Eigen::MatrixXd::Zero(2, tree->num_apps());
    fp.b = Eigen::VectorXd::Zero(tree->num_apps());
    const NodeId arcade = *tree->parent(tree->leaf_of_app(100));
    const auto probs = app_prob_exact(fp, 0, *tree, arcade);
    REQUIRE(probs.size() == 3);
    for (double p : probs) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK_THROWS_AS(app_prob_exact(fp, 0, *tree, tree->root()), Error);
  }
}

TEST_CASE("path_prob") {
  SUBCASE("single category, single app: log 1") {
    std::vector<TaxonomyEdge> edges{{0, std::nullopt, NodeKind::internal, "root"},
                                    {1, 0, NodeKind::internal, "cat"},
                                    {2, 1, NodeKind::leaf, "app"}};
    auto tree = oracle::make_tree(edges);
    auto forest = oracle::make_forest(tree);
    ModelParams mp = oracle::random_model(tree, forest, 3, 8, 1.0);
    CHECK(path_prob(mp, 0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("zero params on the 2x2 tree: log 0.25 everywhere") {
    Fixture f(oracle::two_by_two_edges(), 3, 9, 0.0);
    for (AppIdx a = 0; a < 4; ++a)
      CHECK(path_prob(f.mp, 0, a) == doctest::Approx(std::log(0.25)).epsilon(1e-12));
  }
  SUBCASE("matches the probability-domain enumeration oracle") {
    Fixture f(oracle::market_edges(), 4, 10, 0.9);
    for (UserIdx u = 0; u < 3; ++u) {
      const auto expected = oracle::enumerate_app_probs(f.mp, u);
      for (AppIdx a = 0; a < f.tree->num_apps(); ++a)
        CHECK(std::exp(path_prob(f.mp, u, a)) ==
              doctest::Approx(expected[static_cast<std::size_t>(a)]).epsilon(1e-11));
    }
  }
}

TEST_CASE("normalization: path probabilities sum to one") {
  std::mt19937_64 rng(21);
  SUBCASE("small market tree, random parameterizations") {
    auto tree = oracle::make_tree(oracle::market_edges());
    auto forest = oracle::make_forest(tree);
    for (int trial = 0; trial < 20; ++trial) {
      ModelParams mp = oracle::random_model(tree, forest, 3 + trial % 4, rng(), 1.2);
      double total = 0.0;
      for (AppIdx a = 0; a < tree->num_apps(); ++a) total += std::exp(path_prob(mp, 0, a));
      CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
  SUBCASE("three levels, 200 apps") {
    SynthSpec spec;
    spec.num_users = 2;
    spec.fanouts = {4, 5};
    spec.apps_per_subcat = 10;
    spec.adoptions_per_user = 1;
    spec.k = 6;
    spec.seed = 77;
    spec.scale = 1.0;
    const SynthResult s = generate_synthetic(spec);
    REQUIRE(s.tree->num_apps() == 200);
    double total = 0.0;
    for (AppIdx a = 0; a < s.tree->num_apps(); ++a) total += std::exp(path_prob(s.planted, 0, a));
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("path_prob is invariant to shifting one level's sibling affinities") {
  Fixture f(oracle::market_edges(), 4, 22, 0.8);
  const double before = path_prob(f.mp, 1, f.tree->app_index(101));
  // add a constant to the biases of every child of Games (the level-2 competing set)
  const NodeId games = *f.tree->parent(*f.tree->parent(f.tree->leaf_of_app(101)));
  for (NodeId c : f.tree->children(games)) f.mp.bz(f.tree->internal_index(c)) += 7.25;
  const double after = path_prob(f.mp, 1, f.tree->app_index(101));
  CHECK(after == doctest::Approx(before).epsilon(1e-12));
}

TEST_CASE("log_posterior") {
  SUBCASE("zero params on a uniform tree: |D| * uniform log-prob, zero prior") {
    Fixture f(oracle::two_by_two_edges(), 3, 23, 0.0);
    std::vector<Instance> inst{{0, 0}, {0, 3}, {1, 1}, {2, 2}};
    const auto data = AdoptionDataset::from_instances(3, 4, inst, {10, 11, 12});
    CHECK(log_posterior(f.mp, data) == doctest::Approx(4.0 * std::log(0.25)).epsilon(1e-12));
  }
  SUBCASE("pulling one q_z off its parent costs delta^2 K (1 + children) / (2 sigma^2)") {
    auto tree = oracle::make_tree(oracle::market_edges());
    auto forest = oracle::make_forest(tree);
    const int k = 3;
    ModelParams mp = oracle::random_model(tree, forest, k, 24, 0.0, 2, 0.7);
    std::vector<Instance> inst{{0, 0}};
    const auto data = AdoptionDataset::from_instances(2, tree->num_apps(), inst, {0, 1});
    const double base = log_posterior(mp, data);
    const NodeId games = *tree->parent(*tree->parent(tree->leaf_of_app(100)));
    const double delta = 0.3;
    for (int r = 0; r < k; ++r) mp.Qz(r, tree->internal_index(games)) += delta;
    const int affected = 1 + static_cast<int>(tree->children(games).size());
    const double expected_drop =
        delta * delta * k * affected / (2.0 * mp.sigma * mp.sigma);
    // p_u is zero here, so the affinities (and the likelihood) do not move
    CHECK(base - log_posterior(mp, data) == doctest::Approx(expected_drop).epsilon(1e-9));
  }
  SUBCASE("sigma to infinity removes the prior's parameter dependence") {
    Fixture f(oracle::market_edges(), 3, 25, 1.0);
    std::vector<Instance> inst{{0, 0}};
    const auto data = AdoptionDataset::from_instances(3, f.tree->num_apps(), inst, {0, 1, 2});
    // the root vector enters the objective only through the prior
    const int root_idx = f.tree->internal_index(f.tree->root());
    f.mp.sigma = 0.5;
    const double tight_before = log_posterior(f.mp, data);
    f.mp.Qz.col(root_idx).array() += 2.0;
    const double tight_diff = std::abs(log_posterior(f.mp, data) - tight_before);
    CHECK(tight_diff > 1.0);

    f.mp.sigma = 1e9;
    const double loose_before = log_posterior(f.mp, data);
    f.mp.Qz.col(root_idx).array() += 2.0;
    CHECK(std::abs(log_posterior(f.mp, data) - loose_before) < 1e-9);
  }
  SUBCASE("empty dataset") {
    Fixture f(oracle::two_by_two_edges(), 2, 26, 0.1);
    const AdoptionDataset data;
    CHECK_THROWS_AS(log_posterior(f.mp, data), Error);
  }
}

TEST_CASE("score_all") {
  SUBCASE("zero params rank by ascending app id on a uniform tree") {
    Fixture f(oracle::two_by_two_edges(), 3, 27, 0.0);
    const auto ranked = score_all(f.mp, 0);
    REQUIRE(ranked.size() == 4);
    for (std::size_t j = 1; j < ranked.size(); ++j)
      CHECK(f.tree->app_id_at(ranked[j - 1].app) < f.tree->app_id_at(ranked[j].app));
  }
  SUBCASE("a strongly preferred path ranks first") {
    Fixture f(oracle::market_edges(), 4, 28, 0.0);
    const AppIdx target = f.tree->app_index(110);  // sudoku, under Games -> Puzzle
    const ChoicePath& p = f.tree->path_of(target);
    for (NodeId z : p.internal_nodes) f.mp.bz(f.tree->internal_index(z)) = 30.0;
    for (const HsStep& s : f.forest->path(target).steps)
      f.mp.bn(s.node) = s.left ? 30.0 : -30.0;
    CHECK(score_all(f.mp, 0).front().app == target);
  }
  SUBCASE("exclusion removes exactly the requested apps") {
    Fixture f(oracle::market_edges(), 3, 29, 0.7);
    const std::vector<AppIdx> exclude{1, 4};
    const auto ranked = score_all(f.mp, 0, exclude);
    CHECK(ranked.size() == static_cast<std::size_t>(f.tree->num_apps()) - 2);
    for (const ScoredApp& s : ranked) {
      CHECK(s.app != 1);
      CHECK(s.app != 4);
    }
  }
  SUBCASE("ordering is invariant under exponentiating the scores") {
    Fixture f(oracle::market_edges(), 4, 30, 1.1);
    const auto ranked = score_all(f.mp, 2);
    for (std::size_t j = 1; j < ranked.size(); ++j)
      CHECK(std::exp(ranked[j - 1].score) >= std::exp(ranked[j].score));
  }
  SUBCASE("matches path_prob per app") {
    Fixture f(oracle::market_edges(), 4, 31, 0.9);
    for (const ScoredApp& s : score_all(f.mp, 1))
      CHECK(s.score == doctest::Approx(path_prob(f.mp, 1, s.app)).epsilon(1e-12));
  }
}

#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "sucm/baselines.hpp"
#include "sucm/model.hpp"
#include "sucm/synth.hpp"

using namespace sucm;

namespace {

AdoptionDataset small_data(int n_users, int n_apps, std::vector<Instance> inst) {
  std::vector<std::int64_t> ids(static_cast<std::size_t>(n_users));
  for (int u = 0; u < n_users; ++u) ids[static_cast<std::size_t>(u)] = u;
  return AdoptionDataset::from_instances(n_users, n_apps, std::move(inst), std::move(ids));
}

}  // namespace

TEST_CASE("negative_sample") {
  SUBCASE("the only unadopted app is always returned") {
    std::vector<Instance> inst;
    for (AppIdx a = 0; a < 5; ++a)
      if (a != 3) inst.push_back({0, a});
    const AdoptionDataset d = small_data(1, 5, std::move(inst));
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 10; ++trial) {
      const auto negs = negative_sample(d, 0, 4, rng);
      REQUIRE(negs.size() == 1);
      CHECK(negs[0] == 3);
    }
  }
  SUBCASE("samples never intersect the training adoptions and never repeat in a call") {
    const AdoptionDataset d = small_data(2, 30, {{0, 2}, {0, 7}, {0, 11}, {1, 0}});
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 200; ++trial) {
      const auto negs = negative_sample(d, 0, 6, rng);
      CHECK(negs.size() == 6);
      std::set<AppIdx> uniq(negs.begin(), negs.end());
      CHECK(uniq.size() == negs.size());
      for (AppIdx a : negs) CHECK_FALSE(d.is_adopted(0, a));
    }
  }
  SUBCASE("empirical distribution is uniform (chi-square at alpha = 0.01)") {
    const AdoptionDataset d = small_data(1, 21, {{0, 5}});  // 20 candidates, 19 dof
    std::mt19937_64 rng(3);
    std::vector<int> counts(21, 0);
    const int draws = 100000;
    for (int t = 0; t < draws; ++t) ++counts[static_cast<std::size_t>(negative_sample(d, 0, 1, rng)[0])];
    CHECK(counts[5] == 0);
    const double expected = draws / 20.0;
    double chi2 = 0.0;
    for (AppIdx a = 0; a < 21; ++a) {
      if (a == 5) continue;
      const double diff = counts[static_cast<std::size_t>(a)] - expected;
      chi2 += diff * diff / expected;
    }
    CHECK(chi2 < 36.191);  // chi-square critical value, 19 dof, alpha 0.01
  }
  SUBCASE("a user who adopted everything cannot be sampled for") {
    const AdoptionDataset d = small_data(1, 2, {{0, 0}, {0, 1}});
    std::mt19937_64 rng(4);
    try {
      negative_sample(d, 0, 1, rng);
      FAIL("expected UserHasAdoptedEverything");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::UserHasAdoptedEverything);
    }
  }
}

TEST_CASE("per-instance losses agree with closed forms") {
  BaselineConfig cfg;
  cfg.k = 3;
  cfg.seed = 5;
  FlatParams fp = init_flat_params(cfg, 2, 6);
  SUBCASE("ccf with a single negative reduces to the logistic pairwise loss") {
    cfg.lambda_u = cfg.lambda_i = cfg.lambda_b = 0.0;
    const std::vector<AppIdx> negs{4};
    const double d = fp.score(0, 1) - fp.score(0, 4);
    CHECK(ccf_instance_loss(fp, 0, 1, negs, cfg) ==
          doctest::Approx(std::log(1.0 + std::exp(-d))).epsilon(1e-12));
  }
  SUBCASE("ccf loss is never negative") {
    cfg.lambda_u = cfg.lambda_i = cfg.lambda_b = 0.0;
    std::mt19937_64 rng(6);
    std::normal_distribution<double> gauss(0.0, 2.0);
    for (int t = 0; t < 100; ++t) {
      for (Eigen::Index c = 0; c < fp.Q.cols(); ++c) {
        for (int r = 0; r < fp.k; ++r) fp.Q(r, c) = gauss(rng);
        fp.b(c) = gauss(rng);
      }
      const std::vector<AppIdx> negs{0, 2, 5};
      CHECK(ccf_instance_loss(fp, 1, 3, negs, cfg) >= 0.0);
    }
  }
  SUBCASE("bpr pairwise term is antisymmetric under swapping i and j") {
    const double dij = fp.score(1, 2) - fp.score(1, 5);
    const double dji = fp.score(1, 5) - fp.score(1, 2);
    CHECK(dij == doctest::Approx(-dji).epsilon(1e-15));
    cfg.lambda_u = cfg.lambda_i = cfg.lambda_b = 0.0;
    // ln sigma(d) + ln sigma(-d) = ln(sigma(d) (1 - sigma(d)))
    const double both =
        bpr_instance_objective(fp, 1, 2, 5, cfg) + bpr_instance_objective(fp, 1, 5, 2, cfg);
    const double sig = 1.0 / (1.0 + std::exp(-dij));
    CHECK(both == doctest::Approx(std::log(sig * (1.0 - sig))).epsilon(1e-12));
  }
}

TEST_CASE("trainers are deterministic under a fixed seed") {
  auto tree = oracle::make_tree(oracle::market_edges());
  const AdoptionDataset d =
      small_data(3, tree->num_apps(), {{0, 0}, {0, 4}, {1, 1}, {1, 7}, {2, 2}, {2, 5}});
  BaselineConfig cfg;
  cfg.k = 4;
  cfg.max_iter = 5;
  cfg.seed = 11;
  for (auto trainer : {train_llfm, train_pmf_neg, train_bpr, train_ccf}) {
    const auto [a, ra] = trainer(d, cfg);
    const auto [b, rb] = trainer(d, cfg);
    CHECK(a.P == b.P);
    CHECK(a.Q == b.Q);
    CHECK(a.b == b.b);
    CHECK(ra.objective == rb.objective);
  }
}

TEST_CASE("llfm") {
  auto tree = oracle::make_tree(oracle::market_edges());
  const AdoptionDataset d =
      small_data(3, tree->num_apps(), {{0, 0}, {0, 4}, {1, 1}, {1, 7}, {2, 2}, {2, 5}});
  BaselineConfig cfg;
  cfg.k = 4;
  cfg.seed = 12;
  SUBCASE("loss decreases over training") {
    cfg.max_iter = 15;
    const auto [fp, report] = train_llfm(d, cfg);
    CHECK(report.objective.back() < report.objective.front());
  }
  SUBCASE("huge regularization shrinks the touched parameters toward zero") {
    cfg.max_iter = 30;
    cfg.lambda_u = cfg.lambda_i = cfg.lambda_b = 3.0;
    cfg.lr = 0.1;
    const auto [fp, report] = train_llfm(d, cfg);
    CHECK(fp.P.norm() < 1e-3);  // every user appears in the data
    for (const Instance& in : d.instances()) {
      CHECK(fp.Q.col(in.app).norm() < 1e-3);
      CHECK(std::abs(fp.b(in.app)) < 1e-3);
    }
  }
}

TEST_CASE("pmf_neg fits a separable one-user toy exactly") {
  // one user, two apps: y(u, 0) = 1 and y(u, 1) = 0 are exactly representable
  const AdoptionDataset d = small_data(1, 2, {{0, 0}});
  BaselineConfig cfg;
  cfg.k = 2;
  cfg.seed = 13;
  cfg.lambda_u = cfg.lambda_i = cfg.lambda_b = 0.0;
  FlatParams fp = init_flat_params(cfg, 1, 2);
  for (int it = 0; it < 4000; ++it) {
    pmf_step(fp, 0, 0, 1.0, 0.05, cfg);
    pmf_step(fp, 0, 1, 0.0, 0.05, cfg);
  }
  CHECK(std::abs(1.0 - fp.score(0, 0)) < 1e-4);
  CHECK(std::abs(fp.score(0, 1)) < 1e-4);
  SUBCASE("freeze_negatives keeps training deterministic too") {
    cfg.freeze_negatives = true;
    cfg.max_iter = 3;
    const auto [a, ra] = train_pmf_neg(d, cfg);
    const auto [b, rb] = train_pmf_neg(d, cfg);
    CHECK(a.P == b.P);
  }
}

TEST_CASE("bpr ranks planted preferences above chance") {
  SynthSpec spec;
  spec.num_users = 40;
  spec.fanouts = {2};
  spec.apps_per_subcat = 10;
  spec.adoptions_per_user = 6;
  spec.k = 4;
  spec.seed = 21;
  spec.scale = 1.2;
  const SynthResult s = generate_synthetic(spec);
  BaselineConfig cfg;
  cfg.k = 4;
  cfg.max_iter = 20;
  cfg.seed = 22;
  const auto [fp, report] = train_bpr(s.data, cfg);
  // AUC over adopted-vs-unadopted pairs
  std::int64_t wins = 0, total = 0;
  for (UserIdx u = 0; u < s.data.num_users(); ++u) {
    for (AppIdx i : s.data.adopted(u)) {
      for (AppIdx j = 0; j < s.data.num_apps(); ++j) {
        if (s.data.is_adopted(u, j)) continue;
        wins += fp.score(u, i) > fp.score(u, j) ? 1 : 0;
        ++total;
      }
    }
  }
  const double auc = static_cast<double>(wins) / static_cast<double>(total);
  CHECK(auc > 0.6);
}

TEST_CASE("ccf with the full sibling offer set equals the exact leaf softmax") {
  // flat one-level taxonomy: the cascaded model degenerates to one softmax
  std::vector<TaxonomyEdge> edges{{0, std::nullopt, NodeKind::internal, "root"}};
  for (int j = 0; j < 12; ++j)
    edges.push_back({j + 1, 0, NodeKind::leaf, "app" + std::to_string(j)});
  auto tree = oracle::make_tree(edges);
  BaselineConfig bare;
  bare.k = 3;
  bare.seed = 31;
  bare.lambda_u = bare.lambda_i = bare.lambda_b = 0.0;
  FlatParams fp = init_flat_params(bare, 4, tree->num_apps());
  std::mt19937_64 rng(32);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (Eigen::Index c = 0; c < fp.Q.cols(); ++c) {
    for (int r = 0; r < fp.k; ++r) fp.Q(r, c) = gauss(rng);
    fp.b(c) = gauss(rng);
  }
  for (UserIdx u = 0; u < 4; ++u) {
    for (AppIdx i = 0; i < tree->num_apps(); ++i) {
      std::vector<AppIdx> negs;
      for (AppIdx j = 0; j < tree->num_apps(); ++j)
        if (j != i) negs.push_back(j);
      const double ccf = ccf_instance_loss(fp, u, i, negs, bare);
      const auto probs = app_prob_exact(fp, u, *tree, tree->root());
      const double exact_nll = -std::log(probs[static_cast<std::size_t>(i)]);
      CHECK(ccf == doctest::Approx(exact_nll).epsilon(1e-9));
    }
  }
}

TEST_CASE("score_flat") {
  auto tree = oracle::make_tree(oracle::market_edges());
  BaselineConfig cfg;
  cfg.k = 3;
  cfg.seed = 41;
  SUBCASE("zero parameters rank by ascending app id") {
    cfg.init_std = 0.0;
    const FlatParams fp = init_flat_params(cfg, 1, tree->num_apps());
    const auto ranked = score_flat(fp, *tree, 0);
    for (std::size_t j = 1; j < ranked.size(); ++j)
      CHECK(tree->app_id_at(ranked[j - 1].app) < tree->app_id_at(ranked[j].app));
  }
  SUBCASE("adding a constant to every bias leaves the ranking unchanged") {
    FlatParams fp = init_flat_params(cfg, 2, tree->num_apps());
    const auto before = score_flat(fp, *tree, 1);
    fp.b.array() += 11.5;
    const auto after = score_flat(fp, *tree, 1);
    REQUIRE(before.size() == after.size());
    for (std::size_t j = 0; j < before.size(); ++j) CHECK(before[j].app == after[j].app);
  }
  SUBCASE("a planted preference is recovered at rank one, exclusion respected") {
    FlatParams fp = init_flat_params(cfg, 1, tree->num_apps());
    fp.b(5) = 40.0;
    CHECK(score_flat(fp, *tree, 0).front().app == 5);
    const std::vector<AppIdx> exclude{5};
    CHECK(score_flat(fp, *tree, 0, exclude).front().app != 5);
  }
}

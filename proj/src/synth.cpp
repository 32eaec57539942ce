#include "sucm/synth.hpp"

#include <cmath>
#include <random>

namespace sucm {

void SynthSpec::validate() const {
  if (num_users < 1) raise(Errc::InvalidArgument, "num_users must be >= 1");
  if (fanouts.empty()) raise(Errc::InvalidArgument, "at least one fan-out level required");
  for (int f : fanouts)
    if (f < 1) raise(Errc::InvalidArgument, "fan-outs must be >= 1");
  if (apps_per_subcat < 1) raise(Errc::InvalidArgument, "apps_per_subcat must be >= 1");
  if (adoptions_per_user < 1) raise(Errc::InvalidArgument, "adoptions_per_user must be >= 1");
  if (k < 1) raise(Errc::InvalidArgument, "latent dimension must be >= 1");
  if (scale < 0.0) raise(Errc::InvalidArgument, "scale must be >= 0");
  if (sigma <= 0.0) raise(Errc::InvalidArgument, "sigma must be positive");
  long long apps = apps_per_subcat;
  for (int f : fanouts) apps *= f;
  if (static_cast<long long>(adoptions_per_user) > apps)
    raise(Errc::SpecInfeasible, "adoptions_per_user exceeds the app universe");
}

SynthResult generate_synthetic(const SynthSpec& spec) {
  spec.validate();

  // taxonomy: sequential ids level by level, leaves under the last level
  std::vector<TaxonomyEdge> edges;
  edges.push_back({0, std::nullopt, NodeKind::internal, "root"});
  std::vector<std::int64_t> frontier{0};
  std::int64_t next_id = 1;
  for (std::size_t lvl = 0; lvl < spec.fanouts.size(); ++lvl) {
    std::vector<std::int64_t> next;
    for (std::int64_t parent : frontier) {
      for (int j = 0; j < spec.fanouts[lvl]; ++j) {
        edges.push_back({next_id, parent, NodeKind::internal,
                         "cat_" + std::to_string(lvl + 1) + "_" + std::to_string(next_id)});
        next.push_back(next_id);
        ++next_id;
      }
    }
    frontier = std::move(next);
  }
  for (std::int64_t parent : frontier) {
    for (int j = 0; j < spec.apps_per_subcat; ++j) {
      edges.push_back({next_id, parent, NodeKind::leaf, "app_" + std::to_string(next_id)});
      ++next_id;
    }
  }
  auto tree = std::make_shared<const CategoryTree>(CategoryTree::build(edges));
  auto forest = std::make_shared<const HsForest>(HsForest::build(*tree, HsStrategy::balanced));

  // planted parameters
  ModelParams mp;
  mp.k = spec.k;
  mp.sigma = spec.sigma;
  mp.tree = tree;
  mp.forest = forest;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, spec.scale > 0.0 ? spec.scale : 1.0);
  auto draw = [&]() { return spec.scale == 0.0 ? 0.0 : gauss(rng); };
  mp.P.resize(spec.k, spec.num_users);
  mp.Qz.resize(spec.k, tree->num_internal());
  mp.bz.resize(tree->num_internal());
  mp.Qn.resize(spec.k, forest->total_internal());
  mp.bn.resize(forest->total_internal());
  for (Eigen::Index c = 0; c < mp.P.cols(); ++c)
    for (int r = 0; r < spec.k; ++r) mp.P(r, c) = draw();
  for (Eigen::Index c = 0; c < mp.Qz.cols(); ++c) {
    for (int r = 0; r < spec.k; ++r) mp.Qz(r, c) = draw();
    mp.bz(c) = draw();
  }
  for (Eigen::Index c = 0; c < mp.Qn.cols(); ++c) {
    for (int r = 0; r < spec.k; ++r) mp.Qn(r, c) = draw();
    mp.bn(c) = draw();
  }

  // adoptions: per-user stream split from the seed; each draw comes from the
  // residual distribution (taken apps zeroed out, mass renormalized)
  const int n_apps = tree->num_apps();
  std::vector<Instance> instances;
  instances.reserve(static_cast<std::size_t>(spec.num_users) * spec.adoptions_per_user);
  std::vector<std::int64_t> user_ids(static_cast<std::size_t>(spec.num_users));
  for (int u = 0; u < spec.num_users; ++u) {
    user_ids[static_cast<std::size_t>(u)] = u;
    std::mt19937_64 urng(mix_seed(mix_seed(spec.seed) + static_cast<std::uint64_t>(u)));
    const std::vector<double> lp = all_path_log_probs(mp, u);
    std::vector<double> prob(static_cast<std::size_t>(n_apps));
    double total = 0.0;
    for (AppIdx a = 0; a < n_apps; ++a) {
      prob[static_cast<std::size_t>(a)] = std::exp(lp[static_cast<std::size_t>(a)]);
      total += prob[static_cast<std::size_t>(a)];
    }
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int drawn = 0; drawn < spec.adoptions_per_user; ++drawn) {
      const double r = unif(urng) * total;
      double acc = 0.0;
      AppIdx picked = -1;
      for (AppIdx a = 0; a < n_apps; ++a) {
        const double pa = prob[static_cast<std::size_t>(a)];
        if (pa == 0.0) continue;
        acc += pa;
        picked = a;
        if (acc >= r) break;
      }
      total -= prob[static_cast<std::size_t>(picked)];
      prob[static_cast<std::size_t>(picked)] = 0.0;
      instances.push_back({u, picked});
    }
  }
  SynthResult result;
  result.tree = tree;
  result.data = AdoptionDataset::from_instances(spec.num_users, n_apps, std::move(instances),
                                                std::move(user_ids));
  result.planted = std::move(mp);
  return result;
}

}  // namespace sucm

#include "sucm/model.hpp"

#include <algorithm>
#include <cmath>

#include "sucm/numerics.hpp"

namespace sucm {

namespace {

// affinities of every child of `parent` for user u, in child order
std::vector<double> child_affinities(const ModelParams& mp, UserIdx u, NodeId parent) {
  const auto kids = mp.tree->children(parent);
  std::vector<double> aff(kids.size());
  for (std::size_t j = 0; j < kids.size(); ++j) {
    const int qi = mp.tree->internal_index(kids[j]);
    aff[j] = mp.bz(qi) + mp.P.col(u).dot(mp.Qz.col(qi));
  }
  return aff;
}

std::size_t position_of(std::span<const NodeId> kids, NodeId z) {
  const auto it = std::find(kids.begin(), kids.end(), z);
  return static_cast<std::size_t>(it - kids.begin());
}

}  // namespace

double affinity_node(const ModelParams& mp, UserIdx u, NodeId z) {
  mp.check_user(u);
  const int qi = mp.tree->internal_index(z);  // UnknownNode for leaves/bad ids
  return mp.bz(qi) + mp.P.col(u).dot(mp.Qz.col(qi));
}

double log_step_prob_category(const ModelParams& mp, UserIdx u, NodeId z) {
  mp.check_user(u);
  const auto parent = mp.tree->parent(z);
  if (!parent.has_value()) raise(Errc::RootHasNoChoice, "the root is not chosen from any competing set");
  const auto kids = mp.tree->children(*parent);
  const auto aff = child_affinities(mp, u, *parent);
  return aff[position_of(kids, z)] - log_sum_exp(aff);
}

double step_prob_category(const ModelParams& mp, UserIdx u, NodeId z) {
  return std::exp(log_step_prob_category(mp, u, z));
}

double step_prob_hs(const ModelParams& mp, UserIdx u, std::int32_t hs_node, bool left) {
  mp.check_user(u);
  if (hs_node < 0 || hs_node >= mp.forest->total_internal())
    raise(Errc::UnknownNode, "hs node " + std::to_string(hs_node));
  const double p_left = sigmoid(mp.bn(hs_node) + mp.P.col(u).dot(mp.Qn.col(hs_node)));
  return left ? p_left : 1.0 - p_left;
}

double log_app_prob_hs(const ModelParams& mp, UserIdx u, AppIdx i) {
  mp.check_user(u);
  double lp = 0.0;
  for (const HsStep& s : mp.forest->path(i).steps) {
    const double y = mp.bn(s.node) + mp.P.col(u).dot(mp.Qn.col(s.node));
    lp += log_sigmoid(s.left ? y : -y);
  }
  return lp;
}

double app_prob_hs(const ModelParams& mp, UserIdx u, AppIdx i) {
  return std::exp(log_app_prob_hs(mp, u, i));
}

std::vector<double> exact_softmax(std::span<const double> scores) {
  if (scores.empty()) raise(Errc::EmptySubcategory, "softmax over an empty competing set");
  std::vector<double> probs(scores.begin(), scores.end());
  softmax_inplace(probs);
  return probs;
}

std::vector<double> app_prob_exact(const FlatParams& fp, UserIdx u, const CategoryTree& tree,
                                   NodeId z_m) {
  if (!tree.is_leaf_parent(z_m))
    raise(Errc::EmptySubcategory, "node " + std::to_string(z_m) + " has no app children");
  const auto kids = tree.children(z_m);
  std::vector<double> scores(kids.size());
  for (std::size_t j = 0; j < kids.size(); ++j)
    scores[j] = fp.score(u, tree.app_index_of_leaf(kids[j]));
  return exact_softmax(scores);
}

double path_prob(const ModelParams& mp, UserIdx u, AppIdx i) {
  mp.check_user(u);
  const ChoicePath& path = mp.tree->path_of(i);
  double lp = 0.0;
  NodeId parent = mp.tree->root();
  for (NodeId zm : path.internal_nodes) {
    const auto kids = mp.tree->children(parent);
    const auto aff = child_affinities(mp, u, parent);
    lp += aff[position_of(kids, zm)] - log_sum_exp(aff);
    parent = zm;
  }
  return lp + log_app_prob_hs(mp, u, i);
}

double log_posterior(const ModelParams& mp, const AdoptionDataset& data,
                     const ObjectiveOptions& opt) {
  if (data.empty()) raise(Errc::EmptyDataset, "log posterior of an empty dataset");
  double ll = 0.0;
  for (const Instance& in : data.instances()) ll += path_prob(mp, in.user, in.app);

  const double inv_2s2 = opt.prior_weight / (2.0 * mp.sigma * mp.sigma);
  double prior = 0.0;
  const CategoryTree& tree = *mp.tree;
  for (int idx = 0; idx < tree.num_internal(); ++idx) {
    const NodeId z = tree.internal_at(idx);
    const auto parent = tree.parent(z);
    if (!parent.has_value()) {
      prior -= inv_2s2 * mp.Qz.col(idx).squaredNorm();  // root: N(0, sigma^2 I)
    } else {
      prior -= inv_2s2 * (mp.Qz.col(idx) - mp.Qz.col(tree.internal_index(*parent))).squaredNorm();
    }
  }

  double l2 = 0.0;
  if (opt.l2_user > 0.0) l2 -= opt.l2_user * mp.P.squaredNorm();
  if (opt.l2_hs > 0.0) l2 -= opt.l2_hs * mp.Qn.squaredNorm();
  return ll + prior + l2;
}

std::vector<double> all_path_log_probs(const ModelParams& mp, UserIdx u) {
  mp.check_user(u);
  const CategoryTree& tree = *mp.tree;

  // one top-down pass: cumulative log-prob per internal node, then HS leaves
  std::vector<double> cum(static_cast<std::size_t>(tree.num_nodes()), 0.0);
  std::vector<double> out(static_cast<std::size_t>(tree.num_apps()), 0.0);
  std::vector<NodeId> frontier{tree.root()};
  while (!frontier.empty()) {
    const NodeId p = frontier.back();
    frontier.pop_back();
    const auto kids = tree.children(p);
    if (kids.empty()) continue;
    if (tree.kind(kids.front()) == NodeKind::internal) {
      auto aff = child_affinities(mp, u, p);
      const double lse = log_sum_exp(aff);
      for (std::size_t j = 0; j < kids.size(); ++j) {
        cum[static_cast<std::size_t>(kids[j])] = cum[static_cast<std::size_t>(p)] + aff[j] - lse;
        frontier.push_back(kids[j]);
      }
    } else {
      for (NodeId leaf : kids) {
        const AppIdx a = tree.app_index_of_leaf(leaf);
        out[static_cast<std::size_t>(a)] = cum[static_cast<std::size_t>(p)] + log_app_prob_hs(mp, u, a);
      }
    }
  }
  return out;
}

std::vector<ScoredApp> score_all(const ModelParams& mp, UserIdx u,
                                 std::span<const AppIdx> exclude) {
  const CategoryTree& tree = *mp.tree;
  const std::vector<double> lp = all_path_log_probs(mp, u);
  std::vector<ScoredApp> out;
  out.reserve(lp.size());
  for (AppIdx a = 0; a < tree.num_apps(); ++a) {
    if (std::binary_search(exclude.begin(), exclude.end(), a)) continue;
    out.push_back({a, lp[static_cast<std::size_t>(a)]});
  }
  std::sort(out.begin(), out.end(), [&tree](const ScoredApp& x, const ScoredApp& y) {
    if (x.score != y.score) return x.score > y.score;
    return tree.app_id_at(x.app) < tree.app_id_at(y.app);
  });
  return out;
}

}  // namespace sucm

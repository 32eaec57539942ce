#include "sucm/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <set>

#include "sucm/numerics.hpp"

namespace sucm {

namespace {

// Everything one adoption instance touches: per level the competing set with
// its softmax, plus the HS code path with its sigmoids. All gradient formulas
// and the per-instance objective read from this one structure.
struct InstanceContext {
  struct Level {
    NodeId parent;
    std::span<const NodeId> kids;
    std::vector<double> aff;    // affinities in child order
    std::vector<double> prob;   // softmax of aff
    std::size_t chosen;         // position of z_m among kids
  };
  struct HsDecision {
    std::int32_t node;
    bool left;
    double sig;  // sigmoid(y_{u,n})
    double y;
  };
  std::vector<Level> levels;
  std::vector<HsDecision> hs;
};

InstanceContext make_context(const ModelParams& mp, UserIdx u, AppIdx i) {
  mp.check_user(u);
  const CategoryTree& tree = *mp.tree;
  const ChoicePath& path = tree.path_of(i);

  InstanceContext ctx;
  ctx.levels.reserve(path.internal_nodes.size());
  NodeId parent = tree.root();
  for (NodeId zm : path.internal_nodes) {
    InstanceContext::Level lv;
    lv.parent = parent;
    lv.kids = tree.children(parent);
    lv.aff.resize(lv.kids.size());
    for (std::size_t j = 0; j < lv.kids.size(); ++j) {
      const int qi = tree.internal_index(lv.kids[j]);
      lv.aff[j] = mp.bz(qi) + mp.P.col(u).dot(mp.Qz.col(qi));
    }
    lv.prob = lv.aff;
    softmax_inplace(lv.prob);
    lv.chosen = static_cast<std::size_t>(
        std::find(lv.kids.begin(), lv.kids.end(), zm) - lv.kids.begin());
    ctx.levels.push_back(std::move(lv));
    parent = zm;
  }
  for (const HsStep& s : mp.forest->path(i).steps) {
    const double y = mp.bn(s.node) + mp.P.col(u).dot(mp.Qn.col(s.node));
    ctx.hs.push_back({s.node, s.left, sigmoid(y), y});
  }
  return ctx;
}

Eigen::VectorXd user_grad_from_context(const InstanceContext& ctx, const ModelParams& mp,
                                       UserIdx u, const ObjectiveOptions& opt) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(mp.k);
  for (const auto& d : ctx.hs) {
    const double coef = (d.left ? 1.0 : 0.0) - d.sig;
    g += coef * mp.Qn.col(d.node);
  }
  for (const auto& lv : ctx.levels) {
    Eigen::VectorXd wmean = Eigen::VectorXd::Zero(mp.k);
    for (std::size_t j = 0; j < lv.kids.size(); ++j)
      wmean += lv.prob[j] * mp.Qz.col(mp.tree->internal_index(lv.kids[j]));
    g += mp.Qz.col(mp.tree->internal_index(lv.kids[lv.chosen])) - wmean;
  }
  if (opt.l2_user > 0.0) g -= 2.0 * opt.l2_user * mp.P.col(u);
  return g;
}

// gradient of a touched category node given its softmax probability
NodeGrad category_grad(const ModelParams& mp, NodeId z, NodeId parent, bool on_path,
                       double prob, const ObjectiveOptions& opt, UserIdx u) {
  const CategoryTree& tree = *mp.tree;
  const double coef = (on_path ? 1.0 : 0.0) - prob;
  const double inv_s2 = opt.prior_weight / (mp.sigma * mp.sigma);
  NodeGrad g;
  g.vec = coef * mp.P.col(u);
  const int zi = tree.internal_index(z);
  g.vec -= inv_s2 * (mp.Qz.col(zi) - mp.Qz.col(tree.internal_index(parent)));
  const auto kids = tree.children(z);
  if (!kids.empty() && tree.kind(kids.front()) == NodeKind::internal) {
    for (NodeId c : kids)
      g.vec -= inv_s2 * (mp.Qz.col(zi) - mp.Qz.col(tree.internal_index(c)));
  }
  g.bias = coef;  // the bias carries no prior term
  return g;
}

}  // namespace

void TrainConfig::validate() const {
  if (k < 1) raise(Errc::InvalidArgument, "latent dimension must be >= 1");
  if (lr <= 0.0) raise(Errc::InvalidArgument, "learning rate must be positive");
  if (nu <= 0.0) raise(Errc::InvalidArgument, "annealing constant nu must be positive");
  if (max_iter < 1) raise(Errc::InvalidArgument, "max_iter must be >= 1");
  if (sigma <= 0.0) raise(Errc::InvalidArgument, "sigma must be positive");
  if (init_std < 0.0) raise(Errc::InvalidArgument, "init_std must be >= 0");
  if (l2_user < 0.0 || l2_hs < 0.0) raise(Errc::InvalidArgument, "l2 weights must be >= 0");
  if (convergence_tol < 0.0) raise(Errc::InvalidArgument, "convergence_tol must be >= 0");
  if (prior_weight < 0.0) raise(Errc::InvalidArgument, "prior_weight must be >= 0");
}

double annealed_lr(double lr, double nu, std::int64_t n_iter) {
  return lr * nu / (nu + static_cast<double>(n_iter) - 1.0);
}

double anneal_lr(const TrainConfig& cfg, std::int64_t n_iter) {
  return annealed_lr(cfg.lr, cfg.nu, n_iter);
}

ModelParams init_params(const TrainConfig& cfg, std::shared_ptr<const CategoryTree> tree,
                        std::shared_ptr<const HsForest> forest, int num_users) {
  cfg.validate();
  ModelParams mp;
  mp.k = cfg.k;
  mp.sigma = cfg.sigma;
  mp.tree = std::move(tree);
  mp.forest = std::move(forest);
  mp.P.resize(cfg.k, num_users);
  mp.Qz.resize(cfg.k, mp.tree->num_internal());
  mp.bz = Eigen::VectorXd::Zero(mp.tree->num_internal());
  mp.Qn.resize(cfg.k, mp.forest->total_internal());
  mp.bn = Eigen::VectorXd::Zero(mp.forest->total_internal());

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, cfg.init_std > 0.0 ? cfg.init_std : 1.0);
  auto fill = [&](Eigen::MatrixXd& m) {
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = cfg.init_std == 0.0 ? 0.0 : gauss(rng);
  };
  fill(mp.P);
  fill(mp.Qz);
  fill(mp.Qn);
  return mp;
}

Eigen::VectorXd grad_user(const ModelParams& mp, UserIdx u, AppIdx i,
                          const ObjectiveOptions& opt) {
  const InstanceContext ctx = make_context(mp, u, i);
  return user_grad_from_context(ctx, mp, u, opt);
}

NodeGrad grad_category_node(const ModelParams& mp, UserIdx u, AppIdx i, NodeId z,
                            const ObjectiveOptions& opt) {
  const CategoryTree& tree = *mp.tree;
  const ChoicePath& path = tree.path_of(i);
  const InstanceContext ctx = make_context(mp, u, i);
  for (std::size_t m = 0; m < ctx.levels.size(); ++m) {
    const auto& lv = ctx.levels[m];
    for (std::size_t j = 0; j < lv.kids.size(); ++j) {
      if (lv.kids[j] != z) continue;
      const bool on_path = (z == path.internal_nodes[m]);
      return category_grad(mp, z, lv.parent, on_path, lv.prob[j], opt, u);
    }
  }
  raise(Errc::NodeNotInCompetingSet,
        "node " + std::to_string(z) + " is not on the path of app index " + std::to_string(i) +
            " nor a sibling of a path node");
}

NodeGrad grad_hs_node(const ModelParams& mp, UserIdx u, AppIdx i, int level,
                      const ObjectiveOptions& opt) {
  const auto& steps = mp.forest->path(i).steps;
  if (level < 1 || static_cast<std::size_t>(level) > steps.size())
    raise(Errc::IndexOutOfPath, "hs level " + std::to_string(level) + " outside 1..L(i)-1");
  mp.check_user(u);
  const HsStep& s = steps[static_cast<std::size_t>(level - 1)];
  const double y = mp.bn(s.node) + mp.P.col(u).dot(mp.Qn.col(s.node));
  const double coef = (s.left ? 1.0 : 0.0) - sigmoid(y);
  NodeGrad g;
  g.vec = coef * mp.P.col(u);
  if (opt.l2_hs > 0.0) g.vec -= 2.0 * opt.l2_hs * mp.Qn.col(s.node);
  g.bias = coef;
  return g;
}

double instance_objective(const ModelParams& mp, UserIdx u, AppIdx i,
                          const ObjectiveOptions& opt) {
  const CategoryTree& tree = *mp.tree;
  const InstanceContext ctx = make_context(mp, u, i);

  double ll = 0.0;
  for (const auto& lv : ctx.levels) ll += lv.aff[lv.chosen] - log_sum_exp(lv.aff);
  for (const auto& d : ctx.hs) ll += log_sigmoid(d.left ? d.y : -d.y);

  // prior terms of every touched node; each (child, parent) edge counted once
  std::set<std::pair<NodeId, NodeId>> edges;
  for (const auto& lv : ctx.levels) {
    for (NodeId z : lv.kids) {
      edges.emplace(z, lv.parent);
      const auto kids = tree.children(z);
      if (!kids.empty() && tree.kind(kids.front()) == NodeKind::internal)
        for (NodeId c : kids) edges.emplace(c, z);
    }
  }
  const double inv_2s2 = opt.prior_weight / (2.0 * mp.sigma * mp.sigma);
  double prior = 0.0;
  for (const auto& [c, p] : edges)
    prior -= inv_2s2 *
             (mp.Qz.col(tree.internal_index(c)) - mp.Qz.col(tree.internal_index(p))).squaredNorm();

  double l2 = 0.0;
  if (opt.l2_user > 0.0) l2 -= opt.l2_user * mp.P.col(u).squaredNorm();
  if (opt.l2_hs > 0.0)
    for (const auto& d : ctx.hs) l2 -= opt.l2_hs * mp.Qn.col(d.node).squaredNorm();
  return ll + prior + l2;
}

StepStats sgd_step(ModelParams& mp, UserIdx u, AppIdx i, double lr,
                   const ObjectiveOptions& opt) {
  const CategoryTree& tree = *mp.tree;
  const InstanceContext ctx = make_context(mp, u, i);

  // all gradients are evaluated at the pre-step parameters, then applied
  const Eigen::VectorXd gp = user_grad_from_context(ctx, mp, u, opt);

  StepStats st;
  std::vector<std::pair<int, NodeGrad>> cat_deltas;  // internal index -> grad
  for (const auto& lv : ctx.levels) {
    for (std::size_t j = 0; j < lv.kids.size(); ++j) {
      const NodeId z = lv.kids[j];
      cat_deltas.emplace_back(tree.internal_index(z),
                              category_grad(mp, z, lv.parent, j == lv.chosen, lv.prob[j], opt, u));
    }
    st.category_nodes += static_cast<int>(lv.kids.size());
  }
  std::vector<std::pair<std::int32_t, NodeGrad>> hs_deltas;
  for (const auto& d : ctx.hs) {
    const double coef = (d.left ? 1.0 : 0.0) - d.sig;
    NodeGrad g;
    g.vec = coef * mp.P.col(u);
    if (opt.l2_hs > 0.0) g.vec -= 2.0 * opt.l2_hs * mp.Qn.col(d.node);
    g.bias = coef;
    hs_deltas.emplace_back(d.node, std::move(g));
  }
  st.hs_nodes = static_cast<int>(ctx.hs.size());

  mp.P.col(u) += lr * gp;
  for (const auto& [zi, g] : cat_deltas) {
    mp.Qz.col(zi) += lr * g.vec;
    mp.bz(zi) += lr * g.bias;
  }
  for (const auto& [n, g] : hs_deltas) {
    mp.Qn.col(n) += lr * g.vec;
    mp.bn(n) += lr * g.bias;
  }
  return st;
}

std::pair<ModelParams, TrainReport> train(const AdoptionDataset& data,
                                          std::shared_ptr<const CategoryTree> tree,
                                          const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) raise(Errc::EmptyTrainingSet, "no training instances");

  const auto t0 = std::chrono::steady_clock::now();
  std::shared_ptr<const HsForest> forest;
  if (cfg.hs_strategy == HsStrategy::huffman) {
    const auto freq = data.adoption_counts();
    forest = std::make_shared<const HsForest>(HsForest::build(*tree, cfg.hs_strategy, freq));
  } else {
    forest = std::make_shared<const HsForest>(HsForest::build(*tree, cfg.hs_strategy));
  }

  ModelParams mp = init_params(cfg, tree, forest, data.num_users());
  const ObjectiveOptions opt = cfg.objective_options();

  TrainReport report;
  report.initial_objective = log_posterior(mp, data, opt);

  std::mt19937_64 rng(mix_seed(cfg.seed));  // distinct from the init stream
  std::vector<std::size_t> order(data.instances().size());
  for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;

  double prev = report.initial_objective;
  std::int64_t global_step = 0;
  for (int epoch = 1; epoch <= cfg.max_iter; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double lr = anneal_lr(cfg, epoch);
    for (std::size_t j : order) {
      ++global_step;
      if (cfg.anneal_per_instance) lr = anneal_lr(cfg, global_step);
      const Instance& in = data.instances()[j];
      const StepStats st = sgd_step(mp, in.user, in.app, lr, opt);
      report.param_touches += st.total_touched();
    }
    report.instances_processed += static_cast<std::int64_t>(order.size());
    const double obj = log_posterior(mp, data, opt);
    report.objective.push_back(obj);
    const double rel = std::abs(obj - prev) / (std::abs(prev) + 1e-12);
    prev = obj;
    if (rel < cfg.convergence_tol) {
      report.converged = true;
      break;
    }
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(mp), std::move(report)};
}

}  // namespace sucm

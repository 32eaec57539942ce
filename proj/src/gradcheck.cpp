#include "sucm/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "sucm/baselines.hpp"
#include "sucm/model.hpp"
#include "sucm/synth.hpp"
#include "sucm/training.hpp"

namespace sucm {

namespace {

constexpr double kStep = 1e-5;

double rel_err(double analytic, double numeric) {
  const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
  return std::abs(analytic - numeric) / denom;
}

// central difference of f() with respect to *x
template <typename F>
double central_diff(double* x, F&& f) {
  const double x0 = *x;
  *x = x0 + kStep;
  const double fp = f();
  *x = x0 - kStep;
  const double fm = f();
  *x = x0;
  return (fp - fm) / (2.0 * kStep);
}

struct Probe {
  SynthResult synth;
  UserIdx u;
  AppIdx i;
  ObjectiveOptions opt;
};

Probe make_probe(std::mt19937_64& rng, int index) {
  // small random shapes, <= 30 apps
  static const std::vector<SynthSpec> shapes = [] {
    std::vector<SynthSpec> s;
    SynthSpec a;
    a.num_users = 3;
    a.adoptions_per_user = 1;
    a.fanouts = {3};
    a.apps_per_subcat = 4;
    s.push_back(a);
    a.fanouts = {2, 3};
    a.apps_per_subcat = 3;
    s.push_back(a);
    a.fanouts = {2, 2, 2};
    a.apps_per_subcat = 3;
    s.push_back(a);
    a.fanouts = {4};
    a.apps_per_subcat = 6;
    s.push_back(a);
    return s;
  }();
  SynthSpec spec = shapes[static_cast<std::size_t>(index) % shapes.size()];
  spec.k = 2 + static_cast<int>(rng() % 7);  // 2..8
  spec.seed = rng();
  spec.scale = 0.7;
  spec.sigma = (index % 3 == 0) ? 0.5 : ((index % 3 == 1) ? 1.0 : 3.0);

  Probe p;
  p.synth = generate_synthetic(spec);
  p.synth.planted.sigma = spec.sigma;
  p.u = static_cast<UserIdx>(rng() % static_cast<std::uint64_t>(spec.num_users));
  p.i = static_cast<AppIdx>(rng() % static_cast<std::uint64_t>(p.synth.tree->num_apps()));
  if (index % 4 == 3) p.opt = {0.03, 0.02, 1.0};  // exercise the optional L2 path
  return p;
}

double check_user_vector(Probe& p) {
  ModelParams& mp = p.synth.planted;
  const Eigen::VectorXd g = grad_user(mp, p.u, p.i, p.opt);
  double worst = 0.0;
  for (int r = 0; r < mp.k; ++r) {
    const double fd =
        central_diff(&mp.P(r, p.u), [&] { return instance_objective(mp, p.u, p.i, p.opt); });
    worst = std::max(worst, rel_err(g(r), fd));
  }
  return worst;
}

double check_category_node(Probe& p, std::mt19937_64& rng, bool bias) {
  ModelParams& mp = p.synth.planted;
  const CategoryTree& tree = *mp.tree;
  const ChoicePath& path = tree.path_of(p.i);
  if (path.internal_nodes.empty()) return 0.0;  // flat shape: no category step

  // choose a random touched node: a child of one of the path's parents
  std::vector<NodeId> touched;
  NodeId parent = tree.root();
  for (NodeId zm : path.internal_nodes) {
    for (NodeId c : tree.children(parent)) touched.push_back(c);
    parent = zm;
  }
  const NodeId z = touched[rng() % touched.size()];
  const NodeGrad g = grad_category_node(mp, p.u, p.i, z, p.opt);
  const int zi = tree.internal_index(z);
  double worst = 0.0;
  if (bias) {
    const double fd =
        central_diff(&mp.bz(zi), [&] { return instance_objective(mp, p.u, p.i, p.opt); });
    worst = rel_err(g.bias, fd);
  } else {
    for (int r = 0; r < mp.k; ++r) {
      const double fd =
          central_diff(&mp.Qz(r, zi), [&] { return instance_objective(mp, p.u, p.i, p.opt); });
      worst = std::max(worst, rel_err(g.vec(r), fd));
    }
  }
  return worst;
}

double check_hs_node(Probe& p, std::mt19937_64& rng, bool bias) {
  ModelParams& mp = p.synth.planted;
  const auto& steps = mp.forest->path(p.i).steps;
  if (steps.empty()) return 0.0;  // singleton subcategory
  const int level = 1 + static_cast<int>(rng() % steps.size());
  const NodeGrad g = grad_hs_node(mp, p.u, p.i, level, p.opt);
  const std::int32_t n = steps[static_cast<std::size_t>(level - 1)].node;
  double worst = 0.0;
  if (bias) {
    const double fd =
        central_diff(&mp.bn(n), [&] { return instance_objective(mp, p.u, p.i, p.opt); });
    worst = rel_err(g.bias, fd);
  } else {
    for (int r = 0; r < mp.k; ++r) {
      const double fd =
          central_diff(&mp.Qn(r, n), [&] { return instance_objective(mp, p.u, p.i, p.opt); });
      worst = std::max(worst, rel_err(g.vec(r), fd));
    }
  }
  return worst;
}

struct FlatProbe {
  FlatParams fp;
  BaselineConfig cfg;
  UserIdx u = 0;
  AppIdx i = 0;
  AppIdx j = 0;
  std::vector<AppIdx> negs;
};

FlatProbe make_flat_probe(std::mt19937_64& rng) {
  FlatProbe p;
  p.cfg.k = 2 + static_cast<int>(rng() % 7);
  p.cfg.seed = rng();
  p.cfg.lambda_u = 0.02;
  p.cfg.lambda_i = 0.03;
  p.cfg.lambda_b = 0.01;
  const int n_apps = 5 + static_cast<int>(rng() % 8);
  p.fp = init_flat_params(p.cfg, 3, n_apps);
  std::normal_distribution<double> gauss(0.0, 0.7);
  for (Eigen::Index c = 0; c < p.fp.P.cols(); ++c)
    for (int r = 0; r < p.fp.k; ++r) p.fp.P(r, c) = gauss(rng);
  for (Eigen::Index c = 0; c < p.fp.Q.cols(); ++c) {
    for (int r = 0; r < p.fp.k; ++r) p.fp.Q(r, c) = gauss(rng);
    p.fp.b(c) = gauss(rng);
  }
  p.u = static_cast<UserIdx>(rng() % 3);
  p.i = static_cast<AppIdx>(rng() % static_cast<std::uint64_t>(n_apps));
  do {
    p.j = static_cast<AppIdx>(rng() % static_cast<std::uint64_t>(n_apps));
  } while (p.j == p.i);
  for (AppIdx a = 0; a < n_apps; ++a)
    if (a != p.i && p.negs.size() < 3) p.negs.push_back(a);
  return p;
}

// recover the analytic gradient from one simultaneous update and compare
// against finite differences of the per-instance objective
template <typename StepFn, typename LossFn>
double check_flat(FlatProbe& p, StepFn&& step, LossFn&& loss, double sign) {
  const double lr = 1.0;
  FlatParams before = p.fp;
  step(p.fp);
  double worst = 0.0;
  auto compare = [&](double delta, double* x) {
    const double analytic = sign * delta / lr;
    const double fd = central_diff(x, [&] { return loss(); });
    worst = std::max(worst, rel_err(analytic, fd));
  };
  FlatParams after = p.fp;
  p.fp = before;  // loss must be evaluated at the pre-step point
  for (int r = 0; r < p.fp.k; ++r) compare(after.P(r, p.u) - before.P(r, p.u), &p.fp.P(r, p.u));
  std::vector<AppIdx> apps{p.i};
  apps.push_back(p.j);
  for (AppIdx a : p.negs)
    if (std::find(apps.begin(), apps.end(), a) == apps.end()) apps.push_back(a);
  for (AppIdx a : apps) {
    for (int r = 0; r < p.fp.k; ++r) compare(after.Q(r, a) - before.Q(r, a), &p.fp.Q(r, a));
    compare(after.b(a) - before.b(a), &p.fp.b(a));
  }
  return worst;
}

}  // namespace

double GradCheckReport::worst() const {
  double w = 0.0;
  for (const auto& e : entries) w = std::max(w, e.max_rel_err);
  return w;
}

GradCheckReport run_gradient_checks(std::uint64_t seed, int probes_per_op) {
  std::mt19937_64 rng(mix_seed(seed));
  GradCheckReport report;
  GradCheckEntry user{"user-vector", 0.0, 0},
      cat_vec{"category-node-vector", 0.0, 0}, cat_bias{"category-node-bias", 0.0, 0},
      hs_vec{"hs-node-vector", 0.0, 0}, hs_bias{"hs-node-bias", 0.0, 0};
  for (int n = 0; n < probes_per_op; ++n) {
    Probe p = make_probe(rng, n);
    user.max_rel_err = std::max(user.max_rel_err, check_user_vector(p));
    ++user.probes;
    cat_vec.max_rel_err = std::max(cat_vec.max_rel_err, check_category_node(p, rng, false));
    ++cat_vec.probes;
    cat_bias.max_rel_err = std::max(cat_bias.max_rel_err, check_category_node(p, rng, true));
    ++cat_bias.probes;
    hs_vec.max_rel_err = std::max(hs_vec.max_rel_err, check_hs_node(p, rng, false));
    ++hs_vec.probes;
    hs_bias.max_rel_err = std::max(hs_bias.max_rel_err, check_hs_node(p, rng, true));
    ++hs_bias.probes;
  }
  report.entries.push_back(user);
  report.entries.push_back(cat_vec);
  report.entries.push_back(cat_bias);
  report.entries.push_back(hs_vec);
  report.entries.push_back(hs_bias);

  GradCheckEntry llfm{"llfm", 0.0, 0}, pmf{"pmf-neg", 0.0, 0}, bpr{"bpr", 0.0, 0},
      ccf{"ccf", 0.0, 0};
  for (int n = 0; n < probes_per_op; ++n) {
    {
      FlatProbe p = make_flat_probe(rng);
      llfm.max_rel_err = std::max(
          llfm.max_rel_err,
          check_flat(
              p, [&](FlatParams& fp) { llfm_step(fp, p.u, p.i, 1.0, p.cfg); },
              [&] { return llfm_instance_loss(p.fp, p.u, p.i, p.cfg); }, -1.0));
      ++llfm.probes;
    }
    {
      FlatProbe p = make_flat_probe(rng);
      const double y = (n % 2 == 0) ? 1.0 : 0.0;
      pmf.max_rel_err = std::max(
          pmf.max_rel_err,
          check_flat(
              p, [&](FlatParams& fp) { pmf_step(fp, p.u, p.i, y, 1.0, p.cfg); },
              [&] { return pmf_instance_loss(p.fp, p.u, p.i, y, p.cfg); }, -1.0));
      ++pmf.probes;
    }
    {
      FlatProbe p = make_flat_probe(rng);
      bpr.max_rel_err = std::max(
          bpr.max_rel_err,
          check_flat(
              p, [&](FlatParams& fp) { bpr_step(fp, p.u, p.i, p.j, 1.0, p.cfg); },
              [&] { return bpr_instance_objective(p.fp, p.u, p.i, p.j, p.cfg); }, 1.0));
      ++bpr.probes;
    }
    {
      FlatProbe p = make_flat_probe(rng);
      ccf.max_rel_err = std::max(
          ccf.max_rel_err,
          check_flat(
              p, [&](FlatParams& fp) { ccf_step(fp, p.u, p.i, p.negs, 1.0, p.cfg); },
              [&] { return ccf_instance_loss(p.fp, p.u, p.i, p.negs, p.cfg); }, -1.0));
      ++ccf.probes;
    }
  }
  report.entries.push_back(llfm);
  report.entries.push_back(pmf);
  report.entries.push_back(bpr);
  report.entries.push_back(ccf);
  return report;
}

}  // namespace sucm

#include "sucm/cli.hpp"

#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sucm/baselines.hpp"
#include "sucm/dataset.hpp"
#include "sucm/evaluation.hpp"
#include "sucm/gradcheck.hpp"
#include "sucm/model.hpp"
#include "sucm/model_io.hpp"
#include "sucm/synth.hpp"
#include "sucm/training.hpp"

namespace sucm {

namespace {

HsStrategy parse_hs(const std::string& s) {
  if (s == "balanced") return HsStrategy::balanced;
  if (s == "huffman") return HsStrategy::huffman;
  raise(Errc::InvalidArgument, "hs strategy must be balanced|huffman");
}

void check_same_taxonomy(const CategoryTree& a, const CategoryTree& b) {
  bool same = a.num_nodes() == b.num_nodes();
  for (NodeId n = 0; same && n < a.num_nodes(); ++n) {
    same = a.ext_id(n) == b.ext_id(n) && a.kind(n) == b.kind(n) && a.parent(n) == b.parent(n);
  }
  if (!same) raise(Errc::InvalidArgument, "taxonomy file does not match the one in the model file");
}

std::vector<std::vector<AppIdx>> train_sets_of(const AdoptionDataset& data) {
  std::vector<std::vector<AppIdx>> sets(static_cast<std::size_t>(data.num_users()));
  for (UserIdx u = 0; u < data.num_users(); ++u) {
    const auto a = data.adopted(u);
    sets[static_cast<std::size_t>(u)].assign(a.begin(), a.end());
  }
  return sets;
}

struct TrainArgs {
  std::string taxonomy, adoptions, model = "sucm", out, hs = "balanced";
  int dim = 20, epochs = 50, neg_per_pos = 5, min_adoptions = 40;
  double lr = 0.05, nu = 50.0, sigma = 1.0, init_std = 0.1, tol = 1e-5;
  double l2_user = 0.0, l2_hs = 0.0, prior_weight = 1.0;
  double lambda_u = 0.01, lambda_i = 0.01, lambda_b = 0.01;
  double rating_threshold = 3.0, train_frac = 0.8;
  std::uint64_t seed = 1;
  std::int64_t split_seed = -1;  // < 0: train on the whole file
  bool anneal_per_instance = false, freeze_negatives = false;
};

int cmd_train(const TrainArgs& a) {
  auto tree = std::make_shared<const CategoryTree>(CategoryTree::load_tsv(a.taxonomy));
  AdoptionDataset data = load_adoptions(a.adoptions, *tree, a.rating_threshold, a.min_adoptions);
  if (a.split_seed >= 0) {
    auto [train_part, test_part] = split(data, {a.train_frac, static_cast<std::uint64_t>(a.split_seed)});
    (void)test_part;
    data = std::move(train_part);
  }

  nlohmann::ordered_json echo{{"model", a.model},     {"dim", a.dim},
                              {"lr", a.lr},           {"nu", a.nu},
                              {"epochs", a.epochs},   {"sigma", a.sigma},
                              {"seed", a.seed},       {"hs", a.hs},
                              {"init_std", a.init_std}};
  if (a.split_seed >= 0) {
    echo["split_seed"] = a.split_seed;
    echo["train_frac"] = a.train_frac;
  }

  SavedModel out;
  out.tree = tree;
  out.user_ext_ids = data.user_ext_ids();
  out.train_sets = train_sets_of(data);
  if (a.model == "sucm") {
    TrainConfig cfg;
    cfg.k = a.dim;
    cfg.lr = a.lr;
    cfg.nu = a.nu;
    cfg.max_iter = a.epochs;
    cfg.sigma = a.sigma;
    cfg.seed = a.seed;
    cfg.init_std = a.init_std;
    cfg.l2_user = a.l2_user;
    cfg.l2_hs = a.l2_hs;
    cfg.convergence_tol = a.tol;
    cfg.hs_strategy = parse_hs(a.hs);
    cfg.anneal_per_instance = a.anneal_per_instance;
    cfg.prior_weight = a.prior_weight;
    auto [params, report] = train(data, tree, cfg);
    std::cout << "initial objective " << fmt_fixed(report.initial_objective, 6) << "\n";
    for (std::size_t e = 0; e < report.objective.size(); ++e)
      std::cout << "epoch " << (e + 1) << " objective " << fmt_fixed(report.objective[e], 6)
                << " lr " << fmt_fixed(anneal_lr(cfg, static_cast<std::int64_t>(e + 1)), 6) << "\n";
    out.kind = ModelKind::sucm;
    out.sucm = std::move(params);
  } else {
    BaselineConfig cfg;
    cfg.k = a.dim;
    cfg.lr = a.lr;
    cfg.nu = a.nu;
    cfg.max_iter = a.epochs;
    cfg.seed = a.seed;
    cfg.init_std = a.init_std;
    cfg.lambda_u = a.lambda_u;
    cfg.lambda_i = a.lambda_i;
    cfg.lambda_b = a.lambda_b;
    cfg.neg_per_pos = a.neg_per_pos;
    cfg.freeze_negatives = a.freeze_negatives;
    std::pair<FlatParams, TrainReport> result = [&] {
      if (a.model == "llfm") return train_llfm(data, cfg);
      if (a.model == "pmf-neg") return train_pmf_neg(data, cfg);
      if (a.model == "bpr") return train_bpr(data, cfg);
      if (a.model == "ccf") return train_ccf(data, cfg);
      raise(Errc::InvalidArgument, "unknown model " + a.model);
    }();
    for (std::size_t e = 0; e < result.second.objective.size(); ++e)
      std::cout << "epoch " << (e + 1) << " objective "
                << fmt_fixed(result.second.objective[e], 6) << "\n";
    out.kind = ModelKind::flat;
    out.flat = std::move(result.first);
  }
  out.config_json = echo.dump();
  save_model(a.out, out);
  std::cout << "model written to " << a.out << "\n";
  return 0;
}

struct EvalArgs {
  std::string model_file, taxonomy, adoptions, out, json_out;
  std::vector<int> cutoffs = {1, 3, 5, 10};
  double train_frac = 0.8, beta = 0.5, rating_threshold = 3.0;
  int min_adoptions = 40;
  std::uint64_t split_seed = 0;
};

int cmd_evaluate(const EvalArgs& a) {
  SavedModel model = load_model(a.model_file);
  const CategoryTree& tree = *model.tree;
  if (!a.taxonomy.empty()) check_same_taxonomy(CategoryTree::load_tsv(a.taxonomy), tree);
  AdoptionDataset data = load_adoptions(a.adoptions, tree, a.rating_threshold, a.min_adoptions);
  auto [train_part, test_part] = split(data, {a.train_frac, a.split_seed});

  // dataset users -> model users, matched on external ids
  std::vector<UserIdx> model_user(static_cast<std::size_t>(data.num_users()));
  for (UserIdx u = 0; u < data.num_users(); ++u) {
    const std::int64_t ext = data.user_ext_id(u);
    const auto it = std::find(model.user_ext_ids.begin(), model.user_ext_ids.end(), ext);
    if (it == model.user_ext_ids.end())
      raise(Errc::UnknownUser, "user " + std::to_string(ext) + " not in the model file");
    model_user[static_cast<std::size_t>(u)] =
        static_cast<UserIdx>(it - model.user_ext_ids.begin());
  }

  RankFn rank = [&](UserIdx u, int n, std::span<const AppIdx> exclude) {
    const UserIdx mu = model_user[static_cast<std::size_t>(u)];
    const std::vector<ScoredApp> scored = model.kind == ModelKind::sucm
                                              ? score_all(model.sucm, mu, exclude)
                                              : score_flat(model.flat, tree, mu, exclude);
    std::vector<AppIdx> top;
    top.reserve(static_cast<std::size_t>(n));
    for (const ScoredApp& s : scored) {
      top.push_back(s.app);
      if (static_cast<int>(top.size()) == n) break;
    }
    return top;
  };

  EvalReport report = evaluate(rank, train_part, test_part, a.cutoffs, a.beta);
  report.config_echo = {{"model_file", a.model_file},
                        {"adoptions", a.adoptions},
                        {"split_seed", std::to_string(a.split_seed)},
                        {"train_frac", fmt_fixed(a.train_frac, 4)},
                        {"beta", fmt_fixed(a.beta, 4)},
                        {"model_config", model.config_json}};
  const std::string tsv = report.to_tsv();
  std::cout << tsv;
  std::cout << "evaluated " << report.n_evaluated << " users, skipped " << report.n_skipped
            << "\n";
  if (!a.out.empty()) {
    std::ofstream f(a.out);
    if (!f) raise(Errc::InvalidArgument, "cannot write report " + a.out);
    f << tsv;
    const std::string json_path = a.json_out.empty() ? a.out + ".json" : a.json_out;
    std::ofstream jf(json_path);
    if (!jf) raise(Errc::InvalidArgument, "cannot write report " + json_path);
    jf << report.to_json();
  }
  return 0;
}

struct RecommendArgs {
  std::string model_file;
  std::int64_t user = 0;
  int n = 10;
  bool exclude_train = false;
};

int cmd_recommend(const RecommendArgs& a) {
  SavedModel model = load_model(a.model_file);
  const auto it = std::find(model.user_ext_ids.begin(), model.user_ext_ids.end(), a.user);
  if (it == model.user_ext_ids.end())
    raise(Errc::UnknownUser, "user " + std::to_string(a.user) + " not in the model file");
  const UserIdx u = static_cast<UserIdx>(it - model.user_ext_ids.begin());
  std::span<const AppIdx> exclude;
  if (a.exclude_train) exclude = model.train_sets[static_cast<std::size_t>(u)];
  const std::vector<ScoredApp> scored = model.kind == ModelKind::sucm
                                            ? score_all(model.sucm, u, exclude)
                                            : score_flat(model.flat, *model.tree, u, exclude);
  const int top = std::min<int>(a.n, static_cast<int>(scored.size()));
  for (int j = 0; j < top; ++j)
    std::cout << model.tree->app_id_at(scored[static_cast<std::size_t>(j)].app) << '\t'
              << fmt_fixed(scored[static_cast<std::size_t>(j)].score, 10) << "\n";
  return 0;
}

struct SynthArgs {
  std::string out_prefix;
  std::vector<int> fanouts = {5, 5};
  int users = 100, apps_per_subcat = 10, adoptions = 10, dim = 8;
  double scale = 1.0, sigma = 1.0;
  std::uint64_t seed = 1;
};

int cmd_synth(const SynthArgs& a) {
  SynthSpec spec;
  spec.num_users = a.users;
  spec.fanouts = a.fanouts;
  spec.apps_per_subcat = a.apps_per_subcat;
  spec.adoptions_per_user = a.adoptions;
  spec.k = a.dim;
  spec.seed = a.seed;
  spec.scale = a.scale;
  spec.sigma = a.sigma;
  SynthResult r = generate_synthetic(spec);

  r.tree->save_tsv(a.out_prefix + ".taxonomy.tsv");
  save_adoptions_tsv(r.data, *r.tree, a.out_prefix + ".adoptions.tsv");
  SavedModel planted;
  planted.kind = ModelKind::sucm;
  planted.tree = r.tree;
  planted.user_ext_ids = r.data.user_ext_ids();
  planted.train_sets = train_sets_of(r.data);
  nlohmann::ordered_json echo{{"kind", "planted"}, {"users", a.users},
                              {"fanouts", a.fanouts}, {"apps_per_subcat", a.apps_per_subcat},
                              {"adoptions", a.adoptions}, {"dim", a.dim},
                              {"seed", a.seed}, {"scale", a.scale}};
  planted.config_json = echo.dump();
  planted.sucm = std::move(r.planted);
  save_model(a.out_prefix + ".planted.bin", planted);

  const DatasetStats s = stats(r.data);
  std::cout << "synthetic dataset: " << s.n_users << " users, " << s.n_apps << " apps, "
            << s.n_obs << " adoptions\n";
  std::cout << "files: " << a.out_prefix << ".taxonomy.tsv " << a.out_prefix << ".adoptions.tsv "
            << a.out_prefix << ".planted.bin\n";
  return 0;
}

struct ValidateArgs {
  std::string taxonomy, adoptions;
  std::vector<std::int64_t> counts;
  double rating_threshold = 3.0;
  int min_adoptions = 40;
};

void print_stats(const DatasetStats& s) {
  std::cout << "n_users\tn_apps\tn_obs\tsparsity\tmean_adoptions\n";
  std::cout << s.n_users << '\t' << s.n_apps << '\t' << s.n_obs << '\t'
            << fmt_fixed(s.sparsity * 100.0, 2) << "%\t" << fmt_fixed(s.mean_adoptions, 2)
            << "\n";
}

int cmd_validate(const ValidateArgs& a) {
  if (!a.counts.empty()) {
    if (a.counts.size() != 3)
      raise(Errc::InvalidArgument, "--counts expects n_users,n_apps,n_obs");
    print_stats(stats_from_counts(a.counts[0], a.counts[1], a.counts[2]));
    return 0;
  }
  if (a.taxonomy.empty())
    raise(Errc::InvalidArgument, "pass --taxonomy (with optional --adoptions) or --counts");
  const CategoryTree tree = CategoryTree::load_tsv(a.taxonomy);  // runs every invariant
  std::cout << "taxonomy ok: " << tree.num_nodes() << " nodes, " << tree.num_internal()
            << " internal, " << tree.num_apps() << " apps, depth " << tree.max_level() << "\n";
  if (!a.adoptions.empty()) {
    const AdoptionDataset data =
        load_adoptions(a.adoptions, tree, a.rating_threshold, a.min_adoptions);
    print_stats(stats(data));
  }
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, int probes) {
  const GradCheckReport report = run_gradient_checks(seed, probes);
  for (const auto& e : report.entries) {
    std::printf("op %-22s max_rel_err %.3e probes %d\n", e.op.c_str(), e.max_rel_err, e.probes);
  }
  const bool ok = report.passed(1e-4);
  std::printf("gradcheck %s worst %.3e\n", ok ? "PASS" : "FAIL", report.worst());
  return ok ? 0 : 1;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Structural user choice model for top-N recommendation"};
  app.require_subcommand(1);
  app.set_config("--config", "", "INI config file; command-line flags take precedence");

  int rc = 0;

  TrainArgs ta;
  CLI::App* tr = app.add_subcommand("train", "Train the structural model or a baseline");
  tr->add_option("--taxonomy", ta.taxonomy, "Taxonomy TSV")->required()->check(CLI::ExistingFile);
  tr->add_option("--adoptions", ta.adoptions, "Adoption TSV")->required()->check(CLI::ExistingFile);
  tr->add_option("--model", ta.model, "Model to train")
      ->check(CLI::IsMember({"sucm", "llfm", "pmf-neg", "bpr", "ccf"}));
  tr->add_option("--dim", ta.dim, "Latent dimension K")->check(CLI::PositiveNumber);
  tr->add_option("--lr", ta.lr, "Initial learning rate");
  tr->add_option("--nu", ta.nu, "Annealing constant");
  tr->add_option("--epochs", ta.epochs, "Max epochs")->check(CLI::PositiveNumber);
  tr->add_option("--sigma", ta.sigma, "Tree-prior std-dev");
  tr->add_option("--seed", ta.seed, "RNG seed");
  tr->add_option("--hs", ta.hs, "HS tree construction")
      ->check(CLI::IsMember({"balanced", "huffman"}));
  tr->add_option("--out", ta.out, "Output model file")->required();
  tr->add_option("--init-std", ta.init_std, "Gaussian init std");
  tr->add_option("--tol", ta.tol, "Relative objective-change stopping tolerance");
  tr->add_option("--l2-user", ta.l2_user, "Optional L2 on user vectors");
  tr->add_option("--l2-hs", ta.l2_hs, "Optional L2 on HS node vectors");
  tr->add_option("--prior-weight", ta.prior_weight, "Tree-prior tempering weight");
  tr->add_flag("--anneal-per-instance", ta.anneal_per_instance,
               "Anneal per instance instead of per epoch");
  tr->add_option("--lambda-u", ta.lambda_u, "Baseline user L2");
  tr->add_option("--lambda-i", ta.lambda_i, "Baseline item L2");
  tr->add_option("--lambda-b", ta.lambda_b, "Baseline bias L2");
  tr->add_option("--neg-per-pos", ta.neg_per_pos, "Negatives per positive (pmf-neg, ccf)")
      ->check(CLI::PositiveNumber);
  tr->add_flag("--freeze-negatives", ta.freeze_negatives, "PMF_Neg: sample negatives once");
  tr->add_option("--rating-threshold", ta.rating_threshold, "Keep records rated >= threshold");
  tr->add_option("--min-adoptions", ta.min_adoptions, "Drop users with fewer adoptions");
  tr->add_option("--split-seed", ta.split_seed,
                 "Train on the train side of the per-user split with this seed");
  tr->add_option("--train-frac", ta.train_frac, "Train fraction for --split-seed");
  tr->callback([&] { rc = cmd_train(ta); });

  EvalArgs ea;
  CLI::App* ev = app.add_subcommand("evaluate", "Split, rank, and report the five metrics");
  ev->add_option("--model-file", ea.model_file, "Trained model")->required()->check(CLI::ExistingFile);
  ev->add_option("--taxonomy", ea.taxonomy, "Taxonomy TSV (cross-checked against the model)")
      ->check(CLI::ExistingFile);
  ev->add_option("--adoptions", ea.adoptions, "Adoption TSV")->required()->check(CLI::ExistingFile);
  ev->add_option("--split-seed", ea.split_seed, "Split seed");
  ev->add_option("--train-frac", ea.train_frac, "Train fraction");
  ev->add_option("--cutoffs", ea.cutoffs, "Top-N cutoffs")->delimiter(',');
  ev->add_option("--out", ea.out, "Report TSV path (JSON written alongside)");
  ev->add_option("--json", ea.json_out, "Report JSON path");
  ev->add_option("--beta", ea.beta, "F-measure beta");
  ev->add_option("--rating-threshold", ea.rating_threshold, "Keep records rated >= threshold");
  ev->add_option("--min-adoptions", ea.min_adoptions, "Drop users with fewer adoptions");
  ev->callback([&] { rc = cmd_evaluate(ea); });

  RecommendArgs ra;
  CLI::App* rc_cmd = app.add_subcommand("recommend", "Print the top-n apps for one user");
  rc_cmd->add_option("--model-file", ra.model_file, "Trained model")->required()->check(CLI::ExistingFile);
  rc_cmd->add_option("--user", ra.user, "User id")->required();
  rc_cmd->add_option("--n", ra.n, "List length")->check(CLI::PositiveNumber);
  rc_cmd->add_flag("--exclude-train", ra.exclude_train, "Hide the user's training adoptions");
  rc_cmd->callback([&] { rc = cmd_recommend(ra); });

  SynthArgs sa;
  CLI::App* sy = app.add_subcommand("synth", "Generate a planted-model dataset");
  sy->add_option("--users", sa.users, "Number of users")->check(CLI::PositiveNumber);
  sy->add_option("--fanouts", sa.fanouts, "Internal fan-out per level")->delimiter(',');
  sy->add_option("--apps-per-subcat", sa.apps_per_subcat, "Apps per bottom subcategory")
      ->check(CLI::PositiveNumber);
  sy->add_option("--adoptions", sa.adoptions, "Adoptions per user")->check(CLI::PositiveNumber);
  sy->add_option("--dim", sa.dim, "Latent dimension")->check(CLI::PositiveNumber);
  sy->add_option("--seed", sa.seed, "RNG seed");
  sy->add_option("--scale", sa.scale, "Planted parameter scale");
  sy->add_option("--sigma", sa.sigma, "Sigma recorded on the planted model");
  sy->add_option("--out-prefix", sa.out_prefix, "Output file prefix")->required();
  sy->callback([&] { rc = cmd_synth(sa); });

  ValidateArgs va;
  CLI::App* vd = app.add_subcommand("validate", "Check files and print dataset statistics");
  vd->add_option("--taxonomy", va.taxonomy, "Taxonomy TSV")->check(CLI::ExistingFile);
  vd->add_option("--adoptions", va.adoptions, "Adoption TSV")->check(CLI::ExistingFile);
  vd->add_option("--counts", va.counts, "n_users,n_apps,n_obs: print stats for raw counts")
      ->delimiter(',');
  vd->add_option("--rating-threshold", va.rating_threshold, "Keep records rated >= threshold");
  vd->add_option("--min-adoptions", va.min_adoptions, "Drop users with fewer adoptions");
  vd->callback([&] { rc = cmd_validate(va); });

  std::uint64_t gc_seed = 1;
  int gc_probes = 100;
  CLI::App* gc = app.add_subcommand("gradcheck", "Finite-difference check of every gradient");
  gc->add_option("--seed", gc_seed, "RNG seed");
  gc->add_option("--probes", gc_probes, "Probes per operation")->check(CLI::PositiveNumber);
  gc->callback([&] { rc = cmd_gradcheck(gc_seed, gc_probes); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: Internal: " << e.what() << "\n";
    return 3;
  }
  return rc;
}

}  // namespace sucm

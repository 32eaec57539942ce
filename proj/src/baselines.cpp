#include "sucm/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <unordered_set>

#include "sucm/numerics.hpp"

namespace sucm {

namespace {

void check_user_app(const FlatParams& fp, UserIdx u, AppIdx i) {
  if (u < 0 || u >= fp.num_users()) raise(Errc::UnknownUser, "user index " + std::to_string(u));
  if (i < 0 || i >= fp.num_apps()) raise(Errc::UnknownApp, "app index " + std::to_string(i));
}

struct EpochDriver {
  std::mt19937_64 rng;
  std::vector<std::size_t> order;
  explicit EpochDriver(std::uint64_t seed, std::size_t n) : rng(mix_seed(seed)), order(n) {
    for (std::size_t j = 0; j < n; ++j) order[j] = j;
  }
  void shuffle() { std::shuffle(order.begin(), order.end(), rng); }
};

double reg_all(const FlatParams& fp, const BaselineConfig& cfg) {
  return cfg.lambda_u * fp.P.squaredNorm() + cfg.lambda_i * fp.Q.squaredNorm() +
         cfg.lambda_b * fp.b.squaredNorm();
}

}  // namespace

void BaselineConfig::validate() const {
  if (k < 1) raise(Errc::InvalidArgument, "latent dimension must be >= 1");
  if (lr <= 0.0) raise(Errc::InvalidArgument, "learning rate must be positive");
  if (nu <= 0.0) raise(Errc::InvalidArgument, "annealing constant nu must be positive");
  if (max_iter < 1) raise(Errc::InvalidArgument, "max_iter must be >= 1");
  if (init_std < 0.0) raise(Errc::InvalidArgument, "init_std must be >= 0");
  if (lambda_u < 0.0 || lambda_i < 0.0 || lambda_b < 0.0)
    raise(Errc::InvalidArgument, "regularization weights must be >= 0");
  if (neg_per_pos < 1) raise(Errc::InvalidArgument, "neg_per_pos must be >= 1");
}

std::vector<AppIdx> negative_sample(const AdoptionDataset& train, UserIdx u, int count,
                                    std::mt19937_64& rng) {
  if (count < 1) raise(Errc::InvalidArgument, "negative sample count must be >= 1");
  const auto adopted = train.adopted(u);
  const int n_apps = train.num_apps();
  const int avail = n_apps - static_cast<int>(adopted.size());
  if (avail <= 0)
    raise(Errc::UserHasAdoptedEverything,
          "user " + std::to_string(train.user_ext_id(u)) + " adopted every app");
  const int want = std::min(count, avail);

  std::vector<AppIdx> out;
  out.reserve(static_cast<std::size_t>(want));
  if (want * 2 >= avail) {
    // dense user: enumerate the complement and take a partial shuffle
    std::vector<AppIdx> pool;
    pool.reserve(static_cast<std::size_t>(avail));
    std::size_t k = 0;
    for (AppIdx a = 0; a < n_apps; ++a) {
      if (k < adopted.size() && adopted[k] == a) {
        ++k;
        continue;
      }
      pool.push_back(a);
    }
    for (int j = 0; j < want; ++j) {
      std::uniform_int_distribution<std::size_t> pick(j, pool.size() - 1);
      std::swap(pool[static_cast<std::size_t>(j)], pool[pick(rng)]);
      out.push_back(pool[static_cast<std::size_t>(j)]);
    }
  } else {
    std::uniform_int_distribution<AppIdx> pick(0, n_apps - 1);
    std::unordered_set<AppIdx> used;
    while (static_cast<int>(out.size()) < want) {
      const AppIdx a = pick(rng);
      if (std::binary_search(adopted.begin(), adopted.end(), a)) continue;
      if (!used.insert(a).second) continue;
      out.push_back(a);
    }
  }
  return out;
}

FlatParams init_flat_params(const BaselineConfig& cfg, int num_users, int num_apps) {
  cfg.validate();
  FlatParams fp;
  fp.k = cfg.k;
  fp.P.resize(cfg.k, num_users);
  fp.Q.resize(cfg.k, num_apps);
  fp.b = Eigen::VectorXd::Zero(num_apps);
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, cfg.init_std > 0.0 ? cfg.init_std : 1.0);
  auto fill = [&](Eigen::MatrixXd& m) {
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = cfg.init_std == 0.0 ? 0.0 : gauss(rng);
  };
  fill(fp.P);
  fill(fp.Q);
  return fp;
}

double llfm_instance_loss(const FlatParams& fp, UserIdx u, AppIdx i, const BaselineConfig& cfg) {
  check_user_app(fp, u, i);
  const double x = fp.score(u, i);
  return -log_sigmoid(x) + cfg.lambda_u * fp.P.col(u).squaredNorm() +
         cfg.lambda_i * fp.Q.col(i).squaredNorm() + cfg.lambda_b * fp.b(i) * fp.b(i);
}

void llfm_step(FlatParams& fp, UserIdx u, AppIdx i, double lr, const BaselineConfig& cfg) {
  check_user_app(fp, u, i);
  const double x = fp.score(u, i);
  const double resid = 1.0 - sigmoid(x);  // -d loss / d x
  const Eigen::VectorXd pu = fp.P.col(u);
  const Eigen::VectorXd qi = fp.Q.col(i);
  fp.P.col(u) += lr * (resid * qi - 2.0 * cfg.lambda_u * pu);
  fp.Q.col(i) += lr * (resid * pu - 2.0 * cfg.lambda_i * qi);
  fp.b(i) += lr * (resid - 2.0 * cfg.lambda_b * fp.b(i));
}

double pmf_instance_loss(const FlatParams& fp, UserIdx u, AppIdx i, double y,
                         const BaselineConfig& cfg) {
  check_user_app(fp, u, i);
  const double e = y - fp.score(u, i);
  return e * e + cfg.lambda_u * fp.P.col(u).squaredNorm() +
         cfg.lambda_i * fp.Q.col(i).squaredNorm() + cfg.lambda_b * fp.b(i) * fp.b(i);
}

void pmf_step(FlatParams& fp, UserIdx u, AppIdx i, double y, double lr,
              const BaselineConfig& cfg) {
  check_user_app(fp, u, i);
  const double e = y - fp.score(u, i);
  const Eigen::VectorXd pu = fp.P.col(u);
  const Eigen::VectorXd qi = fp.Q.col(i);
  fp.P.col(u) += lr * (2.0 * e * qi - 2.0 * cfg.lambda_u * pu);
  fp.Q.col(i) += lr * (2.0 * e * pu - 2.0 * cfg.lambda_i * qi);
  fp.b(i) += lr * (2.0 * e - 2.0 * cfg.lambda_b * fp.b(i));
}

double bpr_instance_objective(const FlatParams& fp, UserIdx u, AppIdx i, AppIdx j,
                              const BaselineConfig& cfg) {
  check_user_app(fp, u, i);
  check_user_app(fp, u, j);
  const double d = fp.score(u, i) - fp.score(u, j);
  return log_sigmoid(d) - cfg.lambda_u * fp.P.col(u).squaredNorm() -
         cfg.lambda_i * (fp.Q.col(i).squaredNorm() + fp.Q.col(j).squaredNorm()) -
         cfg.lambda_b * (fp.b(i) * fp.b(i) + fp.b(j) * fp.b(j));
}

void bpr_step(FlatParams& fp, UserIdx u, AppIdx i, AppIdx j, double lr,
              const BaselineConfig& cfg) {
  check_user_app(fp, u, i);
  check_user_app(fp, u, j);
  const double d = fp.score(u, i) - fp.score(u, j);
  const double coef = 1.0 - sigmoid(d);  // d ln sigmoid(d) / d d
  const Eigen::VectorXd pu = fp.P.col(u);
  const Eigen::VectorXd qi = fp.Q.col(i);
  const Eigen::VectorXd qj = fp.Q.col(j);
  fp.P.col(u) += lr * (coef * (qi - qj) - 2.0 * cfg.lambda_u * pu);
  fp.Q.col(i) += lr * (coef * pu - 2.0 * cfg.lambda_i * qi);
  fp.Q.col(j) += lr * (-coef * pu - 2.0 * cfg.lambda_i * qj);
  fp.b(i) += lr * (coef - 2.0 * cfg.lambda_b * fp.b(i));
  fp.b(j) += lr * (-coef - 2.0 * cfg.lambda_b * fp.b(j));
}

double ccf_instance_loss(const FlatParams& fp, UserIdx u, AppIdx i,
                         std::span<const AppIdx> negatives, const BaselineConfig& cfg) {
  check_user_app(fp, u, i);
  std::vector<double> scores;
  scores.reserve(negatives.size() + 1);
  scores.push_back(fp.score(u, i));
  double reg = cfg.lambda_u * fp.P.col(u).squaredNorm() + cfg.lambda_i * fp.Q.col(i).squaredNorm() +
               cfg.lambda_b * fp.b(i) * fp.b(i);
  for (AppIdx j : negatives) {
    check_user_app(fp, u, j);
    scores.push_back(fp.score(u, j));
    reg += cfg.lambda_i * fp.Q.col(j).squaredNorm() + cfg.lambda_b * fp.b(j) * fp.b(j);
  }
  return log_sum_exp(scores) - scores.front() + reg;
}

void ccf_step(FlatParams& fp, UserIdx u, AppIdx i, std::span<const AppIdx> negatives, double lr,
              const BaselineConfig& cfg) {
  check_user_app(fp, u, i);
  std::vector<AppIdx> offer;
  offer.reserve(negatives.size() + 1);
  offer.push_back(i);
  offer.insert(offer.end(), negatives.begin(), negatives.end());
  std::vector<double> prob(offer.size());
  for (std::size_t j = 0; j < offer.size(); ++j) {
    check_user_app(fp, u, offer[j]);
    prob[j] = fp.score(u, offer[j]);
  }
  softmax_inplace(prob);

  const Eigen::VectorXd pu = fp.P.col(u);
  Eigen::VectorXd gp = Eigen::VectorXd::Zero(fp.k);  // descent direction for p_u
  std::vector<Eigen::VectorXd> gq(offer.size());
  std::vector<double> gb(offer.size());
  for (std::size_t j = 0; j < offer.size(); ++j) {
    const double coef = prob[j] - (j == 0 ? 1.0 : 0.0);  // d loss / d score_j
    gp += coef * fp.Q.col(offer[j]);
    gq[j] = coef * pu + 2.0 * cfg.lambda_i * fp.Q.col(offer[j]);
    gb[j] = coef + 2.0 * cfg.lambda_b * fp.b(offer[j]);
  }
  gp += 2.0 * cfg.lambda_u * pu;
  fp.P.col(u) -= lr * gp;
  for (std::size_t j = 0; j < offer.size(); ++j) {
    fp.Q.col(offer[j]) -= lr * gq[j];
    fp.b(offer[j]) -= lr * gb[j];
  }
}

std::pair<FlatParams, TrainReport> train_llfm(const AdoptionDataset& train,
                                              const BaselineConfig& cfg) {
  cfg.validate();
  if (train.empty()) raise(Errc::EmptyTrainingSet, "no training instances");
  const auto t0 = std::chrono::steady_clock::now();
  FlatParams fp = init_flat_params(cfg, train.num_users(), train.num_apps());
  EpochDriver drv(cfg.seed, train.instances().size());
  TrainReport report;
  for (int epoch = 1; epoch <= cfg.max_iter; ++epoch) {
    drv.shuffle();
    const double lr = annealed_lr(cfg.lr, cfg.nu, epoch);
    for (std::size_t j : drv.order) {
      const Instance& in = train.instances()[j];
      llfm_step(fp, in.user, in.app, lr, cfg);
    }
    double loss = reg_all(fp, cfg);
    for (const Instance& in : train.instances()) loss += -log_sigmoid(fp.score(in.user, in.app));
    report.objective.push_back(loss);
    report.instances_processed += static_cast<std::int64_t>(train.instances().size());
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(fp), std::move(report)};
}

std::pair<FlatParams, TrainReport> train_pmf_neg(const AdoptionDataset& train,
                                                 const BaselineConfig& cfg) {
  cfg.validate();
  if (train.empty()) raise(Errc::EmptyTrainingSet, "no training instances");
  const auto t0 = std::chrono::steady_clock::now();
  FlatParams fp = init_flat_params(cfg, train.num_users(), train.num_apps());
  EpochDriver drv(cfg.seed, train.instances().size());
  TrainReport report;

  std::vector<std::vector<AppIdx>> frozen;
  if (cfg.freeze_negatives) {
    frozen.resize(train.instances().size());
    for (std::size_t j = 0; j < frozen.size(); ++j)
      frozen[j] = negative_sample(train, train.instances()[j].user, cfg.neg_per_pos, drv.rng);
  }

  for (int epoch = 1; epoch <= cfg.max_iter; ++epoch) {
    drv.shuffle();
    const double lr = annealed_lr(cfg.lr, cfg.nu, epoch);
    double data_loss = 0.0;
    for (std::size_t j : drv.order) {
      const Instance& in = train.instances()[j];
      pmf_step(fp, in.user, in.app, 1.0, lr, cfg);
      const std::vector<AppIdx> negs =
          cfg.freeze_negatives ? frozen[j]
                               : negative_sample(train, in.user, cfg.neg_per_pos, drv.rng);
      for (AppIdx neg : negs) pmf_step(fp, in.user, neg, 0.0, lr, cfg);
      const double ep = 1.0 - fp.score(in.user, in.app);
      data_loss += ep * ep;
      for (AppIdx neg : negs) {
        const double en = fp.score(in.user, neg);
        data_loss += en * en;
      }
    }
    report.objective.push_back(data_loss + reg_all(fp, cfg));
    report.instances_processed += static_cast<std::int64_t>(train.instances().size());
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(fp), std::move(report)};
}

std::pair<FlatParams, TrainReport> train_bpr(const AdoptionDataset& train,
                                             const BaselineConfig& cfg) {
  cfg.validate();
  if (train.empty()) raise(Errc::EmptyTrainingSet, "no training instances");
  const auto t0 = std::chrono::steady_clock::now();
  FlatParams fp = init_flat_params(cfg, train.num_users(), train.num_apps());
  EpochDriver drv(cfg.seed, train.instances().size());
  TrainReport report;
  for (int epoch = 1; epoch <= cfg.max_iter; ++epoch) {
    drv.shuffle();
    const double lr = annealed_lr(cfg.lr, cfg.nu, epoch);
    double criterion = 0.0;
    for (std::size_t j : drv.order) {
      const Instance& in = train.instances()[j];
      const AppIdx neg = negative_sample(train, in.user, 1, drv.rng).front();
      bpr_step(fp, in.user, in.app, neg, lr, cfg);
      criterion += log_sigmoid(fp.score(in.user, in.app) - fp.score(in.user, neg));
    }
    report.objective.push_back(criterion - reg_all(fp, cfg));
    report.instances_processed += static_cast<std::int64_t>(train.instances().size());
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(fp), std::move(report)};
}

std::pair<FlatParams, TrainReport> train_ccf(const AdoptionDataset& train,
                                             const BaselineConfig& cfg) {
  cfg.validate();
  if (train.empty()) raise(Errc::EmptyTrainingSet, "no training instances");
  const auto t0 = std::chrono::steady_clock::now();
  FlatParams fp = init_flat_params(cfg, train.num_users(), train.num_apps());
  EpochDriver drv(cfg.seed, train.instances().size());
  TrainReport report;
  BaselineConfig bare = cfg;  // loss is reported without the reg part per offer
  bare.lambda_u = bare.lambda_i = bare.lambda_b = 0.0;
  for (int epoch = 1; epoch <= cfg.max_iter; ++epoch) {
    drv.shuffle();
    const double lr = annealed_lr(cfg.lr, cfg.nu, epoch);
    double data_loss = 0.0;
    for (std::size_t j : drv.order) {
      const Instance& in = train.instances()[j];
      const std::vector<AppIdx> negs = negative_sample(train, in.user, cfg.neg_per_pos, drv.rng);
      ccf_step(fp, in.user, in.app, negs, lr, cfg);
      data_loss += ccf_instance_loss(fp, in.user, in.app, negs, bare);
    }
    report.objective.push_back(data_loss + reg_all(fp, cfg));
    report.instances_processed += static_cast<std::int64_t>(train.instances().size());
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(fp), std::move(report)};
}

std::vector<ScoredApp> score_flat(const FlatParams& fp, const CategoryTree& tree, UserIdx u,
                                  std::span<const AppIdx> exclude) {
  if (u < 0 || u >= fp.num_users()) raise(Errc::UnknownUser, "user index " + std::to_string(u));
  std::vector<ScoredApp> out;
  out.reserve(static_cast<std::size_t>(fp.num_apps()));
  for (AppIdx a = 0; a < fp.num_apps(); ++a) {
    if (std::binary_search(exclude.begin(), exclude.end(), a)) continue;
    out.push_back({a, fp.score(u, a)});
  }
  std::sort(out.begin(), out.end(), [&tree](const ScoredApp& x, const ScoredApp& y) {
    if (x.score != y.score) return x.score > y.score;
    return tree.app_id_at(x.app) < tree.app_id_at(y.app);
  });
  return out;
}

}  // namespace sucm

#include "sucm/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "json.hpp"

namespace sucm {

namespace {

bool hit(std::span<const AppIdx> adopted_sorted, AppIdx a) {
  return std::binary_search(adopted_sorted.begin(), adopted_sorted.end(), a);
}

void require_test_set(std::span<const AppIdx> adopted, int n) {
  if (n < 1) raise(Errc::InvalidArgument, "cutoff must be >= 1");
  if (adopted.empty()) raise(Errc::EmptyTestSet, "metric over an empty test set");
}

}  // namespace

std::pair<AdoptionDataset, AdoptionDataset> split(const AdoptionDataset& data,
                                                  const SplitSpec& spec) {
  if (spec.train_fraction <= 0.0 || spec.train_fraction >= 1.0)
    raise(Errc::InvalidArgument, "train_fraction must be in (0, 1)");
  std::vector<Instance> train_inst, test_inst;
  std::mt19937_64 rng(mix_seed(spec.seed));
  for (UserIdx u = 0; u < data.num_users(); ++u) {
    const auto adopted = data.adopted(u);
    std::vector<AppIdx> apps(adopted.begin(), adopted.end());
    std::shuffle(apps.begin(), apps.end(), rng);
    const int n = static_cast<int>(apps.size());
    int k = static_cast<int>(std::floor(spec.train_fraction * n));
    if (n >= 2) k = std::clamp(k, 1, n - 1);
    else k = n;
    std::sort(apps.begin(), apps.begin() + k);
    std::sort(apps.begin() + k, apps.end());
    for (int j = 0; j < k; ++j) train_inst.push_back({u, apps[static_cast<std::size_t>(j)]});
    for (int j = k; j < n; ++j) test_inst.push_back({u, apps[static_cast<std::size_t>(j)]});
  }
  auto ids = data.user_ext_ids();
  return {AdoptionDataset::from_instances(data.num_users(), data.num_apps(), std::move(train_inst), ids),
          AdoptionDataset::from_instances(data.num_users(), data.num_apps(), std::move(test_inst),
                                          std::move(ids))};
}

std::pair<double, double> precision_recall_at_n(std::span<const AppIdx> recommended,
                                                std::span<const AppIdx> adopted_test_sorted,
                                                int n) {
  require_test_set(adopted_test_sorted, n);
  int hits = 0;
  const int top = std::min<int>(n, static_cast<int>(recommended.size()));
  for (int k = 0; k < top; ++k)
    if (hit(adopted_test_sorted, recommended[static_cast<std::size_t>(k)])) ++hits;
  return {static_cast<double>(hits) / n,
          static_cast<double>(hits) / static_cast<double>(adopted_test_sorted.size())};
}

double f_beta(double precision, double recall, double beta) {
  if (precision == 0.0 && recall == 0.0) return 0.0;
  const double b2 = beta * beta;
  return (1.0 + b2) * precision * recall / (b2 * precision + recall);
}

double ap_at_n(std::span<const AppIdx> recommended, std::span<const AppIdx> adopted_test_sorted,
               int n) {
  require_test_set(adopted_test_sorted, n);
  int hits = 0;
  double sum = 0.0;
  const int top = std::min<int>(n, static_cast<int>(recommended.size()));
  for (int k = 0; k < top; ++k) {
    if (hit(adopted_test_sorted, recommended[static_cast<std::size_t>(k)])) {
      ++hits;
      sum += static_cast<double>(hits) / (k + 1);
    }
  }
  return sum / std::min<int>(n, static_cast<int>(adopted_test_sorted.size()));
}

double ndcg_at_n(std::span<const AppIdx> recommended, std::span<const AppIdx> adopted_test_sorted,
                 int n) {
  require_test_set(adopted_test_sorted, n);
  double dcg = 0.0;
  const int top = std::min<int>(n, static_cast<int>(recommended.size()));
  for (int k = 0; k < top; ++k)
    if (hit(adopted_test_sorted, recommended[static_cast<std::size_t>(k)]))
      dcg += 1.0 / std::log2(k + 2.0);
  double idcg = 0.0;
  const int ideal = std::min<int>(n, static_cast<int>(adopted_test_sorted.size()));
  for (int k = 0; k < ideal; ++k) idcg += 1.0 / std::log2(k + 2.0);
  return dcg / idcg;
}

EvalReport evaluate(const RankFn& rank, const AdoptionDataset& train, const AdoptionDataset& test,
                    std::span<const int> cutoffs, double beta) {
  if (cutoffs.empty()) raise(Errc::InvalidArgument, "no cutoffs");
  int max_n = 0;
  for (int n : cutoffs) {
    if (n < 1) raise(Errc::InvalidArgument, "cutoff must be >= 1");
    max_n = std::max(max_n, n);
  }
  if (train.num_users() != test.num_users())
    raise(Errc::InvalidArgument, "train/test splits disagree on the user set");

  EvalReport rep;
  rep.cutoffs.assign(cutoffs.begin(), cutoffs.end());
  rep.beta = beta;
  const char* names[] = {"precision", "recall", "f_beta", "map", "ndcg"};
  std::vector<std::vector<double>> sums(5, std::vector<double>(cutoffs.size(), 0.0));

  for (UserIdx u = 0; u < test.num_users(); ++u) {
    const auto adopted = test.adopted(u);
    if (adopted.empty()) {
      ++rep.n_skipped;
      continue;
    }
    const std::vector<AppIdx> rec = rank(u, max_n, train.adopted(u));
    for (std::size_t c = 0; c < cutoffs.size(); ++c) {
      const int n = cutoffs[c];
      const auto [p, r] = precision_recall_at_n(rec, adopted, n);
      sums[0][c] += p;
      sums[1][c] += r;
      sums[2][c] += f_beta(p, r, beta);
      sums[3][c] += ap_at_n(rec, adopted, n);
      sums[4][c] += ndcg_at_n(rec, adopted, n);
    }
    ++rep.n_evaluated;
  }
  if (rep.n_evaluated == 0) raise(Errc::NoEvaluableUsers, "every user has an empty test set");
  for (int m = 0; m < 5; ++m) {
    for (double& v : sums[static_cast<std::size_t>(m)]) v /= rep.n_evaluated;
    rep.metrics.emplace_back(names[m], std::move(sums[static_cast<std::size_t>(m)]));
  }
  return rep;
}

std::vector<int> default_cutoffs() { return {1, 3, 5, 10}; }

double EvalReport::value(const std::string& metric, int cutoff) const {
  for (const auto& [name, vals] : metrics) {
    if (name != metric) continue;
    for (std::size_t c = 0; c < cutoffs.size(); ++c)
      if (cutoffs[c] == cutoff) return vals[c];
  }
  raise(Errc::InvalidArgument, "no value for " + metric + "@" + std::to_string(cutoff));
}

std::string EvalReport::to_tsv() const {
  std::ostringstream out;
  out << "metric\tcutoff\tvalue\tn_users\n";
  for (const auto& [name, vals] : metrics)
    for (std::size_t c = 0; c < cutoffs.size(); ++c)
      out << name << '\t' << cutoffs[c] << '\t' << fmt_fixed(vals[c], 10) << '\t' << n_evaluated
          << '\n';
  return out.str();
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["cutoffs"] = cutoffs;
  j["n_evaluated"] = n_evaluated;
  j["n_skipped"] = n_skipped;
  j["beta"] = beta;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : config_echo) cfg[k] = v;
  j["config"] = cfg;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& [name, vals] : metrics) {
    for (std::size_t c = 0; c < cutoffs.size(); ++c) {
      rows.push_back({{"metric", name},
                      {"cutoff", cutoffs[c]},
                      {"value", vals[c]},
                      {"n_users", n_evaluated}});
    }
  }
  j["results"] = rows;
  return j.dump(2) + "\n";
}

}  // namespace sucm

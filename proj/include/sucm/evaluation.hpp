#pragma once

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sucm/common.hpp"
#include "sucm/dataset.hpp"

namespace sucm {

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

// Per-user split: floor(train_fraction * n) adoptions to train, clamped so
// both sides get at least one when the user has two or more; a single
// adoption goes to train and the user is skipped at evaluation time.
std::pair<AdoptionDataset, AdoptionDataset> split(const AdoptionDataset& data,
                                                  const SplitSpec& spec);

std::pair<double, double> precision_recall_at_n(std::span<const AppIdx> recommended,
                                                std::span<const AppIdx> adopted_test_sorted,
                                                int n);
double f_beta(double precision, double recall, double beta = 0.5);
double ap_at_n(std::span<const AppIdx> recommended, std::span<const AppIdx> adopted_test_sorted,
               int n);
double ndcg_at_n(std::span<const AppIdx> recommended, std::span<const AppIdx> adopted_test_sorted,
                 int n);

// rank(u, n, exclude_sorted) -> top-n app indices, best first
using RankFn =
    std::function<std::vector<AppIdx>(UserIdx u, int n, std::span<const AppIdx> exclude_sorted)>;

struct EvalReport {
  std::vector<int> cutoffs;
  // fixed metric order: precision, recall, f_beta, map, ndcg
  std::vector<std::pair<std::string, std::vector<double>>> metrics;
  int n_evaluated = 0;
  int n_skipped = 0;
  double beta = 0.5;
  std::vector<std::pair<std::string, std::string>> config_echo;

  double value(const std::string& metric, int cutoff) const;
  std::string to_tsv() const;
  std::string to_json() const;
};

EvalReport evaluate(const RankFn& rank, const AdoptionDataset& train, const AdoptionDataset& test,
                    std::span<const int> cutoffs, double beta = 0.5);

std::vector<int> default_cutoffs();  // {1, 3, 5, 10}

}  // namespace sucm

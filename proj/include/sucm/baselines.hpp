#pragma once

#include <random>
#include <span>
#include <utility>
#include <vector>

#include "sucm/common.hpp"
#include "sucm/dataset.hpp"
#include "sucm/flat_params.hpp"
#include "sucm/taxonomy.hpp"
#include "sucm/training.hpp"

namespace sucm {

struct BaselineConfig {
  int k = 20;
  double lr = 0.05;
  double nu = 50.0;       // same annealing schedule as the structural model
  int max_iter = 50;
  std::uint64_t seed = 1;
  double init_std = 0.1;
  double lambda_u = 0.01;
  double lambda_i = 0.01;
  double lambda_b = 0.01;
  int neg_per_pos = 5;            // PMF_Neg and CCF; BPR draws one triple per positive
  bool freeze_negatives = false;  // PMF_Neg: keep epoch-1 negatives instead of resampling

  void validate() const;
};

// Uniform over the apps user u has not adopted in training; no duplicates
// within one call. The count is capped by the number of available apps.
std::vector<AppIdx> negative_sample(const AdoptionDataset& train, UserIdx u, int count,
                                    std::mt19937_64& rng);

FlatParams init_flat_params(const BaselineConfig& cfg, int num_users, int num_apps);

// Per-instance losses and the matching simultaneous SGD updates. Negatives
// are passed in explicitly so the formulas stay testable in isolation.
double llfm_instance_loss(const FlatParams& fp, UserIdx u, AppIdx i, const BaselineConfig& cfg);
void llfm_step(FlatParams& fp, UserIdx u, AppIdx i, double lr, const BaselineConfig& cfg);

double pmf_instance_loss(const FlatParams& fp, UserIdx u, AppIdx i, double y,
                         const BaselineConfig& cfg);
void pmf_step(FlatParams& fp, UserIdx u, AppIdx i, double y, double lr,
              const BaselineConfig& cfg);

// maximized criterion: ln sigmoid(y_ui - y_uj) minus the Gaussian-prior penalty
double bpr_instance_objective(const FlatParams& fp, UserIdx u, AppIdx i, AppIdx j,
                              const BaselineConfig& cfg);
void bpr_step(FlatParams& fp, UserIdx u, AppIdx i, AppIdx j, double lr,
              const BaselineConfig& cfg);

// offer set A(i) = {i} union negatives; pass lambda_* = 0 for the bare choice loss
double ccf_instance_loss(const FlatParams& fp, UserIdx u, AppIdx i,
                         std::span<const AppIdx> negatives, const BaselineConfig& cfg);
void ccf_step(FlatParams& fp, UserIdx u, AppIdx i, std::span<const AppIdx> negatives, double lr,
              const BaselineConfig& cfg);

std::pair<FlatParams, TrainReport> train_llfm(const AdoptionDataset& train,
                                              const BaselineConfig& cfg);
std::pair<FlatParams, TrainReport> train_pmf_neg(const AdoptionDataset& train,
                                                 const BaselineConfig& cfg);
std::pair<FlatParams, TrainReport> train_bpr(const AdoptionDataset& train,
                                             const BaselineConfig& cfg);
std::pair<FlatParams, TrainReport> train_ccf(const AdoptionDataset& train,
                                             const BaselineConfig& cfg);

// rank all apps by b_i + p_u . q_i, descending, ties by ascending app id
std::vector<ScoredApp> score_flat(const FlatParams& fp, const CategoryTree& tree, UserIdx u,
                                  std::span<const AppIdx> exclude = {});

}  // namespace sucm

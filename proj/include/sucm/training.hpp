#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "sucm/common.hpp"
#include "sucm/dataset.hpp"
#include "sucm/model.hpp"

namespace sucm {

struct TrainConfig {
  int k = 20;
  double lr = 0.05;              // initial learning rate epsilon (grid-picked on the synthetic benchmark)
  double nu = 50.0;              // annealing constant
  int max_iter = 50;             // epochs
  double sigma = 1.0;            // tree-prior std-dev
  std::uint64_t seed = 1;
  double init_std = 0.1;         // Gaussian init std for all latent vectors
  double l2_user = 0.0;
  double l2_hs = 0.0;
  double convergence_tol = 1e-5; // relative objective change between epochs
  HsStrategy hs_strategy = HsStrategy::balanced;
  bool anneal_per_instance = false;  // default: nIter = epoch index
  double prior_weight = 1.0;

  void validate() const;
  ObjectiveOptions objective_options() const { return {l2_user, l2_hs, prior_weight}; }
};

struct TrainReport {
  double initial_objective = 0.0;
  std::vector<double> objective;  // one entry per completed epoch
  double wall_seconds = 0.0;
  std::int64_t instances_processed = 0;
  std::int64_t param_touches = 0;
  bool converged = false;
};

// epsilon * nu / (nu + nIter - 1), nIter 1-based
double annealed_lr(double lr, double nu, std::int64_t n_iter);
double anneal_lr(const TrainConfig& cfg, std::int64_t n_iter);

ModelParams init_params(const TrainConfig& cfg, std::shared_ptr<const CategoryTree> tree,
                        std::shared_ptr<const HsForest> forest, int num_users);

struct NodeGrad {
  Eigen::VectorXd vec;
  double bias = 0.0;
};

// Ascent gradients of the per-instance objective for one adoption (u, i).
Eigen::VectorXd grad_user(const ModelParams& mp, UserIdx u, AppIdx i,
                          const ObjectiveOptions& opt = {});
// z must be on the choice path or the sibling of a path node
NodeGrad grad_category_node(const ModelParams& mp, UserIdx u, AppIdx i, NodeId z,
                            const ObjectiveOptions& opt = {});
// level is 1-based in 1..L(i)-1
NodeGrad grad_hs_node(const ModelParams& mp, UserIdx u, AppIdx i, int level,
                      const ObjectiveOptions& opt = {});

// The function the gradients above differentiate: the instance's path
// log-likelihood plus the prior terms of every touched node (each prior edge
// counted once) plus the L2 terms of the touched parameters.
double instance_objective(const ModelParams& mp, UserIdx u, AppIdx i,
                          const ObjectiveOptions& opt = {});

struct StepStats {
  int category_nodes = 0;  // sum over levels of the competing-set sizes
  int hs_nodes = 0;        // L(i) - 1
  int total_touched() const { return category_nodes + hs_nodes + 1; }
};

// One simultaneous ascent update; touches exactly p_u, the path-and-sibling
// category nodes, and the HS nodes on the app's code path.
StepStats sgd_step(ModelParams& mp, UserIdx u, AppIdx i, double lr,
                   const ObjectiveOptions& opt = {});

std::pair<ModelParams, TrainReport> train(const AdoptionDataset& data,
                                          std::shared_ptr<const CategoryTree> tree,
                                          const TrainConfig& cfg);

}  // namespace sucm

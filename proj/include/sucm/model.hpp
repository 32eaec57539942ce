#pragma once

#include <Eigen/Core>
#include <memory>
#include <span>
#include <vector>

#include "sucm/common.hpp"
#include "sucm/dataset.hpp"
#include "sucm/flat_params.hpp"
#include "sucm/hsoftmax.hpp"
#include "sucm/taxonomy.hpp"

namespace sucm {

// All learnable state: user vectors, one vector+bias per taxonomy internal
// node (root included; it anchors the tree prior), and one vector+bias per HS
// internal node. Apps carry no parameters of their own.
struct ModelParams {
  int k = 0;
  double sigma = 1.0;       // std-dev of the Gaussian tree prior
  Eigen::MatrixXd P;        // k x num_users
  Eigen::MatrixXd Qz;       // k x num_internal (taxonomy load order)
  Eigen::VectorXd bz;       // num_internal
  Eigen::MatrixXd Qn;       // k x total HS internal nodes
  Eigen::VectorXd bn;
  std::shared_ptr<const CategoryTree> tree;
  std::shared_ptr<const HsForest> forest;

  int num_users() const { return static_cast<int>(P.cols()); }
  void check_user(UserIdx u) const {
    if (u < 0 || u >= num_users()) raise(Errc::UnknownUser, "user index " + std::to_string(u));
  }
};

// Knobs shared by the objective and the gradient formulas. prior_weight
// tempers the per-instance application of the tree prior; the L2 weights are
// the optional regularizers on user and HS vectors (off by default).
struct ObjectiveOptions {
  double l2_user = 0.0;
  double l2_hs = 0.0;
  double prior_weight = 1.0;
};

// y_uz = b_z + p_u . q_z for an internal taxonomy node
double affinity_node(const ModelParams& mp, UserIdx u, NodeId z);

// softmax over the competing set c(pi(z)), max-shifted
double step_prob_category(const ModelParams& mp, UserIdx u, NodeId z);
double log_step_prob_category(const ModelParams& mp, UserIdx u, NodeId z);

// sigmoid(+/- (b_n + p_u . q_n)); left and right sum to 1 exactly
double step_prob_hs(const ModelParams& mp, UserIdx u, std::int32_t hs_node, bool left);

double log_app_prob_hs(const ModelParams& mp, UserIdx u, AppIdx i);
double app_prob_hs(const ModelParams& mp, UserIdx u, AppIdx i);

// exact leaf-level softmax; the brute-force oracle for the HS approximation
// and the scoring core of the CCF baseline
std::vector<double> exact_softmax(std::span<const double> scores);
std::vector<double> app_prob_exact(const FlatParams& fp, UserIdx u, const CategoryTree& tree,
                                   NodeId z_m);

// log Pr(i|u): cascaded category softmax plus the HS leaf term
double path_prob(const ModelParams& mp, UserIdx u, AppIdx i);

// log Pr(i|u) for every app in one top-down pass, indexed by AppIdx
std::vector<double> all_path_log_probs(const ModelParams& mp, UserIdx u);

// data log-likelihood + tree prior (+ optional L2), additive constants dropped
double log_posterior(const ModelParams& mp, const AdoptionDataset& data,
                     const ObjectiveOptions& opt = {});

// every app scored by path_prob, descending, ties by ascending app id;
// exclude must be sorted (a user's training adoptions, typically)
std::vector<ScoredApp> score_all(const ModelParams& mp, UserIdx u,
                                 std::span<const AppIdx> exclude = {});

}  // namespace sucm

#pragma once

#include <Eigen/Core>

#include "sucm/common.hpp"

namespace sucm {

// Per-user and per-app latent blocks shared by the flat baselines and by the
// exact leaf-softmax oracle. Vectors are columns so each block is contiguous.
struct FlatParams {
  int k = 0;
  Eigen::MatrixXd P;   // k x num_users
  Eigen::MatrixXd Q;   // k x num_apps
  Eigen::VectorXd b;   // num_apps

  int num_users() const { return static_cast<int>(P.cols()); }
  int num_apps() const { return static_cast<int>(Q.cols()); }

  double score(UserIdx u, AppIdx i) const {
    return b(i) + P.col(u).dot(Q.col(i));
  }
};

}  // namespace sucm

#pragma once

#include <memory>
#include <vector>

#include "sucm/common.hpp"
#include "sucm/dataset.hpp"
#include "sucm/model.hpp"

namespace sucm {

// Desk-scale planted-model generator. fanouts gives the internal branching
// per level (root downwards); each bottom-level subcategory then holds
// apps_per_subcat leaf apps. Adoptions are drawn per user, without
// replacement, from the planted model's cascaded choice distribution.
struct SynthSpec {
  int num_users = 100;
  std::vector<int> fanouts = {5, 5};
  int apps_per_subcat = 10;
  int adoptions_per_user = 10;
  int k = 8;
  std::uint64_t seed = 1;
  double scale = 1.0;  // std-dev of the planted parameter draws
  double sigma = 1.0;  // recorded on the planted params

  void validate() const;
};

struct SynthResult {
  std::shared_ptr<const CategoryTree> tree;
  AdoptionDataset data;
  ModelParams planted;
};

SynthResult generate_synthetic(const SynthSpec& spec);

}  // namespace sucm

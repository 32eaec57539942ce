#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sucm/common.hpp"
#include "sucm/taxonomy.hpp"

namespace sucm {

struct Instance {
  UserIdx user = -1;
  AppIdx app = -1;
};

// Deduplicated positive (user, app) adoptions over a fixed app universe, with
// per-user adopted sets kept sorted for membership tests.
class AdoptionDataset {
 public:
  AdoptionDataset() = default;

  // Dedupes; instance order and the dense user numbering are preserved as given.
  static AdoptionDataset from_instances(int num_users, int num_apps,
                                        std::vector<Instance> instances,
                                        std::vector<std::int64_t> user_ext_ids);

  int num_users() const { return num_users_; }
  int num_apps() const { return num_apps_; }
  bool empty() const { return instances_.empty(); }
  const std::vector<Instance>& instances() const { return instances_; }
  std::span<const AppIdx> adopted(UserIdx u) const;  // sorted
  bool is_adopted(UserIdx u, AppIdx a) const;
  std::int64_t user_ext_id(UserIdx u) const;
  std::optional<UserIdx> user_index(std::int64_t ext_id) const;
  const std::vector<std::int64_t>& user_ext_ids() const { return user_ext_ids_; }
  std::vector<std::int64_t> adoption_counts() const;  // per AppIdx

 private:
  int num_users_ = 0;
  int num_apps_ = 0;
  std::vector<Instance> instances_;
  std::vector<std::vector<AppIdx>> per_user_;
  std::vector<std::int64_t> user_ext_ids_;
  std::unordered_map<std::int64_t, UserIdx> user_by_ext_;
};

struct DatasetStats {
  std::int64_t n_users = 0;
  std::int64_t n_apps = 0;
  std::int64_t n_obs = 0;
  double sparsity = 0.0;         // 1 - n_obs / (n_users * n_apps)
  double mean_adoptions = 0.0;   // n_obs / n_users
};

// Adoption file: UTF-8 TSV `user_id<TAB>app_id[<TAB>rating]`; a missing rating
// means adopted. Records below rating_threshold are dropped, then duplicates,
// then every user with fewer than min_adoptions remaining adoptions.
AdoptionDataset load_adoptions(const std::string& path, const CategoryTree& tree,
                               double rating_threshold = 3.0, int min_adoptions = 40);

void save_adoptions_tsv(const AdoptionDataset& data, const CategoryTree& tree,
                        const std::string& path);

DatasetStats stats(const AdoptionDataset& data);
DatasetStats stats_from_counts(std::int64_t n_users, std::int64_t n_apps, std::int64_t n_obs);

}  // namespace sucm

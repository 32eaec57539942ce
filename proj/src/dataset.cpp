#include "sucm/dataset.hpp"

#include <algorithm>
#include <fstream>

namespace sucm {

AdoptionDataset AdoptionDataset::from_instances(int num_users, int num_apps,
                                                std::vector<Instance> instances,
                                                std::vector<std::int64_t> user_ext_ids) {
  if (static_cast<int>(user_ext_ids.size()) != num_users)
    raise(Errc::InvalidArgument, "user id table size does not match num_users");
  AdoptionDataset d;
  d.num_users_ = num_users;
  d.num_apps_ = num_apps;
  d.user_ext_ids_ = std::move(user_ext_ids);
  d.per_user_.resize(static_cast<std::size_t>(num_users));
  d.instances_.reserve(instances.size());
  for (const Instance& in : instances) {
    if (in.user < 0 || in.user >= num_users) raise(Errc::UnknownUser, "user index " + std::to_string(in.user));
    if (in.app < 0 || in.app >= num_apps) raise(Errc::UnknownApp, "app index " + std::to_string(in.app));
    auto& set = d.per_user_[static_cast<std::size_t>(in.user)];
    auto it = std::lower_bound(set.begin(), set.end(), in.app);
    if (it != set.end() && *it == in.app) continue;  // duplicate (u, i)
    set.insert(it, in.app);
    d.instances_.push_back(in);
  }
  for (std::size_t u = 0; u < d.user_ext_ids_.size(); ++u) {
    if (!d.user_by_ext_.emplace(d.user_ext_ids_[u], static_cast<UserIdx>(u)).second)
      raise(Errc::InvalidArgument, "duplicate user id " + std::to_string(d.user_ext_ids_[u]));
  }
  return d;
}

std::span<const AppIdx> AdoptionDataset::adopted(UserIdx u) const {
  if (u < 0 || u >= num_users_) raise(Errc::UnknownUser, "user index " + std::to_string(u));
  return per_user_[static_cast<std::size_t>(u)];
}

bool AdoptionDataset::is_adopted(UserIdx u, AppIdx a) const {
  const auto set = adopted(u);
  return std::binary_search(set.begin(), set.end(), a);
}

std::int64_t AdoptionDataset::user_ext_id(UserIdx u) const {
  if (u < 0 || u >= num_users_) raise(Errc::UnknownUser, "user index " + std::to_string(u));
  return user_ext_ids_[static_cast<std::size_t>(u)];
}

std::optional<UserIdx> AdoptionDataset::user_index(std::int64_t ext_id) const {
  auto it = user_by_ext_.find(ext_id);
  if (it == user_by_ext_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::int64_t> AdoptionDataset::adoption_counts() const {
  std::vector<std::int64_t> counts(static_cast<std::size_t>(num_apps_), 0);
  for (const Instance& in : instances_) ++counts[static_cast<std::size_t>(in.app)];
  return counts;
}

AdoptionDataset load_adoptions(const std::string& path, const CategoryTree& tree,
                               double rating_threshold, int min_adoptions) {
  std::ifstream in(path);
  if (!in) raise(Errc::ParseError, "cannot open adoption file " + path);

  struct Raw {
    std::int64_t user;
    AppIdx app;
  };
  std::vector<Raw> raw;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::size_t t1 = line.find('\t');
    if (t1 == std::string::npos)
      raise(Errc::ParseError, path + ":" + std::to_string(lineno) + ": expected user<TAB>app[<TAB>rating]");
    std::size_t t2 = line.find('\t', t1 + 1);
    std::int64_t user_ext = 0, app_ext = 0;
    double rating = 0.0;
    bool has_rating = (t2 != std::string::npos);
    try {
      user_ext = std::stoll(line.substr(0, t1));
      app_ext = std::stoll(line.substr(t1 + 1, (has_rating ? t2 - t1 - 1 : std::string::npos)));
      if (has_rating) rating = std::stod(line.substr(t2 + 1));
    } catch (const std::exception&) {
      raise(Errc::ParseError, path + ":" + std::to_string(lineno) + ": bad numeric field");
    }
    if (has_rating && rating < rating_threshold) continue;  // not an adoption
    AppIdx a;
    try {
      a = tree.app_index(app_ext);
    } catch (const Error&) {
      raise(Errc::UnknownAppInRecord,
            path + ":" + std::to_string(lineno) + ": app " + std::to_string(app_ext) + " not in taxonomy");
    }
    raw.push_back({user_ext, a});
  }

  // dedupe per user, count, then drop users under the adoption floor
  std::unordered_map<std::int64_t, std::vector<AppIdx>> sets;
  std::vector<std::int64_t> user_order;
  for (const Raw& r : raw) {
    auto [it, inserted] = sets.try_emplace(r.user);
    if (inserted) user_order.push_back(r.user);
    auto& set = it->second;
    auto pos = std::lower_bound(set.begin(), set.end(), r.app);
    if (pos == set.end() || *pos != r.app) set.insert(pos, r.app);
  }
  std::unordered_map<std::int64_t, UserIdx> dense;
  std::vector<std::int64_t> kept_users;
  for (std::int64_t u : user_order) {
    if (static_cast<int>(sets[u].size()) < min_adoptions) continue;
    dense.emplace(u, static_cast<UserIdx>(kept_users.size()));
    kept_users.push_back(u);
  }
  if (kept_users.empty())
    raise(Errc::EmptyAfterFiltering, "no users with >= " + std::to_string(min_adoptions) + " adoptions");

  std::vector<Instance> instances;
  instances.reserve(raw.size());
  for (const Raw& r : raw) {
    auto it = dense.find(r.user);
    if (it == dense.end()) continue;
    instances.push_back({it->second, r.app});  // from_instances drops the duplicates
  }
  const int n_kept = static_cast<int>(kept_users.size());
  return AdoptionDataset::from_instances(n_kept, tree.num_apps(), std::move(instances),
                                         std::move(kept_users));
}

void save_adoptions_tsv(const AdoptionDataset& data, const CategoryTree& tree,
                        const std::string& path) {
  std::ofstream out(path);
  if (!out) raise(Errc::ParseError, "cannot write adoption file " + path);
  for (const Instance& in : data.instances())
    out << data.user_ext_id(in.user) << '\t' << tree.app_id_at(in.app) << '\n';
}

DatasetStats stats(const AdoptionDataset& data) {
  return stats_from_counts(data.num_users(), data.num_apps(),
                           static_cast<std::int64_t>(data.instances().size()));
}

DatasetStats stats_from_counts(std::int64_t n_users, std::int64_t n_apps, std::int64_t n_obs) {
  DatasetStats s;
  s.n_users = n_users;
  s.n_apps = n_apps;
  s.n_obs = n_obs;
  const double cells = static_cast<double>(n_users) * static_cast<double>(n_apps);
  s.sparsity = cells > 0 ? 1.0 - static_cast<double>(n_obs) / cells : 0.0;
  s.mean_adoptions = n_users > 0 ? static_cast<double>(n_obs) / static_cast<double>(n_users) : 0.0;
  return s;
}

}  // namespace sucm

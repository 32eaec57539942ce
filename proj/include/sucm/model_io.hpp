#pragma once

#include <memory>
#include <string>
#include <vector>

#include "sucm/common.hpp"
#include "sucm/flat_params.hpp"
#include "sucm/model.hpp"

namespace sucm {

enum class ModelKind : std::uint8_t { sucm = 0, flat = 1 };

// Self-describing versioned container: magic + version, the taxonomy, the HS
// forest (structural model only), the user id table, the parameter blocks as
// little-endian 64-bit floats in load order, the per-user training adoptions
// (so `recommend --exclude-train` works from the file alone), and a config
// echo. See README for the exact layout.
struct SavedModel {
  ModelKind kind = ModelKind::sucm;
  ModelParams sucm;  // kind == sucm
  FlatParams flat;   // kind == flat
  std::shared_ptr<const CategoryTree> tree;
  std::vector<std::int64_t> user_ext_ids;
  std::vector<std::vector<AppIdx>> train_sets;  // per dense user, sorted
  std::string config_json;
};

inline constexpr std::uint32_t kModelFormatVersion = 1;

void save_model(const std::string& path, const SavedModel& model);
SavedModel load_model(const std::string& path);

}  // namespace sucm

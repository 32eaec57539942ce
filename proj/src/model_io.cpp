#include "sucm/model_io.hpp"

#include <cstring>
#include <fstream>

namespace sucm {

namespace {

constexpr char kMagic[4] = {'S', 'U', 'C', 'M'};

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) raise(Errc::CorruptFile, "cannot write model file " + path);
  }
  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void i32(std::int32_t v) { bytes(&v, 4); }
  void i64(std::int64_t v) { bytes(&v, 8); }
  void f64(double v) { bytes(&v, 8); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void vec(const Eigen::VectorXd& v) {
    i64(v.size());
    bytes(v.data(), static_cast<std::size_t>(v.size()) * sizeof(double));
  }
  void mat(const Eigen::MatrixXd& m) {
    i64(m.rows());
    i64(m.cols());
    bytes(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
  }
  bool good() const { return out_.good(); }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : in_(path, std::ios::binary) {
    if (!in_) raise(Errc::CorruptFile, "cannot open model file " + path);
  }
  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n)
      raise(Errc::CorruptFile, "model file truncated");
  }
  std::uint8_t u8() { std::uint8_t v; bytes(&v, 1); return v; }
  std::uint32_t u32() { std::uint32_t v; bytes(&v, 4); return v; }
  std::int32_t i32() { std::int32_t v; bytes(&v, 4); return v; }
  std::int64_t i64() { std::int64_t v; bytes(&v, 8); return v; }
  double f64() { double v; bytes(&v, 8); return v; }
  std::string str() {
    const std::uint32_t n = u32();
    if (n > (1u << 30)) raise(Errc::CorruptFile, "unreasonable string length");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  Eigen::VectorXd vec() {
    const std::int64_t n = i64();
    if (n < 0 || n > (1ll << 32)) raise(Errc::CorruptFile, "unreasonable vector length");
    Eigen::VectorXd v(n);
    bytes(v.data(), static_cast<std::size_t>(n) * sizeof(double));
    return v;
  }
  Eigen::MatrixXd mat() {
    const std::int64_t r = i64();
    const std::int64_t c = i64();
    if (r < 0 || c < 0 || r * c > (1ll << 34)) raise(Errc::CorruptFile, "unreasonable matrix shape");
    Eigen::MatrixXd m(r, c);
    bytes(m.data(), static_cast<std::size_t>(r * c) * sizeof(double));
    return m;
  }

 private:
  std::ifstream in_;
};

void write_tree(Writer& w, const CategoryTree& tree) {
  w.u32(static_cast<std::uint32_t>(tree.num_nodes()));
  for (NodeId n = 0; n < tree.num_nodes(); ++n) {
    w.i64(tree.ext_id(n));
    const auto p = tree.parent(n);
    w.i32(p.has_value() ? *p : kNoNode);
    w.u8(static_cast<std::uint8_t>(tree.kind(n)));
    w.str(tree.name(n));
  }
}

std::shared_ptr<const CategoryTree> read_tree(Reader& r) {
  const std::uint32_t n_nodes = r.u32();
  std::vector<TaxonomyEdge> edges(n_nodes);
  std::vector<std::int64_t> ext(n_nodes);
  std::vector<std::int32_t> parent_idx(n_nodes);
  for (std::uint32_t i = 0; i < n_nodes; ++i) {
    ext[i] = r.i64();
    edges[i].id = ext[i];
    parent_idx[i] = r.i32();
    edges[i].kind = static_cast<NodeKind>(r.u8());
    edges[i].name = r.str();
  }
  // parents are stored as dense ids; resolve them to external ids
  for (std::uint32_t i = 0; i < n_nodes; ++i) {
    if (parent_idx[i] == kNoNode) continue;
    if (parent_idx[i] < 0 || static_cast<std::uint32_t>(parent_idx[i]) >= n_nodes)
      raise(Errc::CorruptFile, "bad parent index in stored taxonomy");
    edges[i].parent = ext[static_cast<std::uint32_t>(parent_idx[i])];
  }
  return std::make_shared<const CategoryTree>(CategoryTree::build(edges));
}

void write_forest(Writer& w, const HsForest& forest) {
  w.u8(static_cast<std::uint8_t>(forest.strategy()));
  w.u32(static_cast<std::uint32_t>(forest.num_trees()));
  for (std::size_t t = 0; t < forest.num_trees(); ++t) {
    const HsTree& ht = forest.tree_at(t);
    w.i32(forest.owner_at(t));
    w.u32(static_cast<std::uint32_t>(ht.num_leaves()));
    w.i32(ht.root());
    w.u32(static_cast<std::uint32_t>(ht.num_internal()));
    for (std::int32_t n = 0; n < ht.num_internal(); ++n) {
      const HsTree::Node& node = ht.node(n);
      w.i32(node.left);
      w.i32(node.right);
      w.u8(node.left_is_leaf ? 1 : 0);
      w.u8(node.right_is_leaf ? 1 : 0);
    }
  }
}

std::shared_ptr<const HsForest> read_forest(Reader& r, const CategoryTree& tree) {
  const auto strategy = static_cast<HsStrategy>(r.u8());
  const std::uint32_t n_trees = r.u32();
  std::vector<HsTree> trees;
  std::vector<NodeId> owners;
  trees.reserve(n_trees);
  for (std::uint32_t t = 0; t < n_trees; ++t) {
    owners.push_back(r.i32());
    const std::uint32_t n_leaves = r.u32();
    const std::int32_t root = r.i32();
    const std::uint32_t n_internal = r.u32();
    std::vector<HsTree::Node> nodes(n_internal);
    for (std::uint32_t n = 0; n < n_internal; ++n) {
      nodes[n].left = r.i32();
      nodes[n].right = r.i32();
      nodes[n].left_is_leaf = r.u8() != 0;
      nodes[n].right_is_leaf = r.u8() != 0;
    }
    trees.push_back(HsTree::from_parts(static_cast<int>(n_leaves), root, std::move(nodes)));
  }
  return std::make_shared<const HsForest>(
      HsForest::from_parts(strategy, std::move(trees), std::move(owners), tree));
}

}  // namespace

void save_model(const std::string& path, const SavedModel& model) {
  if (!model.tree) raise(Errc::InvalidArgument, "model has no taxonomy attached");
  Writer w(path);
  w.bytes(kMagic, 4);
  w.u32(kModelFormatVersion);
  w.u8(static_cast<std::uint8_t>(model.kind));
  write_tree(w, *model.tree);
  if (model.kind == ModelKind::sucm) {
    if (!model.sucm.forest) raise(Errc::InvalidArgument, "structural model has no hs forest");
    w.u32(static_cast<std::uint32_t>(model.sucm.k));
    w.f64(model.sucm.sigma);
    write_forest(w, *model.sucm.forest);
    w.mat(model.sucm.P);
    w.mat(model.sucm.Qz);
    w.vec(model.sucm.bz);
    w.mat(model.sucm.Qn);
    w.vec(model.sucm.bn);
  } else {
    w.u32(static_cast<std::uint32_t>(model.flat.k));
    w.mat(model.flat.P);
    w.mat(model.flat.Q);
    w.vec(model.flat.b);
  }
  w.u32(static_cast<std::uint32_t>(model.user_ext_ids.size()));
  for (std::int64_t id : model.user_ext_ids) w.i64(id);
  w.u32(static_cast<std::uint32_t>(model.train_sets.size()));
  for (const auto& set : model.train_sets) {
    w.u32(static_cast<std::uint32_t>(set.size()));
    for (AppIdx a : set) w.i32(a);
  }
  w.str(model.config_json);
  if (!w.good()) raise(Errc::CorruptFile, "short write to " + path);
}

SavedModel load_model(const std::string& path) {
  Reader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) raise(Errc::CorruptFile, path + " is not a model file");
  const std::uint32_t version = r.u32();
  if (version != kModelFormatVersion)
    raise(Errc::VersionMismatch, "model format v" + std::to_string(version) + ", expected v" +
                                     std::to_string(kModelFormatVersion));
  SavedModel m;
  m.kind = static_cast<ModelKind>(r.u8());
  if (m.kind != ModelKind::sucm && m.kind != ModelKind::flat)
    raise(Errc::CorruptFile, "unknown model kind");
  m.tree = read_tree(r);
  if (m.kind == ModelKind::sucm) {
    m.sucm.k = static_cast<int>(r.u32());
    m.sucm.sigma = r.f64();
    m.sucm.tree = m.tree;
    m.sucm.forest = read_forest(r, *m.tree);
    m.sucm.P = r.mat();
    m.sucm.Qz = r.mat();
    m.sucm.bz = r.vec();
    m.sucm.Qn = r.mat();
    m.sucm.bn = r.vec();
    if (m.sucm.P.rows() != m.sucm.k || m.sucm.Qz.cols() != m.tree->num_internal() ||
        m.sucm.Qn.cols() != m.sucm.forest->total_internal() ||
        m.sucm.bz.size() != m.tree->num_internal() ||
        m.sucm.bn.size() != m.sucm.forest->total_internal())
      raise(Errc::CorruptFile, "parameter blocks do not match the stored structures");
  } else {
    m.flat.k = static_cast<int>(r.u32());
    m.flat.P = r.mat();
    m.flat.Q = r.mat();
    m.flat.b = r.vec();
    if (m.flat.P.rows() != m.flat.k || m.flat.Q.cols() != m.tree->num_apps() ||
        m.flat.b.size() != m.tree->num_apps())
      raise(Errc::CorruptFile, "parameter blocks do not match the stored taxonomy");
  }
  const std::uint32_t n_users = r.u32();
  m.user_ext_ids.resize(n_users);
  for (std::uint32_t u = 0; u < n_users; ++u) m.user_ext_ids[u] = r.i64();
  const std::uint32_t n_sets = r.u32();
  if (n_sets != n_users) raise(Errc::CorruptFile, "train-set table does not match the user table");
  m.train_sets.resize(n_sets);
  for (std::uint32_t u = 0; u < n_sets; ++u) {
    const std::uint32_t cnt = r.u32();
    if (cnt > static_cast<std::uint32_t>(m.tree->num_apps()))
      raise(Errc::CorruptFile, "train set larger than the app universe");
    m.train_sets[u].resize(cnt);
    for (std::uint32_t j = 0; j < cnt; ++j) m.train_sets[u][j] = r.i32();
  }
  m.config_json = r.str();
  return m;
}

}  // namespace sucm

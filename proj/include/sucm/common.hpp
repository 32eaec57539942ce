#pragma once

#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace sucm {

using NodeId = std::int32_t;   // dense taxonomy node index
using UserIdx = std::int32_t;  // dense user index
using AppIdx = std::int32_t;   // dense app index (taxonomy leaf order)

inline constexpr NodeId kNoNode = -1;

enum class Errc {
  CycleDetected,
  MultipleRoots,
  MixedChildKinds,
  OrphanNode,
  DuplicateApp,
  UnknownApp,
  UnknownNode,
  UnknownUser,
  RootHasNoChoice,
  EmptyAppList,
  EmptySubcategory,
  EmptyDataset,
  EmptyTrainingSet,
  NodeNotInCompetingSet,
  IndexOutOfPath,
  UserHasAdoptedEverything,
  EmptyTestSet,
  NoEvaluableUsers,
  ParseError,
  UnknownAppInRecord,
  EmptyAfterFiltering,
  SpecInfeasible,
  VersionMismatch,
  CorruptFile,
  InvalidArgument,
};

const char* errc_name(Errc c);

// Domain error carrying a machine-readable code; the CLI prints one
// "error: <Code>: <message>" line and exits nonzero.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& msg)
      : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& msg) { throw Error(code, msg); }

struct ScoredApp {
  AppIdx app = -1;
  double score = 0.0;  // log-probability (structural model) or affinity (flat models)
};

// splitmix64; derives independent per-entity RNG streams from one seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Fixed-precision formatting so reports are byte-stable across runs.
inline std::string fmt_fixed(double v, int prec) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
  return buf;
}

}  // namespace sucm

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sucm {

struct GradCheckEntry {
  std::string op;
  double max_rel_err = 0.0;
  int probes = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double worst() const;
  bool passed(double tol = 1e-4) const { return worst() < tol; }
};

// Central finite differences (h = 1e-5) against every analytic gradient:
// the structural model's user / category-node / hs-node formulas and the four
// flat baseline objectives, probed on random small instances (K <= 8,
// <= 30 apps). Relative error uses max(1, |analytic|, |numeric|).
GradCheckReport run_gradient_checks(std::uint64_t seed, int probes_per_op);

}  // namespace sucm

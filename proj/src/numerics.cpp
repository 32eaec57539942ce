#include "sucm/numerics.hpp"

#include <algorithm>
#include <cassert>

namespace sucm {

double log_sum_exp(std::span<const double> xs) {
  assert(!xs.empty());
  const double m = *std::max_element(xs.begin(), xs.end());
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

void softmax_inplace(std::span<double> xs) {
  assert(!xs.empty());
  const double m = *std::max_element(xs.begin(), xs.end());
  double s = 0.0;
  for (double& x : xs) {
    x = std::exp(x - m);
    s += x;
  }
  for (double& x : xs) x /= s;
}

}  // namespace sucm

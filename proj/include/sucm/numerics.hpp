#pragma once

#include <cmath>
#include <span>

namespace sucm {

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(sigmoid(x)), stable for large |x|
inline double log_sigmoid(double x) {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

double log_sum_exp(std::span<const double> xs);

// Softmax with max-subtraction; xs is overwritten with the probabilities.
void softmax_inplace(std::span<double> xs);

}  // namespace sucm

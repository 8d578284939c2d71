#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "snn/tensor.hpp"

namespace snntest {

inline bool close(snn::real a, snn::real b, snn::real rel, snn::real abs_tol) {
  const snn::real diff = std::abs(a - b);
  if (diff <= abs_tol) return true;
  return diff <= rel * std::max(std::abs(a), std::abs(b));
}

inline snn::real max_abs_diff(const snn::Tensor& a, const snn::Tensor& b) {
  snn::real worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

inline snn::real max_rel_diff(const snn::Tensor& a, const snn::Tensor& b) {
  snn::real worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const snn::real scale = std::max(std::abs(a[i]), std::abs(b[i]));
    if (scale > 0) worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

}  // namespace snntest

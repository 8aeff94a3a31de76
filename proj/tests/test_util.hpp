#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "vimonet/tensor.hpp"

namespace vimonet::testing {

// |a - n| / max(|a| + |n|, floor). The floor keeps coordinates whose true
// gradient is ~0 from dividing roundoff by roundoff.
inline double rel_err(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), floor);
}

// Central difference of f with respect to *x.
inline double central_difference(double* x, const std::function<double()>& f, double h = 1e-5) {
  const double saved = *x;
  *x = saved + h;
  const double up = f();
  *x = saved - h;
  const double down = f();
  *x = saved;
  return (up - down) / (2.0 * h);
}

// Picks up to `n` distinct flat indices in [0, size).
inline std::vector<Eigen::Index> sample_indices(Eigen::Index size, std::size_t n, Rng& rng) {
  std::vector<Eigen::Index> all(static_cast<std::size_t>(size));
  for (Eigen::Index i = 0; i < size; ++i) all[static_cast<std::size_t>(i)] = i;
  std::shuffle(all.begin(), all.end(), rng);
  if (all.size() > n) all.resize(n);
  return all;
}

inline Mat random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  return normal_matrix(r, c, rng, scale);
}

}  // namespace vimonet::testing

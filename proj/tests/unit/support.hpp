#pragma once

// Small helpers shared by the unit tests.

#include "crom/spectral.hpp"
#include "crom/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace crom::test {

inline double rel_diff(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / scale;
}

template <typename A, typename B>
double max_abs_diff(const A& a, const B& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

/// Two-phase grid: phase 1 on voxels where pred(i, j) holds.
template <typename Pred>
VoxelGrid two_phase_grid(int n1, int n2, Pred pred) {
  std::vector<int> labels(static_cast<std::size_t>(n1 * n2));
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j) labels[static_cast<std::size_t>(i * n2 + j)] = pred(i, j) ? 1 : 0;
  return VoxelGrid({n1, n2}, {1.0, 1.0}, std::move(labels));
}

inline std::vector<int> iota_vector(int n, int start = 0) {
  std::vector<int> v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), start);
  return v;
}

}  // namespace crom::test

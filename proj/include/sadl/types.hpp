#pragma once

#include <Eigen/Dense>

namespace sadl {

//! Largest state dimension supported by the simulators. Fixed-max storage keeps
//! the per-step vectors off the heap.
inline constexpr int kMaxDim = 8;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

inline Vec vec1(double x) {
  Vec v(1);
  v(0) = x;
  return v;
}

inline Mat mat1(double x) {
  Mat m(1, 1);
  m(0, 0) = x;
  return m;
}

}  // namespace sadl

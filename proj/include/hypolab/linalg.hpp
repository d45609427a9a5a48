#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <initializer_list>
#include <limits>
#include <vector>

namespace hypolab {

// Chart dimension is small; bounded-size storage keeps every point and frame
// on the stack.
inline constexpr int kMaxDim = 8;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline Vec make_vec(std::initializer_list<double> values) {
  Vec v(static_cast<int>(values.size()));
  int i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

inline Vec make_vec(const std::vector<double>& values) {
  Vec v(static_cast<int>(values.size()));
  for (int i = 0; i < v.size(); ++i) v(i) = values[static_cast<size_t>(i)];
  return v;
}

inline std::vector<double> to_std(const Vec& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline Vec unit_vec(int dim, int axis) {
  Vec v = Vec::Zero(dim);
  v(axis) = 1.0;
  return v;
}

// Least-squares slope of ys against xs.
inline double ls_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace hypolab

#pragma once

#include <random>

#include "dpos/dpos.hpp"

namespace testing_util {

using dpos::Mat;
using dpos::Vec;

inline dpos::SystemModel linear(const Mat& A) {
  return dpos::SystemModel(
      static_cast<int>(A.rows()), [A](const Vec& x) { return Vec(A * x); }, [A](const Vec&) { return A; });
}

inline Mat mat2(double a, double b, double c, double d) {
  Mat m(2, 2);
  m << a, b, c, d;
  return m;
}

inline Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

inline dpos::CompactRegion box(int n, double lo, double hi, int density = 5) {
  return dpos::CompactRegion(Vec::Constant(n, lo), Vec::Constant(n, hi), {}, density);
}

}  // namespace testing_util

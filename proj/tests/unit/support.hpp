#pragma once

#include "specflow/operator.hpp"
#include "specflow/paths.hpp"

#include <doctest.h>

#include <cmath>

namespace testing {

using specflow::Matrix;

inline specflow::random::Engine rng(std::uint64_t seed) { return specflow::random::Engine(seed); }

inline double max_abs(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

inline Matrix diag(std::initializer_list<double> entries) {
  Eigen::VectorXd d(static_cast<Eigen::Index>(entries.size()));
  Eigen::Index i = 0;
  for (double e : entries) d[i++] = e;
  return d.cast<specflow::Complex>().asDiagonal();
}

}  // namespace testing

#pragma once

#include "specflow/errors.hpp"

#include <functional>
#include <string>

namespace specflow {

struct QuadResult {
  double value = 0.0;
  double error_estimate = 0.0;
  long evaluations = 0;
};

struct QuadOptions {
  /// Maximum bisection depth of any panel.
  int max_depth = 40;
  /// Every panel is split at least this many times before acceptance is tried.
  int min_depth = 2;
  long max_evaluations = 4'000'000;
};

/// Thrown when some panel exhausts the depth (or evaluation) budget. Carries
/// the best estimate assembled so far.
class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, QuadResult best) : Error(what), best_(best) {}
  const QuadResult& best() const noexcept { return best_; }

 private:
  QuadResult best_;
};

using Integrand = std::function<double(double)>;

/// Adaptive Simpson with the Richardson acceptance test |S2 - S1| <= 15 tol
/// (tolerance halved on each split). Panels are processed depth-first, left to
/// right, and accepted values are combined by compensated summation in that
/// order, so the result is deterministic.
QuadResult integrate_adaptive(const Integrand& f, double a, double b, double tol,
                              const QuadOptions& options = {});

/// Integral over the whole real line via x = tan(u) on (-pi/2, pi/2), with the
/// open endpoints shrunk by 1e-12.
QuadResult integrate_line(const Integrand& g, double tol, const QuadOptions& options = {});

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) noexcept;
  double value() const noexcept { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

}  // namespace specflow

#include "specflow/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

namespace specflow {

void CompensatedSum::add(double x) noexcept {
  const double t = sum_ + x;
  if (std::abs(sum_) >= std::abs(x)) {
    compensation_ += (sum_ - t) + x;
  } else {
    compensation_ += (x - t) + sum_;
  }
  sum_ = t;
}

namespace {

struct Panel {
  double a, b;
  double fa, fm, fb;
  double whole;  // Simpson estimate over [a, b]
  double tol;
  int depth;
};

double simpson(double a, double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double checked(const Integrand& f, double x) {
  const double v = f(x);
  if (!std::isfinite(v)) {
    std::ostringstream msg;
    msg << "integrand is not finite at x = " << x;
    throw DomainError(msg.str());
  }
  return v;
}

}  // namespace

QuadResult integrate_adaptive(const Integrand& f, double a, double b, double tol,
                              const QuadOptions& options) {
  if (!(a < b) || !std::isfinite(a) || !std::isfinite(b)) {
    throw InvalidInput("integrate_adaptive: need finite a < b");
  }
  if (!(tol > 0.0)) throw InvalidInput("integrate_adaptive: tol must be positive");

  QuadResult result;
  const double fa = checked(f, a);
  const double fm = checked(f, 0.5 * (a + b));
  const double fb = checked(f, b);
  result.evaluations = 3;

  CompensatedSum value;
  CompensatedSum error;
  bool exhausted = false;

  std::vector<Panel> stack;
  stack.push_back({a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), tol, 0});
  while (!stack.empty()) {
    const Panel p = stack.back();
    stack.pop_back();

    const double m = 0.5 * (p.a + p.b);
    const double lm = 0.5 * (p.a + m);
    const double rm = 0.5 * (m + p.b);
    const double flm = checked(f, lm);
    const double frm = checked(f, rm);
    result.evaluations += 2;
    const double left = simpson(p.a, m, p.fa, flm, p.fm);
    const double right = simpson(m, p.b, p.fm, frm, p.fb);
    const double refined = left + right;
    const double delta = refined - p.whole;

    const bool budget_gone = result.evaluations >= options.max_evaluations;
    const bool at_depth = p.depth + 1 >= options.max_depth || m <= p.a || m >= p.b;
    const bool accurate = p.depth + 1 >= options.min_depth && std::abs(delta) <= 15.0 * p.tol;
    if (accurate || at_depth || budget_gone) {
      if (!accurate) exhausted = true;
      value.add(refined + delta / 15.0);
      error.add(std::abs(delta) / 15.0);
      continue;
    }
    // Right half pushed first so the left half is processed first.
    stack.push_back({m, p.b, p.fm, frm, p.fb, right, 0.5 * p.tol, p.depth + 1});
    stack.push_back({p.a, m, p.fa, flm, p.fm, left, 0.5 * p.tol, p.depth + 1});
  }

  result.value = value.value();
  result.error_estimate = error.value();
  if (exhausted) {
    std::ostringstream msg;
    msg << "integrate_adaptive: no convergence on [" << a << ", " << b << "] to tol " << tol
        << " (estimate " << result.value << " +- " << result.error_estimate << ")";
    throw NonConvergence(msg.str(), result);
  }
  return result;
}

QuadResult integrate_line(const Integrand& g, double tol, const QuadOptions& options) {
  constexpr double shrink = 1e-12;
  const double half_pi = 0.5 * std::numbers::pi;
  const auto transformed = [&](double u) {
    const double c = std::cos(u);
    return g(std::tan(u)) / (c * c);
  };
  return integrate_adaptive(transformed, -half_pi + shrink, half_pi - shrink, tol, options);
}

}  // namespace specflow

#pragma once

#include "specflow/operator.hpp"

#include <string>
#include <variant>

namespace specflow {

/// c (delta^2 - x^2)^m on [-delta, delta]; C^{m-1}, polynomial antiderivative.
struct BumpSpec {
  double delta = 0.5;
  int m = 2;
};

/// sqrt(eps/pi) exp(-eps x^2).
struct GaussianSpec {
  double epsilon = 1.0;
};

enum class ResolventVariant { half_shift, classic };

/// (1 + x^2)^(-p/2 - 1/2) / c_p (half_shift) or (1 + x^2)^(-p/2) / c_p (classic).
/// The classic profile is not integrable at p = 1; there the p = 2 profile
/// (1 + x^2)^-1 is used, which every 1-summable operator also satisfies.
struct ResolventSpec {
  double p = 1.0;
  ResolventVariant variant = ResolventVariant::half_shift;
};

/// User-supplied nonnegative profile on [lo, hi] (either end may be infinite).
/// Normalization and antiderivative are computed by quadrature, which is slow.
struct CustomSpec {
  std::string name = "custom";
  ScalarMap profile;
  double lo = -1.0;
  double hi = 1.0;
};

using WeightSpec = std::variant<BumpSpec, GaussianSpec, ResolventSpec, CustomSpec>;

enum class WeightKind { bump, gaussian, resolvent, custom };

struct WeightValue {
  double h = 0.0;
  double H = 0.0;
};

class SpectralWeight {
 public:
  WeightKind kind() const noexcept { return kind_; }
  const WeightSpec& spec() const noexcept { return spec_; }
  std::string describe() const;

  /// Integral of the unnormalized profile (c_p for the resolvent family).
  double mass() const noexcept { return mass_; }
  /// Factor multiplying the profile, 1 / mass().
  double coefficient() const noexcept { return 1.0 / mass_; }
  /// Value of the normalization integral measured by quadrature at construction.
  double measured_integral() const noexcept { return measured_integral_; }

  double support_lo() const noexcept { return lo_; }
  double support_hi() const noexcept { return hi_; }
  bool compact() const noexcept;
  /// True when h(-x) = h(x) for all x (every built-in family).
  bool symmetric() const noexcept { return kind_ != WeightKind::custom; }

  double density(double x) const;
  double density_derivative(double x) const;
  /// Antiderivative normalized to -1/2 at -inf and +1/2 at +inf.
  double antiderivative(double x) const;
  WeightValue eval(double x) const { return {density(x), antiderivative(x)}; }

  /// H(x) - chi_[0,inf)(x) + 1/2, evaluated without cancellation in the tails.
  double boundary_f(double x) const;

 private:
  friend SpectralWeight make_weight(const WeightSpec& spec);
  SpectralWeight() = default;

  double profile(double x) const;
  /// Integral of the unnormalized profile from 0 to |x| (finite families).
  double half_integral(double ax) const;

  WeightKind kind_ = WeightKind::bump;
  WeightSpec spec_;
  double mass_ = 1.0;
  double measured_integral_ = 0.0;
  double lo_ = 0.0;
  double hi_ = 0.0;
  double exponent_ = 0.0;  // resolvent: profile (1 + x^2)^-exponent_
};

/// Validates parameters (InvalidSpec), computes the normalization and checks
/// it by quadrature to 1e-10.
SpectralWeight make_weight(const WeightSpec& spec);

/// tau(f(F0)) - tau(f(F1)) with f = boundary_f, i.e.
///   tau(H(F0) - H(F1) + B1/2 - B0/2),
/// the correction that turns the path integral into the spectral flow.
/// Throws InvalidPair if the essential points differ and NotTraceClass if f
/// does not vanish on them.
double boundary_term(const SpectralWeight& w, const FramedOperator& f0, const FramedOperator& f1);
double boundary_term(const SpectralWeight& w, const FramedOperator& f0, const EigenSystem& sys0,
                     const FramedOperator& f1, const EigenSystem& sys1);

namespace fault {
/// Mutation hook for the self-test: flips the sign of boundary_term.
void set_boundary_sign_flip(bool on) noexcept;
bool boundary_sign_flipped() noexcept;
}  // namespace fault

}  // namespace specflow

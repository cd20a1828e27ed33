#include "specflow/weights.hpp"

#include "specflow/errors.hpp"
#include "specflow/quadrature.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <atomic>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

namespace specflow {

namespace {

std::atomic<bool> g_boundary_flip{false};

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNormalizationTolerance = 1e-10;

double sign_of(double x) { return x >= 0.0 ? 1.0 : -1.0; }

double binomial(int n, int k) {
  double out = 1.0;
  for (int i = 1; i <= k; ++i) out = out * (n - k + i) / i;
  return out;
}

double resolvent_exponent(const ResolventSpec& r) {
  if (r.variant == ResolventVariant::half_shift) return 0.5 * r.p + 0.5;
  return r.p > 1.0 ? 0.5 * r.p : 1.0;
}

}  // namespace

namespace fault {
void set_boundary_sign_flip(bool on) noexcept { g_boundary_flip.store(on); }
bool boundary_sign_flipped() noexcept { return g_boundary_flip.load(); }
}  // namespace fault

bool SpectralWeight::compact() const noexcept { return std::isfinite(lo_) && std::isfinite(hi_); }

std::string SpectralWeight::describe() const {
  std::ostringstream out;
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, BumpSpec>) {
          out << "bump(delta=" << s.delta << ", m=" << s.m << ")";
        } else if constexpr (std::is_same_v<T, GaussianSpec>) {
          out << "gaussian(epsilon=" << s.epsilon << ")";
        } else if constexpr (std::is_same_v<T, ResolventSpec>) {
          out << "resolvent(p=" << s.p << ", "
              << (s.variant == ResolventVariant::classic ? "classic" : "half_shift") << ")";
        } else {
          out << s.name;
        }
      },
      spec_);
  return out.str();
}

double SpectralWeight::profile(double x) const {
  switch (kind_) {
    case WeightKind::bump: {
      const auto& b = std::get<BumpSpec>(spec_);
      const double ax = std::abs(x);
      if (ax >= b.delta) return 0.0;
      return std::pow((b.delta - ax) * (b.delta + ax), b.m);
    }
    case WeightKind::gaussian:
      return std::exp(-std::get<GaussianSpec>(spec_).epsilon * x * x);
    case WeightKind::resolvent:
      return std::pow(1.0 + x * x, -exponent_);
    case WeightKind::custom: {
      if (x < lo_ || x > hi_) return 0.0;
      return std::get<CustomSpec>(spec_).profile(x);
    }
  }
  return 0.0;
}

double SpectralWeight::density(double x) const { return profile(x) / mass_; }

double SpectralWeight::density_derivative(double x) const {
  switch (kind_) {
    case WeightKind::bump: {
      const auto& b = std::get<BumpSpec>(spec_);
      const double ax = std::abs(x);
      if (ax >= b.delta) return 0.0;
      return -2.0 * b.m * x * std::pow((b.delta - ax) * (b.delta + ax), b.m - 1) / mass_;
    }
    case WeightKind::gaussian: {
      const double eps = std::get<GaussianSpec>(spec_).epsilon;
      return -2.0 * eps * x * density(x);
    }
    case WeightKind::resolvent:
      return -2.0 * exponent_ * x * std::pow(1.0 + x * x, -exponent_ - 1.0) / mass_;
    case WeightKind::custom: {
      constexpr double step = 1e-6;
      return (density(x + step) - density(x - step)) / (2.0 * step);
    }
  }
  return 0.0;
}

double SpectralWeight::half_integral(double ax) const {
  const auto& b = std::get<BumpSpec>(spec_);
  if (ax >= b.delta) return 0.5 * mass_;
  // int_0^x (delta^2 - s^2)^m ds = sum_k C(m,k) (-1)^k delta^{2(m-k)} x^{2k+1} / (2k+1)
  const double d2 = b.delta * b.delta;
  const double x2 = ax * ax;
  double term_x = ax;
  double sum = 0.0;
  for (int k = 0; k <= b.m; ++k) {
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    sum += sign * binomial(b.m, k) * std::pow(d2, b.m - k) * term_x / (2 * k + 1);
    term_x *= x2;
  }
  return std::min(sum, 0.5 * mass_);
}

double SpectralWeight::antiderivative(double x) const {
  const double s = sign_of(x);
  const double ax = std::abs(x);
  switch (kind_) {
    case WeightKind::bump:
      return s * half_integral(ax) / mass_;
    case WeightKind::gaussian: {
      const double eps = std::get<GaussianSpec>(spec_).epsilon;
      return 0.5 * std::erf(std::sqrt(eps) * x);
    }
    case WeightKind::resolvent: {
      if (ax == 0.0) return 0.0;
      const double b = exponent_ - 0.5;
      if (ax < 1.0) {
        return s * 0.5 * boost::math::ibeta(0.5, b, ax * ax / (1.0 + ax * ax));
      }
      return s * (0.5 - 0.5 * boost::math::ibeta(b, 0.5, 1.0 / (1.0 + ax * ax)));
    }
    case WeightKind::custom: {
      if (x <= lo_) return -0.5;
      if (x >= hi_) return 0.5;
      const double from = std::isfinite(lo_) ? lo_ : -kInf;
      QuadResult r;
      if (std::isfinite(from)) {
        r = integrate_adaptive([&](double t) { return profile(t); }, from, x, 1e-12);
      } else {
        // t = tan(u) on (-pi/2, atan x)
        const double upper = std::atan(x);
        r = integrate_adaptive(
            [&](double u) {
              const double c = std::cos(u);
              return profile(std::tan(u)) / (c * c);
            },
            -0.5 * std::numbers::pi + 1e-12, upper, 1e-12);
      }
      return r.value / mass_ - 0.5;
    }
  }
  return 0.0;
}

double SpectralWeight::boundary_f(double x) const {
  const double s = sign_of(x);
  const double ax = std::abs(x);
  switch (kind_) {
    case WeightKind::bump:
      // For x >= 0 this is H(x) - 1/2; odd extension for x < 0.
      return s * (half_integral(ax) - 0.5 * mass_) / mass_;
    case WeightKind::gaussian: {
      const double eps = std::get<GaussianSpec>(spec_).epsilon;
      return -s * 0.5 * std::erfc(std::sqrt(eps) * ax);
    }
    case WeightKind::resolvent: {
      if (ax == 0.0) return -0.5;
      const double b = exponent_ - 0.5;
      if (ax < 1.0) {
        return -s * 0.5 * boost::math::ibetac(0.5, b, ax * ax / (1.0 + ax * ax));
      }
      return -s * 0.5 * boost::math::ibeta(b, 0.5, 1.0 / (1.0 + ax * ax));
    }
    case WeightKind::custom:
      return antiderivative(x) - (x >= 0.0 ? 1.0 : 0.0) + 0.5;
  }
  return 0.0;
}

SpectralWeight make_weight(const WeightSpec& spec) {
  SpectralWeight w;
  w.spec_ = spec;
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, BumpSpec>) {
          if (!(s.delta > 0.0) || !std::isfinite(s.delta)) throw InvalidSpec("bump: delta must be > 0");
          if (s.m < 2) throw InvalidSpec("bump: m must be >= 2");
          w.kind_ = WeightKind::bump;
          w.lo_ = -s.delta;
          w.hi_ = s.delta;
          w.mass_ = std::pow(s.delta, 2 * s.m + 1) * std::beta(0.5, s.m + 1.0);
        } else if constexpr (std::is_same_v<T, GaussianSpec>) {
          if (!(s.epsilon > 0.0) || !std::isfinite(s.epsilon)) {
            throw InvalidSpec("gaussian: epsilon must be > 0");
          }
          w.kind_ = WeightKind::gaussian;
          w.lo_ = -kInf;
          w.hi_ = kInf;
          w.mass_ = std::sqrt(std::numbers::pi / s.epsilon);
        } else if constexpr (std::is_same_v<T, ResolventSpec>) {
          if (!(s.p >= 1.0) || !std::isfinite(s.p)) throw InvalidSpec("resolvent: p must be >= 1");
          w.kind_ = WeightKind::resolvent;
          w.lo_ = -kInf;
          w.hi_ = kInf;
          w.exponent_ = resolvent_exponent(s);
          w.mass_ = std::beta(0.5, w.exponent_ - 0.5);
        } else {
          if (!s.profile) throw InvalidSpec("custom weight: profile missing");
          if (!(s.lo < s.hi)) throw InvalidSpec("custom weight: need lo < hi");
          w.kind_ = WeightKind::custom;
          w.lo_ = s.lo;
          w.hi_ = s.hi;
          w.mass_ = 1.0;
        }
      },
      spec);

  // Unnormalized mass by quadrature; for the custom family this is the
  // normalization itself, for the others an independent check of the closed form.
  constexpr double quad_tol = 1e-13;
  const auto unnormalized = [&](double x) { return w.profile(x); };
  double measured_mass = 0.0;
  switch (w.kind_) {
    case WeightKind::bump:
      measured_mass = integrate_adaptive(unnormalized, w.lo_, w.hi_, quad_tol * w.mass_).value;
      break;
    case WeightKind::gaussian:
      measured_mass = integrate_line(unnormalized, quad_tol * w.mass_).value;
      break;
    case WeightKind::resolvent: {
      // x = sinh(s): (1 + x^2)^-a dx = cosh(s)^(1 - 2a) ds, exponentially decaying.
      const double rate = 2.0 * w.exponent_ - 1.0;
      const double cutoff = (std::log(2.0 / (rate * quad_tol)) + rate * std::log(2.0)) / rate;
      measured_mass = integrate_adaptive(
                          [&](double s) { return std::pow(std::cosh(s), 1.0 - 2.0 * w.exponent_); },
                          -cutoff, cutoff, quad_tol * w.mass_)
                          .value;
      break;
    }
    case WeightKind::custom: {
      const auto& c = std::get<CustomSpec>(spec);
      QuadResult r;
      if (std::isfinite(c.lo) && std::isfinite(c.hi)) {
        r = integrate_adaptive(unnormalized, c.lo, c.hi, 1e-12);
      } else {
        r = integrate_line(unnormalized, 1e-12);
      }
      if (!(r.value > 0.0)) throw InvalidSpec("custom weight: profile has zero mass");
      w.mass_ = r.value;
      measured_mass = r.value;
      break;
    }
  }
  w.measured_integral_ = measured_mass / w.mass_;
  if (std::abs(w.measured_integral_ - 1.0) > kNormalizationTolerance) {
    std::ostringstream msg;
    msg << "weight " << w.describe() << ": normalization check failed, integral = "
        << std::setprecision(17) << w.measured_integral_;
    throw InvalidSpec(msg.str());
  }
  return w;
}

double boundary_term(const SpectralWeight& w, const FramedOperator& f0, const EigenSystem& sys0,
                     const FramedOperator& f1, const EigenSystem& sys1) {
  if (f0.dim() != f1.dim() || !same_essential_points(f0, f1)) {
    throw InvalidPair("boundary_term: endpoints differ in dimension or essential points");
  }
  for (double e : f0.essential_points()) {
    const double v = w.boundary_f(e);
    if (std::abs(v) > 1e-12) {
      std::ostringstream msg;
      msg << "boundary_term: boundary function is " << v << " at essential point " << e
          << "; the endpoint correction is not trace class";
      throw NotTraceClass(msg.str());
    }
  }
  CompensatedSum sum;
  for (Eigen::Index i = 0; i < sys0.values.size(); ++i) sum.add(w.boundary_f(sys0.values[i]));
  for (Eigen::Index i = 0; i < sys1.values.size(); ++i) sum.add(-w.boundary_f(sys1.values[i]));
  const double value = sum.value();
  return fault::boundary_sign_flipped() ? -value : value;
}

double boundary_term(const SpectralWeight& w, const FramedOperator& f0, const FramedOperator& f1) {
  return boundary_term(w, f0, eigensystem(f0), f1, eigensystem(f1));
}

}  // namespace specflow

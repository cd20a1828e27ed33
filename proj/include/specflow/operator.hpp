#pragma once

#include <Eigen/Dense>

#include <complex>
#include <functional>
#include <limits>
#include <vector>

namespace specflow {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using RealVector = Eigen::VectorXd;
using ScalarMap = std::function<double(double)>;

/// Relative tolerance for the Hermitian check on construction.
inline constexpr double kHermitianTolerance = 1e-12;
/// Essential points closer than this are treated as one point.
inline constexpr double kEssentialMergeGap = 1e-12;

/// Ascending eigenvalues with a unitary eigenbasis (columns).
struct EigenSystem {
  RealVector values;
  Matrix basis;

  Eigen::Index dim() const noexcept { return values.size(); }

  /// basis * diag(diagonal) * basis^*
  Matrix compose(const RealVector& diagonal) const;
  Matrix compose(const ScalarMap& f) const;
};

/// Finite Hermitian block plus a set of essential-spectrum points of infinite
/// multiplicity. The essential points model the image of the operator in the
/// Calkin algebra; an empty set is the unbounded (unframed) model.
class FramedOperator {
 public:
  FramedOperator() = default;

  /// Throws InvalidInput if `block` is not square or not Hermitian within
  /// kHermitianTolerance * max|block|. The stored block is symmetrized.
  explicit FramedOperator(Matrix block, std::vector<double> essential_points = {});

  static FramedOperator diagonal(const std::vector<double>& entries,
                                 std::vector<double> essential_points = {});

  const Matrix& block() const noexcept { return block_; }
  const std::vector<double>& essential_points() const noexcept { return essential_points_; }
  Eigen::Index dim() const noexcept { return block_.rows(); }
  bool framed() const noexcept { return !essential_points_.empty(); }

 private:
  Matrix block_;
  std::vector<double> essential_points_;
};

/// Sorts and deduplicates essential points (merging within kEssentialMergeGap).
std::vector<double> normalize_essential_points(std::vector<double> points);

bool same_essential_points(const FramedOperator& a, const FramedOperator& b,
                           double tol = kEssentialMergeGap);

/// Hermitian eigendecomposition with a deterministic ordering and phase:
/// ascending values, ties broken by the index of the dominant component, each
/// column scaled so its dominant component is real and positive.
EigenSystem eigensystem(const FramedOperator& a);
EigenSystem eigensystem(const Matrix& hermitian);

FramedOperator apply_function(const FramedOperator& a, const ScalarMap& f);
FramedOperator apply_function(const FramedOperator& a, const EigenSystem& sys, const ScalarMap& f);

struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  bool lo_closed = true;
  bool hi_closed = true;

  bool contains(double x) const noexcept;

  static Interval closed(double lo, double hi) { return {lo, hi, true, true}; }
  static Interval open(double lo, double hi) { return {lo, hi, false, false}; }
  /// [lo, +inf)
  static Interval at_least(double lo) {
    return {lo, std::numeric_limits<double>::infinity(), true, false};
  }
};

/// Projection onto the eigenvectors with eigenvalue in `interval`. The
/// essential part of the result is the indicator of the interval evaluated at
/// each essential point, so the projection is tau-finite iff it carries no
/// essential point equal to 1.
FramedOperator spectral_projection(const FramedOperator& a, const Interval& interval);
FramedOperator spectral_projection(const FramedOperator& a, const EigenSystem& sys,
                                   const Interval& interval);

bool is_tau_finite(const FramedOperator& projection);

/// 2 chi_[0,inf)(A) - 1. Zero eigenvalues go to +1.
FramedOperator phase(const FramedOperator& a);

struct TraceFunctionals {
  double trace = 0.0;
  double trace_norm = 0.0;
  double op_norm = 0.0;
};

/// Throws NotTraceClass if any essential point is nonzero.
TraceFunctionals trace_functionals(const FramedOperator& a);

/// max of the block spectral radius and the largest |essential point|.
double op_norm(const FramedOperator& a);

struct EssentialData {
  double delta_f = 0.0;
  double essential_norm = 0.0;
  bool is_fredholm = false;
  bool in_f_pm1 = false;
};

/// Throws NoCalkinModel for an unframed operator.
EssentialData essential_data(const FramedOperator& a);

/// Largest singular value.
double operator_norm(const Matrix& m);
/// Spectral radius of a Hermitian matrix (equals its operator norm).
double hermitian_norm(const Matrix& m);

/// Operator norm of the block difference combined with the Hausdorff distance
/// between the essential point sets.
double framed_distance(const FramedOperator& a, const FramedOperator& b);

}  // namespace specflow

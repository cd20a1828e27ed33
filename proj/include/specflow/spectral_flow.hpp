#pragma once

#include "specflow/operator.hpp"
#include "specflow/paths.hpp"
#include "specflow/quadrature.hpp"
#include "specflow/weights.hpp"

#include <vector>

namespace specflow {

struct SFReport {
  long sf_partition = 0;
  long sf_crossing = 0;
  double integral_value = 0.0;
  double boundary_term = 0.0;
  double total = 0.0;
  long rounded_total = 0;
  /// |total - rounded_total|
  double integer_defect = 0.0;
  double quadrature_error_estimate = 0.0;
  /// Milliseconds.
  double wall_time = 0.0;
};

/// ind(PQ : QH -> PH) in the finite-rank-difference model, tr(Q) - tr(P).
/// Throws InvalidInput for non-projections, InvalidPair for differing
/// essential parts and ModelViolation if the trace difference is not within
/// 1e-6 of an integer.
long relative_index(const FramedOperator& p, const FramedOperator& q);

struct PartitionOptions {
  long max_points = 1L << 14;
};

/// Phillips' partition sum of relative indices of chi_[0,inf)(F_{t_i}). The
/// grid starts uniform with `grid` points and is refined until consecutive
/// samples are closer than delta/2, then checked against one doubling and the
/// telescoped trace difference. Unbounded-model paths go through vartheta.
long sf_partition(const OperatorPath& path, int grid, const PartitionOptions& options = {});

struct CrossingEvent {
  double t = 0.0;
  Eigen::Index branch = 0;
  /// +1 upward through 0, -1 downward.
  int direction = 0;
};

struct CrossingOptions {
  /// Bisect each sign change down to this width in t.
  bool locate = false;
  double t_tolerance = 1e-10;
  /// Subdivide intervals where a branch could dip through 0 and come back.
  bool resolve_touches = false;
  int max_depth = 30;
};

struct CrossingTally {
  long sf = 0;
  std::vector<CrossingEvent> events;
};

/// Tracks sorted eigenvalue branches of the block across the grid and tallies
/// signed passages through 0 (0 itself counts as nonnegative). Throws
/// DegenerateCrossing if the tally disagrees with the endpoint counts.
CrossingTally crossing_events(const OperatorPath& path, int grid, const CrossingOptions& options = {});
long sf_crossing(const OperatorPath& path, int grid);

struct SFOptions {
  /// Initial grid of the discrete estimators.
  int grid = 64;
  bool discrete_estimators = true;
  QuadOptions quad;
};

/// int_0^1 tr(Fdot_t w(F_t)) dt split at the path's breakpoints; the total
/// tolerance is shared between segments in proportion to their length.
QuadResult path_integral(const OperatorPath& path, const SpectralWeight& w, double quad_tol,
                         const QuadOptions& quad = {});

/// Integral formula for bounded framed paths. The weight must be compactly
/// supported inside [-delta (1 - 1e-6), delta (1 - 1e-6)] where delta is the
/// distance of the essential spectrum from 0 (HypothesisViolation otherwise).
SFReport sf_integral_bounded(const OperatorPath& path, const SpectralWeight& w, double quad_tol,
                             const SFOptions& options = {});

/// Integral formula for unbounded-model paths with a gaussian or resolvent weight.
SFReport sf_integral_unbounded(const OperatorPath& dpath, const SpectralWeight& w, double quad_tol,
                               const SFOptions& options = {});

/// int_0^1 tr(Fdot_t w(F_t)) dt over a loop. Throws NotClosed unless
/// F_0 and F_1 are bit-identical.
double loop_integral(const OperatorPath& loop, const SpectralWeight& w, double quad_tol,
                     const QuadOptions& quad = {});

/// chi(x) = |x + 1|/2 - |x - 1|/2, the clamp to [-1, 1].
double clamp_chi(double x);

/// Deformation retraction onto F*^{+-1}: on [0, 1/2] the rescaling
/// F / (1 - s + s delta_F) with s = 2t, on [1/2, 1] the straight line from
/// that result G to chi(G) with s = 2t - 1. Throws InvalidInput for
/// non-Fredholm input or t outside [0, 1].
FramedOperator retract(const FramedOperator& f, double t);

}  // namespace specflow

#pragma once

#include "specflow/operator.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

namespace specflow {

enum class PathKind { bounded, unbounded_model };

/// Which one-sided derivative to return at a breakpoint.
enum class Side { right, left };

struct PathSample {
  FramedOperator F;
  Matrix Fdot;
  /// t is an interior breakpoint; Fdot is the one-sided derivative for the requested side.
  bool one_sided = false;
};

/// Eigensystem of the block of F_t together with Fdot_t.
struct SpectralSample {
  EigenSystem system;
  Matrix Fdot;
};

/// A parametrized family t in [0, 1] -> F_t of framed operators (or, for the
/// unbounded model, plain Hermitian blocks), piecewise C^1 between breakpoints.
class OperatorPath {
 public:
  using Evaluator = std::function<FramedOperator(double)>;
  using Derivative = std::function<Matrix(double, Side)>;

  struct Options {
    /// Central-difference step when no analytic derivative is supplied.
    double eta = 1e-5;
    /// Run the 33-point continuity and constant-essential-spectrum check.
    bool validate = true;
  };

  OperatorPath(Evaluator evaluator, std::optional<Derivative> derivative, std::vector<double> breakpoints,
               PathKind kind, Options options);
  OperatorPath(Evaluator evaluator, std::optional<Derivative> derivative, std::vector<double> breakpoints,
               PathKind kind)
      : OperatorPath(std::move(evaluator), std::move(derivative), std::move(breakpoints), kind, Options{}) {}

  using SpectralSampler = std::function<SpectralSample(double, Side)>;

  /// Throws InvalidInput for t outside [0, 1].
  FramedOperator at(double t) const;
  /// eigensystem(at(t)) with derivative(t, side); paths that know their
  /// spectral decomposition can supply a cheaper joint sampler.
  SpectralSample spectral_sample(double t, Side side = Side::right) const;
  OperatorPath with_spectral_sampler(SpectralSampler sampler) const;
  PathSample sample(double t, Side side = Side::right) const;
  Matrix derivative(double t, Side side = Side::right) const;

  /// Interior breakpoints, sorted, strictly inside (0, 1).
  const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }
  /// 0, interior breakpoints, 1.
  std::vector<double> knots() const;

  PathKind kind() const noexcept { return kind_; }
  bool analytic() const noexcept { return derivative_.has_value(); }
  double eta() const noexcept { return options_.eta; }
  Eigen::Index dim() const noexcept { return dim_; }
  const std::vector<double>& essential_points() const noexcept { return essential_points_; }

 private:
  Matrix central_difference(double t, Side side) const;

  Evaluator evaluator_;
  std::optional<Derivative> derivative_;
  std::optional<SpectralSampler> spectral_;
  std::vector<double> breakpoints_;
  PathKind kind_;
  Options options_;
  Eigen::Index dim_ = 0;
  std::vector<double> essential_points_;
};

/// F_t = (1 - t) F0 + t F1 with derivative F1 - F0.
OperatorPath make_line_path(const FramedOperator& f0, const FramedOperator& f1,
                            PathKind kind = PathKind::bounded);

/// D_t = sum_k t^k C_k with analytic derivative.
OperatorPath make_polynomial_path(std::vector<Matrix> coefficients, std::vector<double> essential_points,
                                  PathKind kind);

/// Runs the pieces one after another, each rescaled to an interval of length 1/K.
OperatorPath concatenate(const std::vector<OperatorPath>& pieces);

/// t -> F_{1-t}.
OperatorPath reversed(const OperatorPath& path);

/// bridge (F0 -> F1), then F1 -> B1, B1 -> B0, B0 -> F0 along straight lines,
/// where B_j is the phase of F_j. Requires F_j in F*^{+-1}.
OperatorPath make_phase_rectangle_loop(const FramedOperator& f0, const FramedOperator& f1,
                                       const OperatorPath& bridge);

struct TrigPathSpec {
  std::uint64_t seed = 0;
  int n = 4;
  /// Bound on the operator norm of the trigonometric part.
  double amplitude = 0.1;
  int harmonics = 2;
  std::vector<double> essential_points{-1.0, 1.0};
  /// Keep op_norm(F_t) <= 1 - margin.
  double margin = 0.05;
  /// Base eigenvalues are drawn with gap <= |lambda| <= radius.
  double base_radius = 0.6;
  double base_gap = 0.0;
  /// Adds (2t - 1) diag(d) with |d_i| <= drift; zero keeps the path a loop.
  double drift = 0.0;
  int max_tries = 100;
};

/// F_t = F_base + sum_k (A_k cos 2 pi k t + B_k sin 2 pi k t) + (2t - 1) diag(d),
/// rejection-resampled until op_norm stays below 1 - margin on a 257-point grid.
/// Without drift F_0 and F_1 are bit-identical. Throws GeneratorError.
OperatorPath make_trig_path(const TrigPathSpec& spec);

OperatorPath make_trig_loop(std::uint64_t seed, int n, double amplitude, int harmonics);

struct QuadraticPathSpec {
  std::uint64_t seed = 0;
  int n = 8;
  /// Endpoint eigenvalues satisfy headroom <= |lambda| <= headroom + spread.
  double headroom = 4.0;
  double spread = 8.0;
  /// Operator norm of the t^2 coefficient.
  double curvature = 2.0;
};

/// Unbounded-model path D_t = D_0 + t V + t^2 W whose endpoints have random
/// eigenvalue signs and magnitudes in [headroom, headroom + spread].
OperatorPath make_quadratic_dpath(const QuadraticPathSpec& spec);

/// F_t = vartheta(D_t) with essential points {-1, +1}; the derivative is the
/// double operator integral T_{psi_vartheta}(D_t, D_t)(Ddot_t).
OperatorPath vartheta_path(const OperatorPath& dpath);

/// || ((D_t - D_t0)/(t - t0) - Ddot_t0) (1 + D_t0^2)^(-1/2) || in operator norm.
double gamma_derivative_residual(const OperatorPath& dpath, double t0, double t);

/// Trapezoid estimate of int_0^1 ||Fdot_t|| dt with `samples` points per segment.
double arc_length(const OperatorPath& path, int samples = 129);

/// Smallest distance of the essential points from 0 (constant along a path).
double path_delta(const OperatorPath& path);

namespace random {
using Engine = std::mt19937_64;
Matrix hermitian(Engine& rng, Eigen::Index n, double scale = 1.0);
Matrix unitary(Engine& rng, Eigen::Index n);
/// Random Hermitian with prescribed eigenvalues.
Matrix with_spectrum(Engine& rng, const RealVector& eigenvalues);
Matrix complex_matrix(Engine& rng, Eigen::Index rows, Eigen::Index cols);
}  // namespace random

}  // namespace specflow

#pragma once

#include "specflow/operator.hpp"
#include "specflow/weights.hpp"

#include <functional>
#include <string>

namespace specflow {

/// A real function together with its derivative.
struct DifferentiableFunction {
  std::string name;
  ScalarMap value;
  ScalarMap derivative;
};

namespace functions {
DifferentiableFunction square();
DifferentiableFunction cube();
/// x / sqrt(1 + x^2)
DifferentiableFunction vartheta();
DifferentiableFunction tanh();
/// The density h of a weight, with h' as derivative.
DifferentiableFunction density(const SpectralWeight& w);
/// Looks up one of "x2", "x3", "vartheta", "tanh"; throws InvalidSpec otherwise.
DifferentiableFunction by_name(const std::string& name);
}  // namespace functions

double vartheta(double x);

/// Default relative gap below which a divided difference falls back to the
/// derivative: |l - m| < kMergeTolerance (1 + |l| + |m|).
inline constexpr double kMergeTolerance = 1e-7;

/// (f(l) - f(m)) / (l - m), or f' at the midpoint once the points merge.
double divided_difference(const DifferentiableFunction& f, double l, double m,
                          double merge_tol = kMergeTolerance);

/// Two-variable symbol of a double operator integral.
class DoiKernel {
 public:
  using Symbol = std::function<double(double, double)>;

  DoiKernel(std::string name, Symbol symbol, bool symmetric);

  static DoiKernel divided_difference(DifferentiableFunction f, double merge_tol = kMergeTolerance);
  /// (vartheta(l) - vartheta(m)) / (l - m) * (1 + m^2)^(1/2). Unbounded as a
  /// Schur multiplier; only applied through apply_phi_theta.
  static DoiKernel phi_theta();
  /// (1 + l^2)^(1/4) * psi_vartheta(l, m) * (1 + m^2)^(1/4).
  static DoiKernel psi_theta();
  static DoiKernel custom(std::string name, Symbol symbol, bool symmetric = false);
  static DoiKernel constant(double c);

  double operator()(double l, double m) const { return symbol_(l, m); }
  const std::string& name() const noexcept { return name_; }
  bool declared_symmetric() const noexcept { return symmetric_; }

  /// Pointwise product of two symbols.
  friend DoiKernel operator*(const DoiKernel& a, const DoiKernel& b);

 private:
  std::string name_;
  Symbol symbol_;
  bool symmetric_ = false;
};

/// Matrix of symbol values Phi(j, k) = phi(left.values[j], right.values[k]).
Eigen::MatrixXd symbol_matrix(const DoiKernel& k, const EigenSystem& left, const EigenSystem& right);

/// T_phi(X) = U_A (Phi o (U_A^* X U_B)) U_B^*, with A on the left and B on the right.
Matrix apply_doi(const DoiKernel& k, const EigenSystem& left, const EigenSystem& right, const Matrix& x);

/// Frobenius norm of f(A) - f(B) - T_{psi_f}(A, B)(A - B); framing is ignored.
double perturbation_residual(const DifferentiableFunction& f, const FramedOperator& a,
                             const FramedOperator& b);

/// d/dt vartheta(D + t Ddot) at t = 0, as T_{psi_vartheta}(D, D)(Ddot).
Matrix vartheta_derivative(const FramedOperator& d, const Matrix& ddot);
Matrix vartheta_derivative(const EigenSystem& d, const Matrix& ddot);

/// T_phi(D1, D0)(B) for the kernel phi_theta, realized through the bounded
/// factorization T_psi((1 + D1^2)^(-1/4) B (1 + D0^2)^(1/4)). With
/// B = (D1 - D0)(1 + D0^2)^(-1/2) this returns vartheta(D1) - vartheta(D0).
Matrix apply_phi_theta(const EigenSystem& d1, const EigenSystem& d0, const Matrix& b);

/// |tr T_phi(V) - tr(f(D) V)| with f(l) = phi(l, l). Throws InvalidKernel if
/// the symbol is not symmetric on the spectrum of D, NotTraceClass if
/// phi(e, e) != 0 at an essential point.
double trace_duality_residual(const DoiKernel& k, const FramedOperator& d, const Matrix& v);

/// ||B1 A||^(1-theta) ||A B0||^theta - ||B1^(1-theta) A B0^theta|| in operator norm.
/// Throws InvalidInput if B0 or B1 has a negative eigenvalue beyond 1e-12 ||B||.
double interpolation_gap(const Matrix& a, const Matrix& b0, const Matrix& b1, double theta);

/// ||(1 + D1^2)^(-1/4) (1 + D0^2)^(1/4) - 1|| / ||(D1 - D0)(1 + D0^2)^(-1/2)||.
/// Monitored diagnostic; the constant bounding it is not specified.
double auxiliary_estimate_ratio(const Matrix& d0, const Matrix& d1);

/// Hermitian power B^s for positive semidefinite B (s = 0 gives the identity).
Matrix psd_power(const Matrix& b, double s);

}  // namespace specflow

#include "specflow/doi.hpp"

#include "specflow/errors.hpp"

#include <cmath>
#include <sstream>

namespace specflow {

double vartheta(double x) { return x / std::sqrt(1.0 + x * x); }

namespace functions {

DifferentiableFunction square() {
  return {"x2", [](double x) { return x * x; }, [](double x) { return 2.0 * x; }};
}

DifferentiableFunction cube() {
  return {"x3", [](double x) { return x * x * x; }, [](double x) { return 3.0 * x * x; }};
}

DifferentiableFunction vartheta() {
  return {"vartheta", [](double x) { return specflow::vartheta(x); },
          [](double x) { return std::pow(1.0 + x * x, -1.5); }};
}

DifferentiableFunction tanh() {
  return {"tanh", [](double x) { return std::tanh(x); },
          [](double x) {
            const double c = std::cosh(x);
            return 1.0 / (c * c);
          }};
}

DifferentiableFunction density(const SpectralWeight& w) {
  return {"density:" + w.describe(), [w](double x) { return w.density(x); },
          [w](double x) { return w.density_derivative(x); }};
}

DifferentiableFunction by_name(const std::string& name) {
  if (name == "x2") return square();
  if (name == "x3") return cube();
  if (name == "vartheta") return vartheta();
  if (name == "tanh") return tanh();
  throw InvalidSpec("unknown function '" + name + "' (expected x2, x3, vartheta, tanh)");
}

}  // namespace functions

double divided_difference(const DifferentiableFunction& f, double l, double m, double merge_tol) {
  if (std::abs(l - m) < merge_tol * (1.0 + std::abs(l) + std::abs(m))) {
    return f.derivative(0.5 * (l + m));
  }
  return (f.value(l) - f.value(m)) / (l - m);
}

DoiKernel::DoiKernel(std::string name, Symbol symbol, bool symmetric)
    : name_(std::move(name)), symbol_(std::move(symbol)), symmetric_(symmetric) {
  if (!symbol_) throw InvalidKernel("DoiKernel: empty symbol");
}

DoiKernel DoiKernel::divided_difference(DifferentiableFunction f, double merge_tol) {
  std::string name = "psi_" + f.name;
  return DoiKernel(
      std::move(name),
      [f = std::move(f), merge_tol](double l, double m) {
        return specflow::divided_difference(f, l, m, merge_tol);
      },
      true);
}

DoiKernel DoiKernel::phi_theta() {
  const auto vt = functions::vartheta();
  return DoiKernel(
      "phi_theta",
      [vt](double l, double m) { return specflow::divided_difference(vt, l, m) * std::sqrt(1.0 + m * m); },
      false);
}

DoiKernel DoiKernel::psi_theta() {
  const auto vt = functions::vartheta();
  return DoiKernel(
      "psi_theta",
      [vt](double l, double m) {
        return std::pow(1.0 + l * l, 0.25) * specflow::divided_difference(vt, l, m) *
               std::pow(1.0 + m * m, 0.25);
      },
      true);
}

DoiKernel DoiKernel::custom(std::string name, Symbol symbol, bool symmetric) {
  return DoiKernel(std::move(name), std::move(symbol), symmetric);
}

DoiKernel DoiKernel::constant(double c) {
  std::ostringstream name;
  name << "const(" << c << ")";
  return DoiKernel(name.str(), [c](double, double) { return c; }, true);
}

DoiKernel operator*(const DoiKernel& a, const DoiKernel& b) {
  return DoiKernel(a.name_ + "*" + b.name_,
                   [sa = a.symbol_, sb = b.symbol_](double l, double m) { return sa(l, m) * sb(l, m); },
                   a.symmetric_ && b.symmetric_);
}

Eigen::MatrixXd symbol_matrix(const DoiKernel& k, const EigenSystem& left, const EigenSystem& right) {
  Eigen::MatrixXd phi(left.dim(), right.dim());
  for (Eigen::Index j = 0; j < left.dim(); ++j) {
    for (Eigen::Index i = 0; i < right.dim(); ++i) {
      phi(j, i) = k(left.values[j], right.values[i]);
    }
  }
  return phi;
}

Matrix apply_doi(const DoiKernel& k, const EigenSystem& left, const EigenSystem& right, const Matrix& x) {
  if (x.rows() != left.dim() || x.cols() != right.dim()) {
    std::ostringstream msg;
    msg << "apply_doi: X is " << x.rows() << "x" << x.cols() << ", eigensystems are " << left.dim()
        << " and " << right.dim();
    throw InvalidInput(msg.str());
  }
  Matrix mixed = left.basis.adjoint() * x * right.basis;
  mixed.array() *= symbol_matrix(k, left, right).cast<Complex>().array();
  return left.basis * mixed * right.basis.adjoint();
}

double perturbation_residual(const DifferentiableFunction& f, const FramedOperator& a,
                             const FramedOperator& b) {
  if (a.dim() != b.dim()) throw InvalidPair("perturbation_residual: dimension mismatch");
  const EigenSystem sa = eigensystem(a);
  const EigenSystem sb = eigensystem(b);
  const Matrix lhs = sa.compose(f.value) - sb.compose(f.value);
  const Matrix rhs = apply_doi(DoiKernel::divided_difference(f), sa, sb, a.block() - b.block());
  return (lhs - rhs).norm();
}

Matrix vartheta_derivative(const EigenSystem& d, const Matrix& ddot) {
  return apply_doi(DoiKernel::divided_difference(functions::vartheta()), d, d, ddot);
}

Matrix vartheta_derivative(const FramedOperator& d, const Matrix& ddot) {
  return vartheta_derivative(eigensystem(d), ddot);
}

Matrix apply_phi_theta(const EigenSystem& d1, const EigenSystem& d0, const Matrix& b) {
  const Matrix left = d1.compose([](double x) { return std::pow(1.0 + x * x, -0.25); });
  const Matrix right = d0.compose([](double x) { return std::pow(1.0 + x * x, 0.25); });
  return apply_doi(DoiKernel::psi_theta(), d1, d0, left * b * right);
}

double trace_duality_residual(const DoiKernel& k, const FramedOperator& d, const Matrix& v) {
  const EigenSystem sys = eigensystem(d);
  const Eigen::MatrixXd phi = symbol_matrix(k, sys, sys);
  const double scale = phi.size() ? phi.cwiseAbs().maxCoeff() : 0.0;
  if ((phi - phi.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + scale)) {
    throw InvalidKernel("trace_duality_residual: kernel " + k.name() + " is not symmetric");
  }
  for (double e : d.essential_points()) {
    if (std::abs(k(e, e)) > 1e-12) {
      std::ostringstream msg;
      msg << "trace_duality_residual: kernel does not vanish at essential point " << e;
      throw NotTraceClass(msg.str());
    }
  }
  const Complex lhs = apply_doi(k, sys, sys, v).trace();
  const Matrix fd = sys.compose([&](double x) { return k(x, x); });
  const Complex rhs = (fd * v).trace();
  return std::abs(lhs - rhs);
}

Matrix psd_power(const Matrix& b, double s) {
  const Eigen::Index n = b.rows();
  if (s == 0.0) return Matrix::Identity(n, n);
  if (s == 1.0) return b;
  const EigenSystem sys = eigensystem(b);
  const double scale = n ? std::max(std::abs(sys.values[0]), std::abs(sys.values[n - 1])) : 0.0;
  if (n && sys.values[0] < -1e-12 * scale) {
    std::ostringstream msg;
    msg << "psd_power: matrix has negative eigenvalue " << sys.values[0];
    throw InvalidInput(msg.str());
  }
  return sys.compose([s](double x) { return x > 0.0 ? std::pow(x, s) : 0.0; });
}

double interpolation_gap(const Matrix& a, const Matrix& b0, const Matrix& b1, double theta) {
  if (!(theta >= 0.0 && theta <= 1.0)) throw InvalidInput("interpolation_gap: theta must lie in [0, 1]");
  if (a.rows() != b1.cols() || a.cols() != b0.rows()) {
    throw InvalidInput("interpolation_gap: dimension mismatch");
  }
  // Validate both operators even at the endpoints of theta.
  psd_power(b0, 0.5);
  psd_power(b1, 0.5);
  const double lhs = operator_norm(psd_power(b1, 1.0 - theta) * a * psd_power(b0, theta));
  const double rhs = std::pow(operator_norm(b1 * a), 1.0 - theta) * std::pow(operator_norm(a * b0), theta);
  return rhs - lhs;
}

double auxiliary_estimate_ratio(const Matrix& d0, const Matrix& d1) {
  const EigenSystem s0 = eigensystem(d0);
  const EigenSystem s1 = eigensystem(d1);
  const Eigen::Index n = d0.rows();
  const Matrix lhs = s1.compose([](double x) { return std::pow(1.0 + x * x, -0.25); }) *
                         s0.compose([](double x) { return std::pow(1.0 + x * x, 0.25); }) -
                     Matrix::Identity(n, n);
  const Matrix rhs = (d1 - d0) * s0.compose([](double x) { return 1.0 / std::sqrt(1.0 + x * x); });
  const double denom = operator_norm(rhs);
  return denom > 0.0 ? operator_norm(lhs) / denom : 0.0;
}

}  // namespace specflow

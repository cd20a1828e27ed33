#include "specflow/operator.hpp"

#include "specflow/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace specflow {

namespace {

double max_abs(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

void require_hermitian(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) {
    std::ostringstream msg;
    msg << what << ": block must be square, got " << m.rows() << "x" << m.cols();
    throw InvalidInput(msg.str());
  }
  if (!m.allFinite()) throw InvalidInput(std::string(what) + ": block has non-finite entries");
  const double asym = max_abs(m - m.adjoint());
  if (asym > kHermitianTolerance * max_abs(m)) {
    std::ostringstream msg;
    msg << what << ": block is not Hermitian (max |A - A*| = " << asym << ")";
    throw InvalidInput(msg.str());
  }
}

std::vector<double> map_points(const std::vector<double>& points, const ScalarMap& f) {
  std::vector<double> out;
  out.reserve(points.size());
  for (double e : points) {
    const double v = f(e);
    if (!std::isfinite(v)) {
      std::ostringstream msg;
      msg << "function undefined at essential point " << e;
      throw DomainError(msg.str());
    }
    out.push_back(v);
  }
  return normalize_essential_points(std::move(out));
}

}  // namespace

Matrix EigenSystem::compose(const RealVector& diagonal) const {
  return basis * diagonal.cast<Complex>().asDiagonal() * basis.adjoint();
}

Matrix EigenSystem::compose(const ScalarMap& f) const {
  RealVector d(values.size());
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    d[i] = f(values[i]);
    if (!std::isfinite(d[i])) {
      std::ostringstream msg;
      msg << "function undefined at eigenvalue " << values[i];
      throw DomainError(msg.str());
    }
  }
  return compose(d);
}

std::vector<double> normalize_essential_points(std::vector<double> points) {
  for (double p : points) {
    if (!std::isfinite(p)) throw InvalidInput("essential points must be finite");
  }
  std::sort(points.begin(), points.end());
  std::vector<double> out;
  for (double p : points) {
    if (out.empty() || p - out.back() > kEssentialMergeGap) out.push_back(p);
  }
  return out;
}

FramedOperator::FramedOperator(Matrix block, std::vector<double> essential_points)
    : block_(std::move(block)),
      essential_points_(normalize_essential_points(std::move(essential_points))) {
  require_hermitian(block_, "FramedOperator");
  Matrix sym = 0.5 * (block_ + block_.adjoint());
  block_ = std::move(sym);
}

FramedOperator FramedOperator::diagonal(const std::vector<double>& entries,
                                        std::vector<double> essential_points) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(entries.size()),
                          static_cast<Eigen::Index>(entries.size()));
  for (std::size_t i = 0; i < entries.size(); ++i) {
    m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = entries[i];
  }
  return FramedOperator(std::move(m), std::move(essential_points));
}

bool same_essential_points(const FramedOperator& a, const FramedOperator& b, double tol) {
  const auto& ea = a.essential_points();
  const auto& eb = b.essential_points();
  if (ea.size() != eb.size()) return false;
  for (std::size_t i = 0; i < ea.size(); ++i) {
    if (std::abs(ea[i] - eb[i]) > tol) return false;
  }
  return true;
}

EigenSystem eigensystem(const Matrix& hermitian) {
  require_hermitian(hermitian, "eigensystem");
  const Eigen::Index n = hermitian.rows();
  EigenSystem out;
  if (n == 0) {
    out.values = RealVector(0);
    out.basis = Matrix(0, 0);
    return out;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(hermitian);
  if (solver.info() != Eigen::Success) throw InvalidInput("eigensystem: solver failed");

  const RealVector& vals = solver.eigenvalues();
  Matrix vecs = solver.eigenvectors();

  std::vector<Eigen::Index> dominant(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double mag = std::norm(vecs(i, j));
      if (mag > best * (1.0 + 2e-12)) {
        best = mag;
        arg = i;
      }
    }
    dominant[static_cast<std::size_t>(j)] = arg;
    const Complex c = vecs(arg, j);
    vecs.col(j) *= std::conj(c) / std::abs(c);
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (vals[a] != vals[b]) return vals[a] < vals[b];
    return dominant[static_cast<std::size_t>(a)] < dominant[static_cast<std::size_t>(b)];
  });

  out.values.resize(n);
  out.basis.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = order[static_cast<std::size_t>(k)];
    out.values[k] = vals[src];
    out.basis.col(k) = vecs.col(src);
  }
  return out;
}

EigenSystem eigensystem(const FramedOperator& a) { return eigensystem(a.block()); }

FramedOperator apply_function(const FramedOperator& a, const EigenSystem& sys, const ScalarMap& f) {
  return FramedOperator(sys.compose(f), map_points(a.essential_points(), f));
}

FramedOperator apply_function(const FramedOperator& a, const ScalarMap& f) {
  return apply_function(a, eigensystem(a), f);
}

bool Interval::contains(double x) const noexcept {
  const bool above = lo_closed ? x >= lo : x > lo;
  const bool below = hi_closed ? x <= hi : x < hi;
  return above && below;
}

FramedOperator spectral_projection(const FramedOperator& a, const EigenSystem& sys,
                                   const Interval& interval) {
  const auto indicator = [&](double x) { return interval.contains(x) ? 1.0 : 0.0; };
  return FramedOperator(sys.compose(indicator), map_points(a.essential_points(), indicator));
}

FramedOperator spectral_projection(const FramedOperator& a, const Interval& interval) {
  return spectral_projection(a, eigensystem(a), interval);
}

bool is_tau_finite(const FramedOperator& projection) {
  const auto& ess = projection.essential_points();
  return std::none_of(ess.begin(), ess.end(), [](double e) { return std::abs(e) > 0.5; });
}

FramedOperator phase(const FramedOperator& a) {
  return apply_function(a, [](double x) { return x >= 0.0 ? 1.0 : -1.0; });
}

double op_norm(const FramedOperator& a) {
  double norm = hermitian_norm(a.block());
  for (double e : a.essential_points()) norm = std::max(norm, std::abs(e));
  return norm;
}

TraceFunctionals trace_functionals(const FramedOperator& a) {
  for (double e : a.essential_points()) {
    if (std::abs(e) > 1e-12) {
      std::ostringstream msg;
      msg << "not trace-class in the framed model: essential point " << e;
      throw NotTraceClass(msg.str());
    }
  }
  TraceFunctionals out;
  if (a.dim() == 0) return out;
  const RealVector vals = eigensystem(a).values;
  // Fixed-order sums so repeated calls are bit-identical.
  for (Eigen::Index i = 0; i < vals.size(); ++i) {
    out.trace += vals[i];
    out.trace_norm += std::abs(vals[i]);
  }
  out.op_norm = op_norm(a);
  return out;
}

EssentialData essential_data(const FramedOperator& a) {
  const auto& ess = a.essential_points();
  if (ess.empty()) throw NoCalkinModel("essential_data: operator has no essential points");
  EssentialData out;
  out.delta_f = std::numeric_limits<double>::infinity();
  for (double e : ess) {
    out.delta_f = std::min(out.delta_f, std::abs(e));
    out.essential_norm = std::max(out.essential_norm, std::abs(e));
  }
  out.is_fredholm = out.delta_f > 0.0;
  out.in_f_pm1 = ess.size() == 2 && std::abs(ess[0] + 1.0) <= 1e-12 &&
                 std::abs(ess[1] - 1.0) <= 1e-12 && op_norm(a) <= 1.0 + 1e-12;
  return out;
}

double operator_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()[0];
}

double hermitian_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
  const RealVector& v = solver.eigenvalues();
  return std::max(std::abs(v[0]), std::abs(v[v.size() - 1]));
}

double framed_distance(const FramedOperator& a, const FramedOperator& b) {
  if (a.dim() != b.dim()) throw InvalidPair("framed_distance: dimension mismatch");
  double d = hermitian_norm(a.block() - b.block());
  const auto& ea = a.essential_points();
  const auto& eb = b.essential_points();
  if (ea.empty() != eb.empty()) return std::numeric_limits<double>::infinity();
  const auto directed = [](const std::vector<double>& x, const std::vector<double>& y) {
    double worst = 0.0;
    for (double p : x) {
      double best = std::numeric_limits<double>::infinity();
      for (double q : y) best = std::min(best, std::abs(p - q));
      worst = std::max(worst, best);
    }
    return worst;
  };
  d = std::max(d, std::max(directed(ea, eb), directed(eb, ea)));
  return d;
}

}  // namespace specflow

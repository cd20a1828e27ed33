#include "specflow/paths.hpp"

#include "specflow/doi.hpp"
#include "specflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <sstream>

namespace specflow {

namespace random {

Matrix complex_matrix(Engine& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double re = normal(rng);
      const double im = normal(rng);
      m(i, j) = Complex(re, im);
    }
  }
  return m;
}

Matrix hermitian(Engine& rng, Eigen::Index n, double scale) {
  const Matrix g = complex_matrix(rng, n, n);
  Matrix h = 0.5 * (g + g.adjoint());
  const double norm = hermitian_norm(h);
  if (norm > 0.0) h *= scale / norm;
  return h;
}

Matrix unitary(Engine& rng, Eigen::Index n) {
  const Matrix g = complex_matrix(rng, n, n);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  // Fix the phases so the distribution is Haar.
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < n; ++j) {
    const Complex d = r(j, j);
    if (std::abs(d) > 0.0) q.col(j) *= d / std::abs(d);
  }
  return q;
}

Matrix with_spectrum(Engine& rng, const RealVector& eigenvalues) {
  const Matrix u = unitary(rng, eigenvalues.size());
  Matrix m = u * eigenvalues.cast<Complex>().asDiagonal() * u.adjoint();
  return 0.5 * (m + m.adjoint());
}

}  // namespace random

namespace {

constexpr int kValidationGrid = 33;

void require_unit_interval(double t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    std::ostringstream msg;
    msg << "path parameter t = " << t << " outside [0, 1]";
    throw InvalidInput(msg.str());
  }
}

// Interval [lo, hi] of the smooth piece that `side` selects at t.
std::pair<double, double> segment_for(const std::vector<double>& knots, double t, Side side) {
  for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
    const double lo = knots[k];
    const double hi = knots[k + 1];
    const bool inside = side == Side::right ? (t >= lo && t < hi) : (t > lo && t <= hi);
    if (inside) return {lo, hi};
  }
  return side == Side::right ? std::pair{knots[knots.size() - 2], knots.back()}
                             : std::pair{knots[0], knots[1]};
}

}  // namespace

OperatorPath::OperatorPath(Evaluator evaluator, std::optional<Derivative> derivative,
                           std::vector<double> breakpoints, PathKind kind, Options options)
    : evaluator_(std::move(evaluator)),
      derivative_(std::move(derivative)),
      kind_(kind),
      options_(options) {
  if (!evaluator_) throw InvalidInput("OperatorPath: missing evaluator");
  if (!(options_.eta > 0.0 && options_.eta < 0.25)) throw InvalidInput("OperatorPath: eta out of range");
  std::sort(breakpoints.begin(), breakpoints.end());
  for (double b : breakpoints) {
    if (b > 0.0 && b < 1.0 && (breakpoints_.empty() || b > breakpoints_.back())) breakpoints_.push_back(b);
  }

  const FramedOperator start = evaluator_(0.0);
  dim_ = start.dim();
  essential_points_ = start.essential_points();
  if (!options_.validate) return;

  const double scale = 1.0 + hermitian_norm(start.block());
  for (int i = 0; i < kValidationGrid; ++i) {
    const double t = static_cast<double>(i) / (kValidationGrid - 1);
    const FramedOperator f = evaluator_(t);
    if (f.dim() != dim_ || !same_essential_points(f, start)) {
      std::ostringstream msg;
      msg << "OperatorPath: dimension or essential points change at t = " << t;
      throw InvalidInput(msg.str());
    }
    const double dir = t < 1.0 ? 1.0 : -1.0;
    const double d_coarse = framed_distance(f, evaluator_(t + dir * 1e-6));
    const double d_fine = framed_distance(f, evaluator_(t + dir * 1e-7));
    if (d_fine > 0.5 * d_coarse + 1e-9 * scale) {
      std::ostringstream msg;
      msg << "OperatorPath: evaluator is not norm continuous near t = " << t << " (" << d_coarse
          << " at 1e-6, " << d_fine << " at 1e-7)";
      throw InvalidInput(msg.str());
    }
  }
}

FramedOperator OperatorPath::at(double t) const {
  require_unit_interval(t);
  return evaluator_(t);
}

std::vector<double> OperatorPath::knots() const {
  std::vector<double> out;
  out.reserve(breakpoints_.size() + 2);
  out.push_back(0.0);
  out.insert(out.end(), breakpoints_.begin(), breakpoints_.end());
  out.push_back(1.0);
  return out;
}

Matrix OperatorPath::central_difference(double t, Side side) const {
  const auto [lo, hi] = segment_for(knots(), t, side);
  const double eta = std::min(options_.eta, 0.25 * (hi - lo));
  if (t - eta >= lo && t + eta <= hi) {
    return (evaluator_(t + eta).block() - evaluator_(t - eta).block()) / (2.0 * eta);
  }
  // Second-order one-sided stencil pointing into the segment.
  const double dir = (t - eta < lo) ? 1.0 : -1.0;
  const Matrix f0 = evaluator_(t).block();
  const Matrix f1 = evaluator_(t + dir * eta).block();
  const Matrix f2 = evaluator_(t + dir * 2.0 * eta).block();
  return dir * (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * eta);
}

Matrix OperatorPath::derivative(double t, Side side) const {
  require_unit_interval(t);
  if (derivative_) return (*derivative_)(t, side);
  return central_difference(t, side);
}

SpectralSample OperatorPath::spectral_sample(double t, Side side) const {
  require_unit_interval(t);
  if (spectral_) return (*spectral_)(t, side);
  return {eigensystem(evaluator_(t)), derivative(t, side)};
}

OperatorPath OperatorPath::with_spectral_sampler(SpectralSampler sampler) const {
  OperatorPath out = *this;
  out.spectral_ = std::move(sampler);
  return out;
}

PathSample OperatorPath::sample(double t, Side side) const {
  require_unit_interval(t);
  PathSample s{evaluator_(t), derivative(t, side), false};
  s.one_sided = std::binary_search(breakpoints_.begin(), breakpoints_.end(), t);
  return s;
}

OperatorPath make_line_path(const FramedOperator& f0, const FramedOperator& f1, PathKind kind) {
  if (f0.dim() != f1.dim() || !same_essential_points(f0, f1)) {
    throw InvalidPair("make_line_path: endpoints differ in dimension or essential points");
  }
  const Matrix delta = f1.block() - f0.block();
  return OperatorPath(
      [f0, f1](double t) {
        if (t == 0.0) return f0;
        if (t == 1.0) return f1;
        return FramedOperator((1.0 - t) * f0.block() + t * f1.block(), f0.essential_points());
      },
      [delta](double, Side) { return delta; }, {}, kind, {.eta = 1e-5, .validate = false});
}

OperatorPath make_polynomial_path(std::vector<Matrix> coefficients, std::vector<double> essential_points,
                                  PathKind kind) {
  if (coefficients.empty()) throw InvalidInput("make_polynomial_path: no coefficients");
  const Eigen::Index n = coefficients.front().rows();
  for (const auto& c : coefficients) {
    if (c.rows() != n || c.cols() != n) throw InvalidInput("make_polynomial_path: coefficient shapes differ");
  }
  auto coeffs = std::make_shared<const std::vector<Matrix>>(std::move(coefficients));
  auto ess = normalize_essential_points(std::move(essential_points));
  return OperatorPath(
      [coeffs, ess](double t) {
        // Horner
        Matrix acc = coeffs->back();
        for (auto it = coeffs->rbegin() + 1; it != coeffs->rend(); ++it) acc = acc * t + *it;
        return FramedOperator(std::move(acc), ess);
      },
      [coeffs](double t, Side) {
        const auto& c = *coeffs;
        const Eigen::Index n = c.front().rows();
        Matrix acc = Matrix::Zero(n, n);
        for (std::size_t k = c.size() - 1; k >= 1; --k) acc = acc * t + static_cast<double>(k) * c[k];
        return acc;
      },
      {}, kind, {.eta = 1e-5, .validate = false});
}

OperatorPath concatenate(const std::vector<OperatorPath>& pieces) {
  if (pieces.empty()) throw InvalidInput("concatenate: no pieces");
  for (const auto& p : pieces) {
    if (p.dim() != pieces.front().dim() || p.essential_points() != pieces.front().essential_points() ||
        p.kind() != pieces.front().kind()) {
      throw InvalidPair("concatenate: pieces differ in dimension, essential points or kind");
    }
  }
  auto parts = std::make_shared<const std::vector<OperatorPath>>(pieces);
  const double count = static_cast<double>(pieces.size());
  const auto locate = [parts, count](double t, Side side) {
    const auto k_max = static_cast<long>(parts->size()) - 1;
    const double scaled = t * count;
    long k = static_cast<long>(std::floor(scaled));
    if (side == Side::left && scaled == std::floor(scaled)) k -= 1;
    k = std::clamp(k, 0L, k_max);
    const double local = std::clamp(scaled - static_cast<double>(k), 0.0, 1.0);
    return std::pair{static_cast<std::size_t>(k), local};
  };

  std::vector<double> breaks;
  for (std::size_t k = 0; k < pieces.size(); ++k) {
    if (k > 0) breaks.push_back(static_cast<double>(k) / count);
    for (double b : pieces[k].breakpoints()) breaks.push_back((static_cast<double>(k) + b) / count);
  }

  // Derivatives always come from the pieces so breakpoints inside them are honored.
  OperatorPath::Derivative derivative = [parts, locate, count](double t, Side side) {
    const auto [k, local] = locate(t, side);
    return Matrix(count * (*parts)[k].derivative(local, side));
  };
  return OperatorPath(
      [parts, locate](double t) {
        const auto [k, local] = locate(t, Side::right);
        return (*parts)[k].at(local);
      },
      std::move(derivative), std::move(breaks), pieces.front().kind(), {.eta = 1e-5, .validate = false});
}

OperatorPath reversed(const OperatorPath& path) {
  std::vector<double> breaks;
  for (double b : path.breakpoints()) breaks.push_back(1.0 - b);
  return OperatorPath([path](double t) { return path.at(1.0 - t); },
                      [path](double t, Side side) {
                        const Side flipped = side == Side::right ? Side::left : Side::right;
                        return Matrix(-path.derivative(1.0 - t, flipped));
                      },
                      std::move(breaks), path.kind(), {.eta = path.eta(), .validate = false});
}

OperatorPath make_phase_rectangle_loop(const FramedOperator& f0, const FramedOperator& f1,
                                       const OperatorPath& bridge) {
  for (const auto* f : {&f0, &f1}) {
    if (!f->framed() || !essential_data(*f).in_f_pm1) {
      throw InvalidInput("make_phase_rectangle_loop: corner is not in F*^{+-1}");
    }
  }
  const FramedOperator start = bridge.at(0.0);
  const FramedOperator end = bridge.at(1.0);
  const auto close = [](const FramedOperator& a, const FramedOperator& b) {
    return a.dim() == b.dim() && same_essential_points(a, b) &&
           hermitian_norm(a.block() - b.block()) <= 1e-12 * (1.0 + hermitian_norm(b.block()));
  };
  if (!close(start, f0) || !close(end, f1)) {
    throw InvalidPair("make_phase_rectangle_loop: bridge does not run from F0 to F1");
  }
  const FramedOperator b0 = phase(start);
  const FramedOperator b1 = phase(end);
  // The last leg ends at the bridge's own start point so the loop closes bit-exactly.
  return concatenate({bridge, make_line_path(end, b1), make_line_path(b1, b0), make_line_path(b0, start)});
}

OperatorPath make_trig_path(const TrigPathSpec& spec) {
  if (spec.n < 1 || spec.harmonics < 0 || !(spec.amplitude >= 0.0) || spec.max_tries < 1) {
    throw InvalidInput("make_trig_path: invalid parameters");
  }
  const Eigen::Index n = spec.n;
  random::Engine rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  struct Coefficients {
    Matrix base;
    std::vector<Matrix> cos_terms, sin_terms;
    RealVector drift;
  };

  const auto evaluate = [](const Coefficients& c, double t) {
    Matrix m = c.base;
    for (std::size_t k = 0; k < c.cos_terms.size(); ++k) {
      // Reduce k t mod 1 first so t = 1 reproduces t = 0 exactly.
      const double kt = static_cast<double>(k + 1) * t;
      const double angle = 2.0 * std::numbers::pi * (kt - std::floor(kt));
      m += std::cos(angle) * c.cos_terms[k] + std::sin(angle) * c.sin_terms[k];
    }
    if (c.drift.size()) m += ((2.0 * t - 1.0) * c.drift).cast<Complex>().asDiagonal();
    return m;
  };

  for (int attempt = 0; attempt < spec.max_tries; ++attempt) {
    auto c = std::make_shared<Coefficients>();
    RealVector eig(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double mag = spec.base_gap + (spec.base_radius - spec.base_gap) * unit(rng);
      eig[i] = unit(rng) < 0.5 ? -mag : mag;
    }
    c->base = random::with_spectrum(rng, eig);
    const double piece = spec.harmonics > 0 ? spec.amplitude / (2.0 * spec.harmonics) : 0.0;
    for (int k = 0; k < spec.harmonics; ++k) {
      c->cos_terms.push_back(random::hermitian(rng, n, piece));
      c->sin_terms.push_back(random::hermitian(rng, n, piece));
    }
    if (spec.drift > 0.0) {
      c->drift.resize(n);
      for (Eigen::Index i = 0; i < n; ++i) c->drift[i] = spec.drift * (2.0 * unit(rng) - 1.0);
    }

    bool ok = true;
    for (int i = 0; i <= 256 && ok; ++i) {
      const double t = i / 256.0;
      ok = hermitian_norm(evaluate(*c, t)) <= 1.0 - spec.margin;
    }
    if (!ok) continue;

    const auto ess = spec.essential_points;
    OperatorPath::Derivative derivative = [c](double t, Side) {
      Matrix d = Matrix::Zero(c->base.rows(), c->base.cols());
      for (std::size_t k = 0; k < c->cos_terms.size(); ++k) {
        const double freq = 2.0 * std::numbers::pi * static_cast<double>(k + 1);
        const double kt = static_cast<double>(k + 1) * t;
        const double angle = 2.0 * std::numbers::pi * (kt - std::floor(kt));
        d += freq * (-std::sin(angle) * c->cos_terms[k] + std::cos(angle) * c->sin_terms[k]);
      }
      if (c->drift.size()) d += (2.0 * c->drift).cast<Complex>().asDiagonal();
      return d;
    };
    return OperatorPath([c, ess, evaluate](double t) { return FramedOperator(evaluate(*c, t), ess); },
                        std::move(derivative), {}, PathKind::bounded, {.eta = 1e-5, .validate = false});
  }
  std::ostringstream msg;
  msg << "make_trig_path: no admissible sample after " << spec.max_tries << " tries (seed " << spec.seed
      << ")";
  throw GeneratorError(msg.str());
}

OperatorPath make_trig_loop(std::uint64_t seed, int n, double amplitude, int harmonics) {
  TrigPathSpec spec;
  spec.seed = seed;
  spec.n = n;
  spec.amplitude = amplitude;
  spec.harmonics = harmonics;
  return make_trig_path(spec);
}

OperatorPath make_quadratic_dpath(const QuadraticPathSpec& spec) {
  if (spec.n < 1 || !(spec.headroom >= 0.0) || !(spec.spread >= 0.0) || !(spec.curvature >= 0.0)) {
    throw InvalidInput("make_quadratic_dpath: invalid parameters");
  }
  random::Engine rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto endpoint = [&] {
    RealVector eig(spec.n);
    for (Eigen::Index i = 0; i < eig.size(); ++i) {
      const double mag = spec.headroom + spec.spread * unit(rng);
      eig[i] = unit(rng) < 0.5 ? -mag : mag;
    }
    return random::with_spectrum(rng, eig);
  };
  const Matrix d0 = endpoint();
  const Matrix d1 = endpoint();
  const Matrix w = random::hermitian(rng, spec.n, spec.curvature);
  const Matrix v = d1 - d0 - w;
  return make_polynomial_path({d0, v, w}, {}, PathKind::unbounded_model);
}

OperatorPath vartheta_path(const OperatorPath& dpath) {
  const std::vector<double> ess{-1.0, 1.0};
  return OperatorPath(
      [dpath, ess](double t) {
        const EigenSystem sys = eigensystem(dpath.at(t));
        return FramedOperator(sys.compose([](double x) { return vartheta(x); }), ess);
      },
      [dpath](double t, Side side) {
        const PathSample s = dpath.sample(t, side);
        return vartheta_derivative(s.F, s.Fdot);
      },
      dpath.breakpoints(), PathKind::bounded, {.eta = dpath.eta(), .validate = false})
      .with_spectral_sampler([dpath](double t, Side side) {
        // vartheta is increasing, so the eigenbasis of D_t serves F_t in the same order.
        SpectralSample s = dpath.spectral_sample(t, side);
        s.Fdot = vartheta_derivative(s.system, s.Fdot);
        s.system.values = s.system.values.unaryExpr([](double x) { return vartheta(x); });
        return s;
      });
}

double gamma_derivative_residual(const OperatorPath& dpath, double t0, double t) {
  if (t == t0) throw InvalidInput("gamma_derivative_residual: t must differ from t0");
  const FramedOperator d0 = dpath.at(t0);
  const Matrix ddot = dpath.derivative(t0, t > t0 ? Side::right : Side::left);
  const Matrix quotient = (dpath.at(t).block() - d0.block()) / (t - t0);
  const Matrix resolvent = eigensystem(d0).compose([](double x) { return 1.0 / std::sqrt(1.0 + x * x); });
  return operator_norm((quotient - ddot) * resolvent);
}

double arc_length(const OperatorPath& path, int samples) {
  if (samples < 2) throw InvalidInput("arc_length: need at least 2 samples");
  const auto knots = path.knots();
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
    const double lo = knots[k];
    const double hi = knots[k + 1];
    const double h = (hi - lo) / (samples - 1);
    for (int i = 0; i < samples; ++i) {
      const double t = i + 1 == samples ? hi : lo + i * h;
      const Side side = i + 1 == samples ? Side::left : Side::right;
      const double w = (i == 0 || i + 1 == samples) ? 0.5 : 1.0;
      total += w * h * hermitian_norm(path.derivative(t, side));
    }
  }
  return total;
}

double path_delta(const OperatorPath& path) {
  const auto& ess = path.essential_points();
  if (ess.empty()) throw NoCalkinModel("path has no essential points");
  double delta = std::abs(ess.front());
  for (double e : ess) delta = std::min(delta, std::abs(e));
  return delta;
}

}  // namespace specflow

#include "specflow/spectral_flow.hpp"

#include "specflow/doi.hpp"
#include "specflow/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

namespace specflow {

namespace {

constexpr double kSupportMargin = 1e-6;

long count_nonnegative(const RealVector& values) {
  return std::count_if(values.begin(), values.end(), [](double x) { return x >= 0.0; });
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

std::vector<double> initial_grid(const OperatorPath& path, int grid) {
  if (grid < 2) throw InvalidInput("grid must have at least 2 points");
  std::vector<double> pts;
  for (int i = 0; i < grid; ++i) pts.push_back(static_cast<double>(i) / (grid - 1));
  for (double b : path.breakpoints()) pts.push_back(b);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

// Evaluator of the bounded transform used by the partition estimator.
OperatorPath::Evaluator bounded_evaluator(const OperatorPath& path) {
  if (path.kind() == PathKind::bounded) return [path](double t) { return path.at(t); };
  return [path](double t) {
    return FramedOperator(eigensystem(path.at(t)).compose([](double x) { return vartheta(x); }),
                          {-1.0, 1.0});
  };
}

void require_fredholm(const FramedOperator& f) {
  if (!f.framed()) throw NoCalkinModel("path operator has no essential points");
  if (!essential_data(f).is_fredholm) throw InvalidInput("path operator is not Fredholm (0 is essential)");
}

void finish(SFReport& r) {
  r.total = r.integral_value + r.boundary_term;
  r.rounded_total = std::lround(r.total);
  r.integer_defect = std::abs(r.total - static_cast<double>(r.rounded_total));
}

}  // namespace

long relative_index(const FramedOperator& p, const FramedOperator& q) {
  if (p.dim() != q.dim()) throw InvalidPair("relative_index: dimension mismatch");
  for (const auto* x : {&p, &q}) {
    const Matrix& b = x->block();
    const double err = b.size() ? (b * b - b).cwiseAbs().maxCoeff() : 0.0;
    if (err > 1e-8) throw InvalidInput("relative_index: argument is not a projection");
    for (double e : x->essential_points()) {
      if (std::abs(e) > 1e-8 && std::abs(e - 1.0) > 1e-8) {
        throw InvalidInput("relative_index: essential part is not a projection");
      }
    }
  }
  if (!same_essential_points(p, q)) throw InvalidPair("relative_index: essential parts differ");
  const double diff = q.block().trace().real() - p.block().trace().real();
  const double rounded = std::round(diff);
  if (std::abs(diff - rounded) > 1e-6) {
    std::ostringstream msg;
    msg << "relative_index: trace difference " << diff << " is not an integer";
    throw ModelViolation(msg.str());
  }
  return static_cast<long>(rounded);
}

long sf_partition(const OperatorPath& path, int grid, const PartitionOptions& options) {
  const auto eval = bounded_evaluator(path);
  std::vector<double> ts = initial_grid(path, grid);

  struct Node {
    double t;
    FramedOperator f;
  };
  std::vector<Node> nodes;
  for (double t : ts) nodes.push_back({t, eval(t)});
  require_fredholm(nodes.front().f);
  const double delta = essential_data(nodes.front().f).delta_f;

  // Refine until consecutive samples are within delta / 2 in norm.
  std::vector<Node> refined{nodes.front()};
  std::vector<Node> pending(nodes.rbegin(), nodes.rend() - 1);
  while (!pending.empty()) {
    Node next = pending.back();
    const Node& prev = refined.back();
    if (framed_distance(prev.f, next.f) < 0.5 * delta) {
      refined.push_back(std::move(next));
      pending.pop_back();
      continue;
    }
    if (static_cast<long>(refined.size() + pending.size()) >= options.max_points ||
        next.t - prev.t < 1e-14) {
      std::ostringstream msg;
      msg << "sf_partition: refinement cap of " << options.max_points << " points exceeded near t = " << prev.t;
      throw PathTooWild(msg.str());
    }
    const double mid = 0.5 * (prev.t + next.t);
    pending.push_back({mid, eval(mid)});
  }

  const auto positive_part = [](const FramedOperator& f) {
    return spectral_projection(f, Interval::at_least(0.0));
  };
  std::vector<FramedOperator> projections;
  projections.reserve(refined.size());
  for (const auto& n : refined) projections.push_back(positive_part(n.f));

  long sf = 0;
  for (std::size_t i = 1; i < projections.size(); ++i) {
    // The Calkin images chi(pi(F_t)) must agree for consecutive partition points.
    if (projections[i].essential_points() != projections[i - 1].essential_points()) {
      throw ModelViolation("sf_partition: Calkin images of consecutive projections differ");
    }
    sf += relative_index(projections[i - 1], projections[i]);
  }

  // Independence of the partition: one doubling.
  if (static_cast<long>(2 * refined.size() - 1) <= options.max_points) {
    long doubled = 0;
    for (std::size_t i = 1; i < refined.size(); ++i) {
      const FramedOperator mid = positive_part(eval(0.5 * (refined[i - 1].t + refined[i].t)));
      doubled += relative_index(projections[i - 1], mid) + relative_index(mid, projections[i]);
    }
    if (doubled != sf) {
      std::ostringstream msg;
      msg << "sf_partition: doubling the partition changed the sum from " << sf << " to " << doubled;
      throw ModelViolation(msg.str());
    }
  }
  const long telescoped = relative_index(projections.front(), projections.back());
  if (telescoped != sf) throw ModelViolation("sf_partition: partition sum differs from telescoped index");
  return sf;
}

CrossingTally crossing_events(const OperatorPath& path, int grid, const CrossingOptions& options) {
  const std::vector<double> ts = initial_grid(path, grid);
  const auto values_at = [&](double t) { return eigensystem(path.at(t)).values; };

  CrossingTally tally;
  std::vector<RealVector> values;
  values.reserve(ts.size());
  for (double t : ts) values.push_back(values_at(t));

  // Recursively resolves one grid interval.
  struct Frame {
    double a, b;
    RealVector va, vb;
    int depth;
  };
  for (std::size_t i = 1; i < ts.size(); ++i) {
    std::vector<Frame> stack{{ts[i - 1], ts[i], values[i - 1], values[i], 0}};
    while (!stack.empty()) {
      Frame fr = std::move(stack.back());
      stack.pop_back();
      bool split = false;
      if (options.resolve_touches && fr.depth < options.max_depth) {
        // Weyl: each sorted branch moves at most L |b - a| on the interval.
        const double speed = std::max(hermitian_norm(path.derivative(fr.a, Side::right)),
                                      hermitian_norm(path.derivative(fr.b, Side::left)));
        const double reach = 1.5 * speed * (fr.b - fr.a);
        for (Eigen::Index k = 0; k < fr.va.size() && !split; ++k) {
          const bool same_sign = (fr.va[k] >= 0.0) == (fr.vb[k] >= 0.0);
          split = same_sign && std::abs(fr.va[k]) + std::abs(fr.vb[k]) < reach;
        }
      }
      if (split) {
        const double mid = 0.5 * (fr.a + fr.b);
        RealVector vm = values_at(mid);
        stack.push_back({mid, fr.b, vm, fr.vb, fr.depth + 1});
        stack.push_back({fr.a, mid, fr.va, std::move(vm), fr.depth + 1});
        continue;
      }
      for (Eigen::Index k = 0; k < fr.va.size(); ++k) {
        const bool before = fr.va[k] >= 0.0;
        const bool after = fr.vb[k] >= 0.0;
        if (before == after) continue;
        const int direction = after ? 1 : -1;
        tally.sf += direction;
        double lo = fr.a;
        double hi = fr.b;
        if (options.locate) {
          while (hi - lo > options.t_tolerance) {
            const double mid = 0.5 * (lo + hi);
            if ((values_at(mid)[k] >= 0.0) == before) {
              lo = mid;
            } else {
              hi = mid;
            }
          }
        }
        tally.events.push_back({0.5 * (lo + hi), k, direction});
      }
    }
  }

  const long endpoint = count_nonnegative(values.back()) - count_nonnegative(values.front());
  if (endpoint != tally.sf) {
    std::ostringstream msg;
    msg << "crossing tally " << tally.sf << " disagrees with endpoint count " << endpoint
        << "; refine the grid";
    throw DegenerateCrossing(msg.str());
  }
  std::stable_sort(tally.events.begin(), tally.events.end(),
                   [](const CrossingEvent& x, const CrossingEvent& y) { return x.t < y.t; });
  return tally;
}

long sf_crossing(const OperatorPath& path, int grid) { return crossing_events(path, grid).sf; }

QuadResult path_integral(const OperatorPath& path, const SpectralWeight& w, double quad_tol,
                         const QuadOptions& quad) {
  if (!(quad_tol > 0.0)) throw InvalidInput("quad_tol must be positive");
  const auto knots = path.knots();
  QuadResult total;
  CompensatedSum value;
  CompensatedSum error;
  for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
    const double lo = knots[k];
    const double hi = knots[k + 1];
    const auto integrand = [&](double t) {
      // At the segment's right end take the derivative from the left.
      const Side side = t >= hi ? Side::left : Side::right;
      const SpectralSample sample = path.spectral_sample(t, side);
      const EigenSystem& sys = sample.system;
      const Matrix& fdot = sample.Fdot;
      // Only eigenvectors inside the support of h contribute.
      std::vector<Eigen::Index> active;
      std::vector<double> weights;
      for (Eigen::Index i = 0; i < sys.dim(); ++i) {
        const double h = w.density(sys.values[i]);
        if (h == 0.0) continue;
        active.push_back(i);
        weights.push_back(h);
      }
      if (active.empty()) return 0.0;
      const Matrix u = sys.basis(Eigen::all, active);
      // Diagonal of U^* Fdot U, column by column.
      const Eigen::VectorXd diag = (u.conjugate().cwiseProduct(fdot * u)).colwise().sum().real();
      double acc = 0.0;
      for (std::size_t k = 0; k < active.size(); ++k) acc += weights[k] * diag[static_cast<Eigen::Index>(k)];
      return acc;
    };
    const QuadResult part = integrate_adaptive(integrand, lo, hi, quad_tol * (hi - lo), quad);
    value.add(part.value);
    error.add(part.error_estimate);
    total.evaluations += part.evaluations;
  }
  total.value = value.value();
  total.error_estimate = error.value();
  return total;
}

SFReport sf_integral_bounded(const OperatorPath& path, const SpectralWeight& w, double quad_tol,
                             const SFOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  if (path.kind() != PathKind::bounded) throw InvalidInput("sf_integral_bounded: path is not bounded");
  const FramedOperator f0 = path.at(0.0);
  const FramedOperator f1 = path.at(1.0);
  require_fredholm(f0);
  const double delta = path_delta(path);
  const double limit = delta * (1.0 - kSupportMargin);
  if (!w.compact() || w.support_lo() < -limit || w.support_hi() > limit) {
    std::ostringstream msg;
    msg << "sf_integral_bounded: support of " << w.describe() << " is not inside [-" << limit << ", " << limit
        << "] (delta = " << delta << ")";
    throw HypothesisViolation(msg.str());
  }

  SFReport r;
  const QuadResult q = path_integral(path, w, quad_tol, options.quad);
  r.integral_value = q.value;
  r.quadrature_error_estimate = q.error_estimate;
  r.boundary_term = boundary_term(w, f0, f1);
  finish(r);
  if (options.discrete_estimators) {
    r.sf_partition = sf_partition(path, options.grid);
    r.sf_crossing = sf_crossing(path, options.grid);
  }
  r.wall_time = elapsed_ms(start);
  return r;
}

SFReport sf_integral_unbounded(const OperatorPath& dpath, const SpectralWeight& w, double quad_tol,
                               const SFOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  if (dpath.kind() != PathKind::unbounded_model) {
    throw InvalidInput("sf_integral_unbounded: path is not an unbounded-model path");
  }
  if (w.kind() != WeightKind::gaussian && w.kind() != WeightKind::resolvent) {
    throw InvalidSpec("sf_integral_unbounded: weight " + w.describe() + " is not admissible");
  }
  SFReport r;
  const QuadResult q = path_integral(dpath, w, quad_tol, options.quad);
  r.integral_value = q.value;
  r.quadrature_error_estimate = q.error_estimate;
  r.boundary_term = boundary_term(w, dpath.at(0.0), dpath.at(1.0));
  finish(r);
  if (options.discrete_estimators) {
    r.sf_partition = sf_partition(dpath, options.grid);
    r.sf_crossing = sf_crossing(dpath, options.grid);
  }
  r.wall_time = elapsed_ms(start);
  return r;
}

double loop_integral(const OperatorPath& loop, const SpectralWeight& w, double quad_tol, const QuadOptions& quad) {
  const FramedOperator f0 = loop.at(0.0);
  const FramedOperator f1 = loop.at(1.0);
  if (f0.essential_points() != f1.essential_points() || f0.block() != f1.block()) {
    throw NotClosed("loop_integral: F_0 and F_1 differ");
  }
  if (loop.kind() == PathKind::bounded) {
    const double limit = path_delta(loop) * (1.0 - kSupportMargin);
    if (!w.compact() || w.support_lo() < -limit || w.support_hi() > limit) {
      throw HypothesisViolation("loop_integral: weight support exceeds the loop's delta");
    }
  }
  return path_integral(loop, w, quad_tol, quad).value;
}

double clamp_chi(double x) { return 0.5 * std::abs(x + 1.0) - 0.5 * std::abs(x - 1.0); }

FramedOperator retract(const FramedOperator& f, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw InvalidInput("retract: t outside [0, 1]");
  const EssentialData ed = essential_data(f);
  if (!ed.is_fredholm) throw InvalidInput("retract: operator is not Fredholm");
  if (t == 0.0) return f;

  const auto rescale = [&](double s) {
    const double factor = 1.0 / (1.0 - s + s * ed.delta_f);
    std::vector<double> ess;
    for (double e : f.essential_points()) ess.push_back(e * factor);
    return FramedOperator(f.block() * factor, std::move(ess));
  };
  if (t <= 0.5) return rescale(2.0 * t);

  const FramedOperator g = ed.delta_f == 1.0 ? f : rescale(1.0);
  const double s = 2.0 * t - 1.0;
  // chi is the identity on [-1, 1].
  if (op_norm(g) <= 1.0) return g;
  const FramedOperator clamped = apply_function(g, clamp_chi);
  std::vector<double> ess;
  for (double e : g.essential_points()) ess.push_back((1.0 - s) * e + s * clamp_chi(e));
  return FramedOperator((1.0 - s) * g.block() + s * clamped.block(), std::move(ess));
}

}  // namespace specflow

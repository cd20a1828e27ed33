#include "specflow/acceptance.hpp"

#include "specflow/doi.hpp"
#include "specflow/errors.hpp"
#include "specflow/paths.hpp"
#include "specflow/spectral_flow.hpp"
#include "specflow/weights.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <thread>

namespace specflow {

namespace {

const std::vector<double> kPm1{-1.0, 1.0};

struct Outcome {
  static constexpr int kShown = 5;

  bool pass = true;
  int failures = 0;
  std::ostringstream detail;

  void fail(const std::string& why) {
    if (pass) detail.str("");
    pass = false;
    if (++failures > kShown) return;
    if (failures > 1) detail << "; ";
    detail << why;
  }

  std::string text() const {
    if (failures <= kShown) return detail.str();
    return detail.str() + "; ... " + std::to_string(failures - kShown) + " more";
  }
};

using Check = std::function<void(Outcome&)>;

struct Criterion {
  CriterionInfo info;
  Check run;
};

std::string sci(double x) {
  std::ostringstream s;
  s << std::scientific << std::setprecision(2) << x;
  return s.str();
}

// 1. Four-way agreement on random framed paths with injected crossings.
void four_way_agreement(Outcome& out) {
  const auto start = std::chrono::steady_clock::now();
  const auto w = make_weight(BumpSpec{0.5, 2});
  const double tol = 1e-9;
  const int sizes[] = {2, 4, 8, 16};
  double worst = 0.0;
  long nonzero = 0;
  for (int i = 0; i < 100; ++i) {
    TrigPathSpec spec;
    spec.seed = 1000 + static_cast<std::uint64_t>(i);
    spec.n = sizes[i % 4];
    spec.amplitude = 0.15;
    spec.harmonics = 2;
    spec.base_radius = 0.35;
    spec.drift = 0.4;
    const auto path = make_trig_path(spec);
    SFOptions opts;
    opts.grid = 32;
    const auto r = sf_integral_bounded(path, w, tol, opts);
    worst = std::max(worst, r.integer_defect);
    if (r.sf_crossing != 0) ++nonzero;
    if (r.sf_partition != r.sf_crossing || r.rounded_total != r.sf_crossing || r.integer_defect >= 1e-6) {
      std::ostringstream msg;
      msg << "seed " << spec.seed << ": partition " << r.sf_partition << ", crossing " << r.sf_crossing << ", total "
          << r.total;
      out.fail(msg.str());
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (secs >= 60.0) out.fail("suite took " + std::to_string(secs) + " s");
  if (out.pass) out.detail << "100 paths, " << nonzero << " with nonzero sf, max defect " << sci(worst);
}

// 2. Scalar closed forms for every weight family.
void scalar_closed_forms(Outcome& out) {
  const auto framed = make_line_path(FramedOperator::diagonal({-1.0}, kPm1), FramedOperator::diagonal({1.0}, kPm1));
  const auto model = make_line_path(FramedOperator::diagonal({-1.0}), FramedOperator::diagonal({1.0}),
                                    PathKind::unbounded_model);
  std::vector<WeightSpec> specs{BumpSpec{0.5, 2}, GaussianSpec{0.25}, GaussianSpec{1.0}, GaussianSpec{4.0}};
  for (double p : {1.0, 2.0, 4.0}) {
    specs.push_back(ResolventSpec{p, ResolventVariant::half_shift});
    specs.push_back(ResolventSpec{p, ResolventVariant::classic});
  }
  double worst = 0.0;
  SFOptions opts;
  opts.discrete_estimators = false;
  for (const auto& spec : specs) {
    const auto w = make_weight(spec);
    for (const bool reverse : {false, true}) {
      const double expect = reverse ? -1.0 : 1.0;
      SFReport r;
      if (w.kind() == WeightKind::bump) {
        r = sf_integral_bounded(reverse ? reversed(framed) : framed, w, 1e-12, opts);
      } else {
        r = sf_integral_unbounded(reverse ? reversed(model) : model, w, 1e-12, opts);
      }
      worst = std::max(worst, std::abs(r.total - expect));
      if (!(std::abs(r.total - expect) <= 1e-9)) {
        std::ostringstream msg;
        msg << w.describe() << (reverse ? " reversed" : "") << ": total " << std::setprecision(12) << r.total;
        out.fail(msg.str());
      }
    }
  }
  if (out.pass) out.detail << specs.size() << " weights x 2 directions, max |total - sf| " << sci(worst);
}

// 3. Loop integrals vanish.
void loop_vanishing(Outcome& out) {
  const auto w = make_weight(BumpSpec{0.5, 2});
  const int sizes[] = {2, 4, 8};
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    TrigPathSpec spec;
    spec.seed = 3000 + static_cast<std::uint64_t>(i);
    spec.n = sizes[i % 3];
    spec.base_gap = 0.3;
    spec.base_radius = 0.7;
    spec.amplitude = 0.2;
    spec.harmonics = 3;
    const auto loop = make_trig_path(spec);
    const double value = loop_integral(loop, w, 1e-11);
    const double bound = 1e-8 * (1.0 + arc_length(loop));
    worst = std::max(worst, std::abs(value) / bound);
    if (!(std::abs(value) < bound)) out.fail("seed " + std::to_string(spec.seed) + ": |integral| = " + sci(value));
  }
  if (out.pass) out.detail << "50 loops, max |integral| / bound " << sci(worst);
}

// 4. Path independence between homotopic bridges.
void path_independence(Outcome& out) {
  const auto w = make_weight(BumpSpec{0.5, 2});
  SFOptions opts;
  opts.discrete_estimators = false;
  double worst = 0.0;
  for (int i = 0; i < 25; ++i) {
    random::Engine rng(4000 + static_cast<std::uint64_t>(i));
    const Eigen::Index n = 2 + i % 5;
    const FramedOperator f0(random::hermitian(rng, n, 0.9), kPm1);
    const FramedOperator f1(random::hermitian(rng, n, 0.9), kPm1);
    const Matrix bend = random::hermitian(rng, n, 0.5);
    const auto straight = make_line_path(f0, f1);
    // F_t = (1 - t) F0 + t F1 + sin(pi t) K
    const Matrix diff = f1.block() - f0.block();
    const OperatorPath bent(
        [f0, diff, bend](double t) {
          if (t == 0.0) return f0;
          return FramedOperator(f0.block() + t * diff + std::sin(std::numbers::pi * t) * bend, kPm1);
        },
        [diff, bend](double t, Side) { return Matrix(diff + std::numbers::pi * std::cos(std::numbers::pi * t) * bend); },
        {}, PathKind::bounded);
    const double a = sf_integral_bounded(straight, w, 1e-10, opts).total;
    const double b = sf_integral_bounded(bent, w, 1e-10, opts).total;
    worst = std::max(worst, std::abs(a - b));
    if (!(std::abs(a - b) <= 1e-7)) out.fail("pair " + std::to_string(i) + ": totals differ by " + sci(a - b));
  }
  if (out.pass) out.detail << "25 pairs, max difference " << sci(worst);
}

// 5. Unbounded formulas against crossing counts and the vartheta reduction.
void unbounded_reduction(Outcome& out) {
  const double eps = 1.0;
  const auto gauss = make_weight(GaussianSpec{eps});
  const auto resolvent = make_weight(ResolventSpec{2.0, ResolventVariant::half_shift});
  const auto classic = make_weight(ResolventSpec{3.0, ResolventVariant::classic});
  const auto bump = make_weight(BumpSpec{0.5, 2});
  SFOptions opts;
  opts.discrete_estimators = false;
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    QuadraticPathSpec spec;
    spec.seed = 5000 + static_cast<std::uint64_t>(i);
    spec.n = 64;
    spec.headroom = 4.0;
    const auto dpath = make_quadratic_dpath(spec);
    const double headroom = [&] {
      double h = std::numeric_limits<double>::infinity();
      for (double t : {0.0, 1.0}) {
        for (double x : eigensystem(dpath.at(t)).values) h = std::min(h, std::abs(x));
      }
      return h;
    }();
    const double allowance = 1e-6 + 64.0 * std::exp(-eps * headroom * headroom);
    const long sf = sf_crossing(dpath, 64);
    const double bounded = sf_integral_bounded(vartheta_path(dpath), bump, 1e-8, opts).total;
    for (const auto* w : {&gauss, &resolvent, &classic}) {
      const double total = sf_integral_unbounded(dpath, *w, 1e-8, opts).total;
      const double dev = std::max(std::abs(total - sf), std::abs(total - bounded));
      worst = std::max(worst, dev);
      if (!(dev <= allowance)) {
        std::ostringstream msg;
        msg << "seed " << spec.seed << " " << w->describe() << ": total " << total << ", crossings " << sf
            << ", bounded " << bounded;
        out.fail(msg.str());
      }
    }
  }
  if (out.pass) out.detail << "20 paths (n = 64), max deviation " << sci(worst);
}

// 6. f(A) - f(B) = T_{psi_f}(A - B).
void doi_identity(Outcome& out) {
  const std::vector<DifferentiableFunction> fs{functions::square(), functions::cube(), functions::vartheta(),
                                               functions::tanh()};
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    random::Engine rng(6000 + static_cast<std::uint64_t>(i));
    const Eigen::Index n = 2 + i % 11;
    const FramedOperator a(random::hermitian(rng, n, 2.0));
    const FramedOperator b(random::hermitian(rng, n, 2.0));
    const auto sa = eigensystem(a);
    const auto sb = eigensystem(b);
    for (const auto& f : fs) {
      const double scale = 1.0 + (sa.compose(f.value) - sb.compose(f.value)).norm();
      const double res = perturbation_residual(f, a, b);
      worst = std::max(worst, res / scale);
      if (!(res < 1e-10 * scale)) out.fail("pair " + std::to_string(i) + " f = " + f.name + ": " + sci(res));
    }
  }
  if (out.pass) out.detail << "50 pairs x 4 functions, max residual/scale " << sci(worst);
}

// 7. Finite-difference convergence order of the vartheta derivative.
void vartheta_derivative_order(Outcome& out) {
  double lowest = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 10; ++i) {
    random::Engine rng(7000 + static_cast<std::uint64_t>(i));
    const Eigen::Index n = 3 + i % 6;
    const Matrix d = random::hermitian(rng, n, 1.5);
    const Matrix v = random::hermitian(rng, n, 2.0);
    const Matrix exact = vartheta_derivative(FramedOperator(d), v);
    const auto vt = [](const Matrix& m) { return eigensystem(m).compose([](double x) { return vartheta(x); }); };
    std::vector<double> xs, ys;
    for (double h : {1e-2, 1e-3, 1e-4, 1e-5}) {
      const Matrix fd = (vt(d + h * v) - vt(d - h * v)) / (2.0 * h);
      xs.push_back(std::log10(h));
      ys.push_back(std::log10(operator_norm(fd - exact)));
    }
    const double mx = (xs[0] + xs[1] + xs[2] + xs[3]) / 4.0;
    const double my = (ys[0] + ys[1] + ys[2] + ys[3]) / 4.0;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      sxy += (xs[k] - mx) * (ys[k] - my);
      sxx += (xs[k] - mx) * (xs[k] - mx);
    }
    const double order = sxy / sxx;
    lowest = std::min(lowest, order);
    if (!(order >= 1.9)) out.fail("instance " + std::to_string(i) + ": order " + std::to_string(order));
  }
  if (out.pass) out.detail << "10 instances, lowest order " << std::fixed << std::setprecision(3) << lowest;
}

// 8. tr T_phi(V) = tr(f(D) V) for symmetric bump-derived kernels.
void trace_duality(Outcome& out) {
  const std::vector<SpectralWeight> ws{make_weight(BumpSpec{0.5, 2}), make_weight(BumpSpec{0.8, 3})};
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    random::Engine rng(8000 + static_cast<std::uint64_t>(i));
    const Eigen::Index n = 2 + i % 11;
    const auto& w = ws[i % 2];
    // psi_h alone, or multiplied by a symmetric smooth factor.
    DoiKernel k = DoiKernel::divided_difference(functions::density(w));
    if (i % 3 == 2) {
      k = k * DoiKernel::custom("cosh", [](double l, double m) { return std::cosh(l * m); }, true);
    }
    const FramedOperator d(random::hermitian(rng, n, 0.95), kPm1);
    const Matrix v = random::hermitian(rng, n, 1.0) + Complex(0, 1) * random::hermitian(rng, n, 1.0);
    const auto sys = eigensystem(d);
    double fd_trace_norm = 0.0;
    for (double x : sys.values) fd_trace_norm += std::abs(k(x, x));
    const double scale = 1.0 + operator_norm(v) * fd_trace_norm;
    const double res = trace_duality_residual(k, d, v);
    worst = std::max(worst, res / scale);
    if (!(res < 1e-10 * scale)) out.fail("instance " + std::to_string(i) + ": " + sci(res));
  }
  if (out.pass) out.detail << "50 instances, max residual/scale " << sci(worst);
}

// 9. ||B1^(1-theta) A B0^theta|| <= ||B1 A||^(1-theta) ||A B0||^theta.
void interpolation_bound(Outcome& out) {
  double worst = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 500; ++i) {
    random::Engine rng(9000 + static_cast<std::uint64_t>(i));
    const Eigen::Index n = 2 + i % 7;
    const double theta = 0.1 * (1 + i % 9);
    const Matrix a = random::complex_matrix(rng, n, n);
    const Matrix m0 = random::complex_matrix(rng, n, n);
    const Matrix m1 = random::complex_matrix(rng, n, n);
    // Alternate full-rank and rank-deficient positive operators.
    const Matrix b0 = i % 5 == 0 ? Matrix(m0.leftCols(1) * m0.leftCols(1).adjoint()) : Matrix(m0 * m0.adjoint());
    const Matrix b1 = m1 * m1.adjoint();
    const double rhs = std::pow(operator_norm(b1 * a), 1.0 - theta) * std::pow(operator_norm(a * b0), theta);
    const double gap = interpolation_gap(a, b0, b1, theta);
    worst = std::min(worst, gap / rhs);
    if (!(gap >= -1e-12 * rhs)) out.fail("triple " + std::to_string(i) + ": gap " + sci(gap));
  }
  if (out.pass) out.detail << "500 triples, min gap/RHS " << sci(worst);
}

// 10. Deformation retraction onto F*^{+-1}.
void retract_properties(Outcome& out) {
  double worst_ratio = 0.0;
  for (int i = 0; i < 50; ++i) {
    random::Engine rng(10000 + static_cast<std::uint64_t>(i));
    std::uniform_real_distribution<double> u(0.2, 3.0);
    const Eigen::Index n = 2 + i % 6;
    const std::string tag = "instance " + std::to_string(i);

    const FramedOperator inside(random::hermitian(rng, n, 0.99), kPm1);
    if (retract(inside, 1.0).block() != inside.block() || retract(inside, 1.0).essential_points() != kPm1) {
      out.fail(tag + ": retract(1, F) != F on F*^{+-1}");
    }
    if (retract(inside, 0.0).block() != inside.block()) out.fail(tag + ": retract(0, F) != F on F*^{+-1}");

    const FramedOperator f(random::hermitian(rng, n, 4.0), {-u(rng), u(rng)});
    const auto r0 = retract(f, 0.0);
    if (r0.block() != f.block() || r0.essential_points() != f.essential_points()) {
      out.fail(tag + ": retract(0, F) not bit-exact");
    }
    if (!essential_data(retract(f, 1.0)).in_f_pm1) out.fail(tag + ": retract(1, F) not in F*^{+-1}");

    // Lipschitz in t: on [0, 1/2] the rescaling moves at speed
    // 2 ||F|| |1 - delta| / min(1, delta)^2, on [1/2, 1] the segment G -> chi(G)
    // at speed 2 ||G - chi(G)||.
    const EssentialData ed = essential_data(f);
    const double norm_f = op_norm(f);
    const double c1 = 2.0 * norm_f * std::abs(1.0 - ed.delta_f) / std::pow(std::min(1.0, ed.delta_f), 2);
    const double c2 = 2.0 * std::max(0.0, norm_f / ed.delta_f - 1.0);
    const double lipschitz = std::max(c1, c2);
    double sampled = 0.0;
    constexpr int kSteps = 1024;
    FramedOperator prev = r0;
    for (int k = 1; k <= kSteps; ++k) {
      const FramedOperator next = retract(f, static_cast<double>(k) / kSteps);
      sampled = std::max(sampled, framed_distance(prev, next) * kSteps);
      prev = next;
    }
    worst_ratio = std::max(worst_ratio, sampled / lipschitz);
    if (!std::isfinite(sampled) || sampled > lipschitz * (1.0 + 1e-9) + 1e-12) {
      out.fail(tag + ": sampled modulus " + sci(sampled) + " exceeds C = " + sci(lipschitz));
    }
  }
  if (out.pass) out.detail << "50 instances, max sampled modulus / C " << std::fixed << std::setprecision(4) << worst_ratio;
}

// 11. Weight normalization and boundary antisymmetry.
void weight_normalization(Outcome& out) {
  std::vector<WeightSpec> specs;
  for (double d : {0.25, 0.5, 1.0, 2.0}) {
    for (int m : {2, 3, 4}) specs.push_back(BumpSpec{d, m});
  }
  for (double e : {0.25, 1.0, 4.0}) specs.push_back(GaussianSpec{e});
  for (double p : {1.0, 2.0, 3.0, 4.0, 6.0}) {
    specs.push_back(ResolventSpec{p, ResolventVariant::half_shift});
    specs.push_back(ResolventSpec{p, ResolventVariant::classic});
  }
  double worst_mass = 0.0;
  double worst_sym = 0.0;
  for (const auto& spec : specs) {
    const auto w = make_weight(spec);
    const double dev = std::abs(w.measured_integral() - 1.0);
    worst_mass = std::max(worst_mass, dev);
    if (!(dev <= 1e-10)) out.fail(w.describe() + ": integral off by " + sci(dev));
    for (double x = 1e-3; x < 50.0; x *= 1.17) {
      const double s = std::abs(w.boundary_f(x) + w.boundary_f(-x));
      worst_sym = std::max(worst_sym, s);
      if (!(s <= 1e-14)) {
        out.fail(w.describe() + ": antisymmetry defect " + sci(s) + " at " + std::to_string(x));
        break;
      }
    }
  }
  const double c1 = make_weight(ResolventSpec{1.0, ResolventVariant::classic}).mass();
  const double c2 = make_weight(ResolventSpec{2.0, ResolventVariant::half_shift}).mass();
  if (!(std::abs(c1 - std::numbers::pi) <= 1e-10)) out.fail("c1(classic) = " + std::to_string(c1));
  if (!(std::abs(c2 - 2.0) <= 1e-10)) out.fail("c2(half_shift) = " + std::to_string(c2));
  if (out.pass) {
    out.detail << specs.size() << " weights, max mass defect " << sci(worst_mass) << ", max antisymmetry defect "
               << sci(worst_sym);
  }
}

const std::vector<Criterion>& registry() {
  static const std::vector<Criterion> all{
      {{"C01", "four_way_agreement"}, four_way_agreement},
      {{"C02", "scalar_closed_forms"}, scalar_closed_forms},
      {{"C03", "loop_vanishing"}, loop_vanishing},
      {{"C04", "path_independence"}, path_independence},
      {{"C05", "unbounded_reduction"}, unbounded_reduction},
      {{"C06", "doi_identity"}, doi_identity},
      {{"C07", "vartheta_derivative_order"}, vartheta_derivative_order},
      {{"C08", "trace_duality"}, trace_duality},
      {{"C09", "interpolation_bound"}, interpolation_bound},
      {{"C10", "retract"}, retract_properties},
      {{"C11", "weight_normalization"}, weight_normalization},
  };
  return all;
}

CriterionResult run_one(const Criterion& c) {
  CriterionResult r{c.info.id, c.info.name, false, "", 0.0};
  const auto start = std::chrono::steady_clock::now();
  Outcome out;
  try {
    c.run(out);
  } catch (const std::exception& e) {
    out.fail(std::string("exception: ") + e.what());
  }
  r.pass = out.pass;
  r.detail = out.text();
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace

std::vector<CriterionInfo> acceptance_criteria() {
  std::vector<CriterionInfo> out;
  for (const auto& c : registry()) out.push_back(c.info);
  return out;
}

std::vector<CriterionResult> run_acceptance(const std::string& filter, int threads) {
  std::vector<const Criterion*> selected;
  for (const auto& c : registry()) {
    if (filter.empty() || c.info.id.find(filter) != std::string::npos ||
        c.info.name.find(filter) != std::string::npos) {
      selected.push_back(&c);
    }
  }
  std::vector<CriterionResult> results(selected.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < selected.size(); i = next++) results[i] = run_one(*selected[i]);
  };
  const int count = std::clamp(threads, 1, static_cast<int>(std::max<std::size_t>(selected.size(), 1)));
  std::vector<std::thread> pool;
  for (int i = 1; i < count; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return results;
}

std::string format_result(const CriterionResult& r) {
  std::ostringstream s;
  s << (r.pass ? "PASS " : "FAIL ") << r.id << " " << r.name << ": " << r.detail << " (" << std::fixed
    << std::setprecision(2) << r.seconds << " s)";
  return s.str();
}

}  // namespace specflow

#include "specflow/doi.hpp"
#include "specflow/errors.hpp"
#include "specflow/paths.hpp"
#include "support.hpp"

using namespace specflow;
using testing::diag;
using testing::max_abs;

namespace {

const std::vector<double> kPm1{-1.0, 1.0};

Matrix vt(const Matrix& m) { return eigensystem(m).compose([](double x) { return vartheta(x); }); }

}  // namespace

TEST_CASE("line path") {
  auto g = testing::rng(101);
  const FramedOperator f0(random::hermitian(g, 4, 0.8), kPm1);
  const FramedOperator f1(random::hermitian(g, 4, 0.8), kPm1);
  const auto p = make_line_path(f0, f1);
  CHECK(p.at(0.0).block() == f0.block());
  CHECK(p.at(1.0).block() == f1.block());
  CHECK(p.at(0.3).essential_points() == kPm1);
  for (double t : {0.0, 0.2, 0.77, 1.0}) CHECK(max_abs(p.derivative(t) - (f1.block() - f0.block())) < 1e-15);

  const auto c = make_line_path(f0, f0);
  CHECK(max_abs(c.derivative(0.5)) == 0.0);

  const auto m = make_line_path(FramedOperator(diag({-1.0}), kPm1), FramedOperator(diag({1.0}), kPm1));
  CHECK(max_abs(m.at(0.5).block()) == 0.0);

  CHECK_THROWS_AS(make_line_path(f0, FramedOperator(f1.block(), {-2.0, 2.0})), InvalidPair);
  CHECK_THROWS_AS(make_line_path(f0, FramedOperator(diag({0.1}), kPm1)), InvalidPair);
  CHECK_THROWS_AS(p.at(1.5), InvalidInput);
  CHECK_THROWS_AS(p.sample(-0.1), InvalidInput);
}

TEST_CASE("sample and derivative modes") {
  const auto loop = make_trig_loop(5, 4, 0.1, 2);
  const auto numeric = OperatorPath([loop](double t) { return loop.at(t); }, std::nullopt, {}, PathKind::bounded);
  CHECK(!numeric.analytic());
  CHECK(loop.analytic());
  const double scale = 1.0 + hermitian_norm(loop.derivative(0.25));
  CHECK(max_abs(loop.sample(0.25).Fdot - numeric.sample(0.25).Fdot) < 1e-8 * scale);
  // One-sided stencils at the ends.
  CHECK(max_abs(loop.derivative(0.0) - numeric.derivative(0.0)) < 1e-7 * scale);
  CHECK(max_abs(loop.derivative(1.0) - numeric.derivative(1.0)) < 1e-7 * scale);

  const FramedOperator f(diag({0.3}), kPm1);
  const auto constant = OperatorPath([f](double) { return f; }, std::nullopt, {}, PathKind::bounded);
  CHECK(max_abs(constant.sample(0.6).Fdot) == 0.0);
}

TEST_CASE("construction checks") {
  // Changing essential points are rejected.
  CHECK_THROWS_AS(OperatorPath([](double t) { return FramedOperator(diag({0.0}), {-1.0, 1.0 + t}); }, std::nullopt,
                               {}, PathKind::bounded),
                  InvalidInput);
  // A jump right next to a grid point of the check is caught by the continuity probe.
  CHECK_THROWS_AS(OperatorPath([](double t) { return FramedOperator(diag({t < 0.5 + 5e-8 ? 0.0 : 0.5}), kPm1); },
                               std::nullopt, {}, PathKind::bounded),
                  InvalidInput);
  // A kink at a declared breakpoint is fine and yields one-sided derivatives.
  const OperatorPath kink([](double t) { return FramedOperator(diag({std::abs(t - 0.5)}), kPm1); }, std::nullopt,
                          {0.5}, PathKind::bounded);
  CHECK(kink.breakpoints() == std::vector<double>{0.5});
  const auto right = kink.sample(0.5, Side::right);
  const auto left = kink.sample(0.5, Side::left);
  CHECK(right.one_sided);
  CHECK(right.Fdot(0, 0).real() == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(left.Fdot(0, 0).real() == doctest::Approx(-1.0).epsilon(1e-8));
}

TEST_CASE("concatenate and reverse") {
  const FramedOperator a(diag({-0.5, 0.2}), kPm1);
  const FramedOperator b(diag({0.5, 0.1}), kPm1);
  const FramedOperator c(diag({0.1, -0.7}), kPm1);
  const auto path = concatenate({make_line_path(a, b), make_line_path(b, c)});
  CHECK(path.breakpoints() == std::vector<double>{0.5});
  CHECK(path.at(0.0).block() == a.block());
  CHECK(path.at(0.5).block() == b.block());
  CHECK(path.at(1.0).block() == c.block());
  CHECK(max_abs(path.derivative(0.5, Side::left) - 2.0 * (b.block() - a.block())) < 1e-14);
  CHECK(max_abs(path.derivative(0.5, Side::right) - 2.0 * (c.block() - b.block())) < 1e-14);

  const auto r = reversed(path);
  CHECK(r.at(0.0).block() == c.block());
  CHECK(r.at(1.0).block() == a.block());
  CHECK(max_abs(r.derivative(0.25) + path.derivative(0.75)) < 1e-14);
  CHECK_THROWS_AS(concatenate({make_line_path(a, b), make_line_path(FramedOperator(diag({0.0, 0.0}), {-2.0, 2.0}),
                                                                    FramedOperator(diag({0.0, 0.0}), {-2.0, 2.0}))}),
                  InvalidPair);
}

TEST_CASE("phase rectangle loop") {
  const FramedOperator b0(diag({1.0, -1.0}), kPm1);
  const FramedOperator b1(diag({-1.0, -1.0}), kPm1);
  const auto loop = make_phase_rectangle_loop(b0, b1, make_line_path(b0, b1));
  CHECK(loop.breakpoints().size() == 3);
  CHECK(loop.at(0.0).block() == loop.at(1.0).block());
  // With involutive corners the F -> B legs are constant.
  CHECK(max_abs(loop.at(0.3).block() - b1.block()) < 1e-15);
  CHECK(max_abs(loop.derivative(0.3)) < 1e-14);

  auto g = testing::rng(111);
  const FramedOperator f0(random::hermitian(g, 2, 0.7), kPm1);
  const FramedOperator f1(random::hermitian(g, 2, 0.7), kPm1);
  const auto rect = make_phase_rectangle_loop(f0, f1, make_line_path(f0, f1));
  CHECK(rect.at(0.0).block() == rect.at(1.0).block());
  CHECK(rect.at(1.0).block() == f0.block());
  // Corners F_j and B_j share their Calkin image.
  for (const auto* f : {&f0, &f1}) CHECK(phase(*f).essential_points() == f->essential_points());
  CHECK(max_abs(rect.at(0.5).block() - phase(f1).block()) < 1e-14);

  CHECK_THROWS_AS(make_phase_rectangle_loop(FramedOperator(diag({1.5, 0.0}), kPm1), f1, make_line_path(f0, f1)),
                  InvalidInput);
  CHECK_THROWS_AS(make_phase_rectangle_loop(f1, f0, make_line_path(f0, f1)), InvalidPair);
}

TEST_CASE("trig loops") {
  const auto flat = make_trig_loop(3, 5, 0.0, 2);
  CHECK(flat.at(0.37).block() == flat.at(0.0).block());
  CHECK(max_abs(flat.derivative(0.37)) == 0.0);

  const auto a = make_trig_loop(99, 6, 0.2, 3);
  const auto b = make_trig_loop(99, 6, 0.2, 3);
  for (double t : {0.0, 0.13, 0.5, 0.91}) {
    CHECK(a.at(t).block() == b.at(t).block());
    CHECK(a.derivative(t) == b.derivative(t));
  }
  CHECK(a.at(0.0).block() == a.at(1.0).block());
  for (int i = 0; i <= 256; ++i) CHECK(op_norm(a.at(i / 256.0)) <= 1.0);
  CHECK(path_delta(a) == 1.0);

  TrigPathSpec hard;
  hard.amplitude = 5.0;
  hard.max_tries = 3;
  CHECK_THROWS_AS(make_trig_path(hard), GeneratorError);
}

TEST_CASE("vartheta path") {
  const auto zero = make_line_path(FramedOperator(Matrix::Zero(2, 2)), FramedOperator(Matrix::Zero(2, 2)),
                                   PathKind::unbounded_model);
  const auto vz = vartheta_path(zero);
  CHECK(max_abs(vz.at(0.5).block()) == 0.0);
  CHECK(vz.at(0.5).essential_points() == kPm1);
  CHECK(vz.kind() == PathKind::bounded);

  const auto one = make_line_path(FramedOperator(diag({1.0})), FramedOperator(diag({1.0})), PathKind::unbounded_model);
  CHECK(vartheta_path(one).at(0.0).block()(0, 0).real() == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));

  auto g = testing::rng(121);
  const auto dpath = make_polynomial_path({random::hermitian(g, 5, 20.0), random::hermitian(g, 5, 30.0),
                                           random::hermitian(g, 5, 10.0)},
                                          {}, PathKind::unbounded_model);
  const auto fpath = vartheta_path(dpath);
  for (double t = 0.0; t <= 1.0; t += 0.125) {
    const auto s = eigensystem(fpath.at(t));
    CHECK(s.values[0] > -1.0);
    CHECK(s.values[s.dim() - 1] < 1.0);
  }

  // Smoothness: the first-order remainder is O(Delta^2).
  const double t = 0.4;
  const auto r = [&](double d) {
    return operator_norm(fpath.at(t + d).block() - fpath.at(t).block() - d * fpath.derivative(t));
  };
  const double r1 = r(1e-2);
  const double r2 = r(1e-3);
  CHECK(std::log10(r1 / r2) > 1.8);
}

TEST_CASE("gamma derivative residual") {
  auto g = testing::rng(131);
  const Matrix d0 = random::hermitian(g, 4, 3.0);
  const Matrix v = random::hermitian(g, 4, 2.0);
  const Matrix w = random::hermitian(g, 4, 1.0);
  const auto lin = make_polynomial_path({d0, v}, {}, PathKind::unbounded_model);
  CHECK(gamma_derivative_residual(lin, 0.3, 0.6) < 1e-13);
  const auto con = make_polynomial_path({d0}, {}, PathKind::unbounded_model);
  CHECK(gamma_derivative_residual(con, 0.3, 0.6) == 0.0);
  CHECK_THROWS_AS(gamma_derivative_residual(con, 0.3, 0.3), InvalidInput);

  const auto quad = make_polynomial_path({d0, v, w}, {}, PathKind::unbounded_model);
  const double t0 = 0.25;
  const Matrix d = d0 + t0 * v + t0 * t0 * w;
  const Matrix weight = eigensystem(d).compose([](double x) { return 1.0 / std::sqrt(1 + x * x); });
  const double slope = operator_norm(w * weight);
  for (double dt : {1e-1, 1e-2, 1e-3}) {
    // The difference quotient minus the derivative is exactly dt * W.
    CHECK(gamma_derivative_residual(quad, t0, t0 + dt) == doctest::Approx(dt * slope).epsilon(1e-8));
  }
}

TEST_CASE("vartheta homotopy continuity") {
  // t -> vartheta(D + t A) with ||A (1 + D^2)^(-1/2)|| < 1 has a finite sampled modulus.
  auto g = testing::rng(141);
  const Matrix d = random::hermitian(g, 6, 10.0);
  Matrix a = random::hermitian(g, 6, 1.0);
  const Matrix weight = eigensystem(d).compose([](double x) { return 1.0 / std::sqrt(1 + x * x); });
  a *= 0.9 / operator_norm(a * weight);
  double modulus = 0.0;
  for (int i = 0; i < 64; ++i) {
    const double t = i / 64.0;
    const double dt = 1.0 / 64.0;
    modulus = std::max(modulus, operator_norm(vt(d + (t + dt) * a) - vt(d + t * a)) / dt);
  }
  CHECK(std::isfinite(modulus));
}

TEST_CASE("arc length and random helpers") {
  const auto p = make_line_path(FramedOperator(diag({-0.5}), kPm1), FramedOperator(diag({0.5}), kPm1));
  CHECK(arc_length(p) == doctest::Approx(1.0));
  auto g = testing::rng(151);
  const Matrix u = random::unitary(g, 5);
  CHECK(max_abs(u.adjoint() * u - Matrix::Identity(5, 5)) < 1e-13);
  RealVector spec(3);
  spec << -0.2, 0.4, 0.9;
  const auto s = eigensystem(random::with_spectrum(g, spec));
  CHECK((s.values - spec).cwiseAbs().maxCoeff() < 1e-13);
  CHECK(hermitian_norm(random::hermitian(g, 7, 0.3)) == doctest::Approx(0.3));
}

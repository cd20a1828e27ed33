#include "specflow/doi.hpp"
#include "specflow/errors.hpp"
#include "support.hpp"

#include <numeric>

using namespace specflow;
using testing::diag;
using testing::max_abs;

TEST_CASE("divided_difference examples") {
  const auto sq = functions::square();
  CHECK(divided_difference(sq, 1.0, 3.0) == 4.0);
  CHECK(divided_difference(sq, 2.0, 2.0) == 4.0);
  CHECK(divided_difference(functions::vartheta(), 0.0, 0.0) == 1.0);
  // Continuity across the merge threshold.
  const auto th = functions::tanh();
  const double l = 0.7;
  const double gap = kMergeTolerance * (1.0 + 2 * l);
  CHECK(std::abs(divided_difference(th, l, l + 0.99 * gap) - divided_difference(th, l, l + 1.01 * gap)) < 1e-8);
  CHECK_THROWS_AS(functions::by_name("x4"), InvalidSpec);
  CHECK(functions::by_name("tanh").name == "tanh");
}

TEST_CASE("apply_doi examples") {
  auto g = testing::rng(51);
  const auto a = eigensystem(random::hermitian(g, 5, 1.0));
  const auto b = eigensystem(random::hermitian(g, 5, 1.0));
  const Matrix x = random::complex_matrix(g, 5, 5);
  CHECK(max_abs(apply_doi(DoiKernel::constant(1.0), a, b, x) - x) < 1e-13);

  const auto d = eigensystem(diag({1.0, 3.0}));
  Matrix s(2, 2);
  s << 0, 1, 1, 0;
  Matrix expect(2, 2);
  expect << 0, 4, 4, 0;
  CHECK(max_abs(apply_doi(DoiKernel::divided_difference(functions::square()), d, d, s) - expect) < 1e-14);

  const Matrix ha = random::hermitian(g, 6, 1.0);
  const Matrix hb = random::hermitian(g, 6, 1.0);
  const auto sa = eigensystem(ha);
  const auto sb = eigensystem(hb);
  const Matrix y = random::complex_matrix(g, 6, 6);
  const auto left = DoiKernel::custom("lambda", [](double l, double) { return l; });
  const auto right = DoiKernel::custom("mu", [](double, double m) { return m; });
  CHECK(max_abs(apply_doi(left, sa, sb, y) - ha * y) < 1e-12);
  CHECK(max_abs(apply_doi(right, sa, sb, y) - y * hb) < 1e-12);

  CHECK_THROWS_AS(apply_doi(left, sa, sb, Matrix::Zero(5, 6)), InvalidInput);
}

TEST_CASE("DOI algebra") {
  auto g = testing::rng(53);
  const auto a = eigensystem(random::hermitian(g, 6, 1.0));
  const auto b = eigensystem(random::hermitian(g, 6, 1.0));
  const Matrix x = random::complex_matrix(g, 6, 6);
  const Matrix y = random::complex_matrix(g, 6, 6);
  const auto phi = DoiKernel::divided_difference(functions::tanh());
  const auto psi = DoiKernel::custom("exp", [](double l, double m) { return std::exp(-l * l - 0.5 * m); });

  // T_{phi psi} = T_phi T_psi on a shared measure.
  const Matrix lhs = apply_doi(phi * psi, a, b, x);
  const Matrix rhs = apply_doi(phi, a, b, apply_doi(psi, a, b, x));
  CHECK(max_abs(lhs - rhs) < 1e-10);

  // Adjoint: T_{phi*}(A, B)(X*) = (T_phi(B, A)(X))* with phi*(l, m) = phi(m, l).
  const auto psi_star = DoiKernel::custom("exp*", [](double l, double m) { return std::exp(-m * m - 0.5 * l); });
  CHECK(max_abs(apply_doi(psi_star, a, b, x.adjoint()) - apply_doi(psi, b, a, x).adjoint()) < 1e-12);

  // Linearity.
  const Complex c1(0.3, -1.2);
  const Complex c2(-2.0, 0.5);
  CHECK(max_abs(apply_doi(psi, a, b, c1 * x + c2 * y) -
                (c1 * apply_doi(psi, a, b, x) + c2 * apply_doi(psi, a, b, y))) < 1e-12);
}

TEST_CASE("perturbation_residual") {
  const auto tanh = functions::tanh();
  auto g = testing::rng(61);
  const FramedOperator a(random::hermitian(g, 8, 1.0));
  CHECK(perturbation_residual(tanh, a, a) < 1e-14);

  const FramedOperator d1(diag({0.3, -1.0, 2.0}));
  const FramedOperator d2(diag({1.5, 0.2, -0.7}));
  for (const auto& f : {functions::square(), functions::cube()}) CHECK(perturbation_residual(f, d1, d2) < 1e-14);

  for (int trial = 0; trial < 10; ++trial) {
    const FramedOperator x(random::hermitian(g, 8, 2.0));
    const FramedOperator y(random::hermitian(g, 8, 2.0));
    const double scale = 1.0 + (eigensystem(x).compose(tanh.value) - eigensystem(y).compose(tanh.value)).norm();
    CHECK(perturbation_residual(tanh, x, y) < 1e-10 * scale);
    for (const auto& f : {functions::square(), functions::cube()}) {
      const double poly_scale = (x.block() - y.block()).norm() * 3 * 4;
      CHECK(perturbation_residual(f, x, y) <= 1e-11 * (1 + poly_scale));
    }
  }
  CHECK_THROWS_AS(perturbation_residual(tanh, FramedOperator(diag({1.0})), FramedOperator(diag({1.0, 2.0}))),
                  InvalidPair);
}

TEST_CASE("vartheta_derivative") {
  const Matrix v = diag({0.5, -2.0, 1.0});
  CHECK(max_abs(vartheta_derivative(FramedOperator(Matrix::Zero(3, 3)), v) - v) < 1e-15);

  const std::vector<double> d{0.5, -1.5, 3.0};
  const auto dd = vartheta_derivative(FramedOperator::diagonal(d), v);
  for (int i = 0; i < 3; ++i) {
    CHECK(dd(i, i).real() == doctest::Approx(std::pow(1 + d[i] * d[i], -1.5) * v(i, i).real()));
  }

  auto g = testing::rng(71);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix dm = random::hermitian(g, 6, 2.0);
    const Matrix dot = random::hermitian(g, 6, 1.0);
    const auto vt = [](const Matrix& m) { return eigensystem(m).compose([](double x) { return vartheta(x); }); };
    const double h = 1e-4;
    const Matrix fd = (vt(dm + h * dot) - vt(dm - h * dot)) / (2 * h);
    CHECK(operator_norm(fd - vartheta_derivative(FramedOperator(dm), dot)) < 1e-7);
  }
}

TEST_CASE("phi_theta factorization") {
  auto g = testing::rng(73);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix d0 = random::hermitian(g, 5, 3.0);
    const Matrix d1 = random::hermitian(g, 5, 3.0);
    const auto s0 = eigensystem(d0);
    const auto s1 = eigensystem(d1);
    const Matrix b = (d1 - d0) * s0.compose([](double x) { return 1.0 / std::sqrt(1 + x * x); });
    const Matrix expect = s1.compose([](double x) { return vartheta(x); }) - s0.compose([](double x) { return vartheta(x); });
    CHECK(max_abs(apply_phi_theta(s1, s0, b) - expect) < 1e-12);
    // Direct application of the unbounded symbol agrees at matrix scale.
    const Matrix direct = apply_doi(DoiKernel::phi_theta(), s1, s0, b);
    CHECK(max_abs(direct - expect) < 1e-11);
    CHECK(std::isfinite(auxiliary_estimate_ratio(d0, d1)));
  }
}

TEST_CASE("trace_duality_residual") {
  auto g = testing::rng(81);
  const auto k = DoiKernel::divided_difference(functions::tanh());
  const FramedOperator d(random::hermitian(g, 6, 1.0));
  CHECK(trace_duality_residual(k, d, Matrix::Identity(6, 6)) < 1e-13);

  const FramedOperator dd(diag({0.1, -0.4, 0.9}));
  const Matrix v = random::complex_matrix(g, 3, 3);
  CHECK(trace_duality_residual(k, dd, v) < 1e-15);

  const auto w = make_weight(BumpSpec{0.5, 2});
  const auto hk = DoiKernel::divided_difference(functions::density(w));
  for (int trial = 0; trial < 10; ++trial) {
    const FramedOperator x(random::hermitian(g, 8, 0.9), {-1.0, 1.0});
    const Matrix vv = random::hermitian(g, 8, 1.0);
    CHECK(trace_duality_residual(hk, x, vv) < 1e-10);
  }

  const auto asym = DoiKernel::custom("asym", [](double l, double m) { return l - 2 * m; });
  CHECK_THROWS_AS(trace_duality_residual(asym, d, v.topLeftCorner(3, 3)), InvalidKernel);
  CHECK_THROWS_AS(trace_duality_residual(k, FramedOperator(diag({0.1}), {-1.0, 1.0}), Matrix::Identity(1, 1)),
                  NotTraceClass);
}

TEST_CASE("interpolation_gap") {
  auto g = testing::rng(91);
  const auto psd = [&](int n) {
    const Matrix m = random::complex_matrix(g, n, n);
    return Matrix(m * m.adjoint());
  };
  const Matrix a = random::complex_matrix(g, 6, 6);
  const Matrix b0 = psd(6);
  const Matrix b1 = psd(6);
  CHECK(std::abs(interpolation_gap(a, b0, b1, 0.0)) < 1e-12 * operator_norm(b1 * a));
  CHECK(std::abs(interpolation_gap(a, b0, b1, 1.0)) < 1e-12 * operator_norm(a * b0));
  for (double th : {0.1, 0.5, 0.9}) CHECK(interpolation_gap(a, b0, b1, th) >= 0.0);

  CHECK_THROWS_AS(interpolation_gap(a, -b0, b1, 0.5), InvalidInput);
  CHECK_THROWS_AS(interpolation_gap(a, b0, b1, 1.5), InvalidInput);
  CHECK(max_abs(psd_power(b0, 0.5) * psd_power(b0, 0.5) - b0) < 1e-10 * operator_norm(b0));
}

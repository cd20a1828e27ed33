#include "specflow/errors.hpp"
#include "specflow/operator.hpp"
#include "specflow/operator_io.hpp"
#include "support.hpp"

#include <filesystem>

using namespace specflow;
using testing::diag;
using testing::max_abs;

TEST_CASE("construction validates and normalizes") {
  CHECK_THROWS_AS(FramedOperator(Matrix::Zero(2, 3)), InvalidInput);
  Matrix nh = diag({1.0, 2.0});
  nh(0, 1) = Complex(0.5, 0.0);
  CHECK_THROWS_AS(FramedOperator{nh}, InvalidInput);
  Matrix bad = diag({1.0, std::nan("")});
  CHECK_THROWS_AS(FramedOperator{bad}, InvalidInput);

  const FramedOperator a(diag({1.0}), {1.0, -1.0, 1.0 + 1e-14, -1.0});
  CHECK(a.essential_points() == std::vector<double>{-1.0, 1.0});
}

TEST_CASE("eigensystem examples") {
  const auto s = eigensystem(FramedOperator(diag({3.0, 1.0})));
  CHECK(s.values[0] == 1.0);
  CHECK(s.values[1] == 3.0);

  Matrix x(2, 2);
  x << 0, 1, 1, 0;
  const auto p = eigensystem(FramedOperator(x));
  CHECK(p.values[0] == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(p.values[1] == doctest::Approx(1.0).epsilon(1e-15));
  const double r = 1.0 / std::sqrt(2.0);
  // Columns (1, -1)/sqrt2 and (1, 1)/sqrt2 up to the dominant-component phase rule.
  CHECK(std::abs(std::abs(p.basis(0, 0)) - r) < 1e-14);
  CHECK(std::abs(p.basis(0, 0) + p.basis(1, 0)) < 1e-14);
  CHECK(std::abs(p.basis(0, 1) - p.basis(1, 1)) < 1e-14);

  auto g = testing::rng(7);
  const Matrix h = random::hermitian(g, 8, 3.0);
  const auto sys = eigensystem(h);
  CHECK(max_abs(sys.compose(sys.values) - h) < 1e-10 * 3.0);
  CHECK(max_abs(sys.basis.adjoint() * sys.basis - Matrix::Identity(8, 8)) < 1e-10);
  for (Eigen::Index i = 1; i < sys.dim(); ++i) CHECK(sys.values[i - 1] <= sys.values[i]);

  // Deterministic: repeated calls are bit-identical.
  const auto again = eigensystem(h);
  CHECK(again.values == sys.values);
  CHECK(again.basis == sys.basis);
}

TEST_CASE("eigensystem ties broken by dominant index") {
  const auto s = eigensystem(FramedOperator(diag({2.0, 2.0, 1.0})));
  CHECK(s.values[0] == 1.0);
  CHECK(std::abs(s.basis(2, 0)) == doctest::Approx(1.0));
  CHECK(std::abs(s.basis(0, 1)) == doctest::Approx(1.0));
  CHECK(std::abs(s.basis(1, 2)) == doctest::Approx(1.0));
}

TEST_CASE("apply_function examples") {
  const FramedOperator a(diag({0.5}), {-1.0, 1.0});
  const auto sq = apply_function(a, [](double x) { return x * x; });
  CHECK(sq.block()(0, 0).real() == doctest::Approx(0.25));
  CHECK(sq.essential_points() == std::vector<double>{1.0});

  auto g = testing::rng(3);
  const FramedOperator b(random::hermitian(g, 5, 0.8), {-1.0, 1.0});
  const auto id = apply_function(b, [](double x) { return x; });
  CHECK(max_abs(id.block() - b.block()) < 1e-14);
  CHECK(id.essential_points() == b.essential_points());

  // Bump with support inside (-0.9, 0.9).
  const auto bump = [](double x) { return std::abs(x) < 0.85 ? std::pow(0.85 * 0.85 - x * x, 2) : 0.0; };
  const auto hb = apply_function(FramedOperator(diag({0.3, -0.8}), {-1.0, 1.0}), bump);
  CHECK(hb.essential_points() == std::vector<double>{0.0});
  CHECK(hb.block()(0, 0).real() == doctest::Approx(bump(0.3)).epsilon(1e-13));
  CHECK(hb.block()(1, 1).real() == doctest::Approx(bump(-0.8)).epsilon(1e-13));

  CHECK_THROWS_AS(apply_function(a, [](double x) { return std::log(x - 1.0); }), DomainError);
}

TEST_CASE("functional calculus homomorphism") {
  auto g = testing::rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const FramedOperator a(random::hermitian(g, 6, 1.5), {-2.0, 2.0});
    const auto f = [](double x) { return std::sin(x); };
    const auto h = [](double x) { return std::exp(0.5 * x); };
    const auto lhs = apply_function(apply_function(a, f), h);
    const auto rhs = apply_function(a, [&](double x) { return h(f(x)); });
    CHECK(max_abs(lhs.block() - rhs.block()) < 1e-10);
    CHECK(lhs.essential_points().size() == rhs.essential_points().size());
  }
}

TEST_CASE("spectral_projection") {
  const FramedOperator a(diag({0.5, -0.5}));
  const auto p = spectral_projection(a, Interval::at_least(0.0));
  CHECK(max_abs(p.block() - diag({1.0, 0.0})) < 1e-15);

  const auto z = spectral_projection(FramedOperator(diag({0.0, -1.0})), Interval::at_least(0.0));
  CHECK(max_abs(z.block() - diag({1.0, 0.0})) < 1e-15);

  const auto mid = spectral_projection(FramedOperator(diag({0.2, 0.7}), {-1.0, 1.0}), Interval::open(-0.5, 0.5));
  CHECK(mid.essential_points() == std::vector<double>{0.0});
  CHECK(is_tau_finite(mid));
  CHECK(!is_tau_finite(spectral_projection(FramedOperator(diag({0.2}), {-1.0, 1.0}), Interval::at_least(0.0))));

  auto g = testing::rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const FramedOperator b(random::hermitian(g, 7, 1.0), {-1.0, 1.0});
    const auto q = spectral_projection(b, Interval::closed(-0.3, 0.6)).block();
    CHECK(max_abs(q * q - q) < 1e-10);
    CHECK(max_abs(q - q.adjoint()) < 1e-10);
  }
}

TEST_CASE("phase") {
  CHECK(max_abs(phase(FramedOperator(diag({0.5, -0.2}))).block() - diag({1.0, -1.0})) == 0.0);
  CHECK(max_abs(phase(FramedOperator(diag({0.0}))).block() - diag({1.0})) == 0.0);
  const auto pe = phase(FramedOperator(diag({0.1}), {-2.0, 0.5}));
  CHECK(pe.essential_points() == std::vector<double>{-1.0, 1.0});

  auto g = testing::rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const auto b = phase(FramedOperator(random::hermitian(g, 6, 1.0))).block();
    CHECK(max_abs(b * b - Matrix::Identity(6, 6)) < 1e-10);
    for (double v : eigensystem(b).values) CHECK(std::abs(std::abs(v) - 1.0) < 1e-10);
  }
}

TEST_CASE("trace_functionals") {
  const auto t = trace_functionals(FramedOperator(diag({1.0, -2.0})));
  CHECK(t.trace == doctest::Approx(-1.0));
  CHECK(t.trace_norm == doctest::Approx(3.0));
  CHECK(t.op_norm == doctest::Approx(2.0));

  CHECK(op_norm(FramedOperator(Matrix::Zero(2, 2), {-1.0, 1.0})) == 1.0);
  CHECK_THROWS_AS(trace_functionals(FramedOperator(Matrix::Zero(2, 2), {-1.0, 1.0})), NotTraceClass);
  const auto zero = trace_functionals(FramedOperator(Matrix::Zero(2, 2), {0.0}));
  CHECK(zero.trace == 0.0);
  CHECK(zero.op_norm == 0.0);

  auto g = testing::rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const FramedOperator a(random::hermitian(g, 5, 2.0));
    const auto tf = trace_functionals(a);
    CHECK(std::abs(tf.trace) <= tf.trace_norm + 1e-12);
    CHECK(tf.trace_norm <= 5 * tf.op_norm + 1e-12);
  }
}

TEST_CASE("essential_data") {
  const auto a = essential_data(FramedOperator(diag({0.3}), {-1.0, 1.0}));
  CHECK(a.delta_f == 1.0);
  CHECK(a.in_f_pm1);
  CHECK(a.is_fredholm);

  const auto b = essential_data(FramedOperator(diag({0.3}), {-2.0, 0.5}));
  CHECK(b.delta_f == 0.5);
  CHECK(b.essential_norm == 2.0);
  CHECK(!b.in_f_pm1);

  CHECK(!essential_data(FramedOperator(diag({0.3}), {0.0, 1.0})).is_fredholm);
  CHECK(!essential_data(FramedOperator(diag({1.3}), {-1.0, 1.0})).in_f_pm1);
  CHECK_THROWS_AS(essential_data(FramedOperator(diag({0.3}))), NoCalkinModel);

  // A monotone map sending +-delta to +-1 normalizes delta_F to 1.
  auto g = testing::rng(17);
  const FramedOperator c(random::hermitian(g, 4, 3.0), {-0.4, 0.7, 2.0});
  const double d = essential_data(c).delta_f;
  const auto theta = apply_function(c, [d](double x) { return std::tanh(x) / std::tanh(d); });
  CHECK(essential_data(theta).delta_f == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("norms and distance") {
  CHECK(operator_norm(diag({-3.0, 2.0})) == doctest::Approx(3.0));
  CHECK(hermitian_norm(diag({-3.0, 2.0})) == doctest::Approx(3.0));
  const FramedOperator a(diag({0.0}), {-1.0, 1.0});
  const FramedOperator b(diag({0.5}), {-1.0, 1.5});
  CHECK(framed_distance(a, b) == doctest::Approx(0.5));
}

TEST_CASE("operator text round trip") {
  auto g = testing::rng(21);
  const FramedOperator a(random::hermitian(g, 4, 1.0), {-1.0 / 3.0, 1.0});
  const auto back = operator_from_text(to_text(a));
  CHECK(back.block() == a.block());
  CHECK(back.essential_points() == a.essential_points());

  const auto path = std::filesystem::temp_directory_path() / "specflow_op_roundtrip.json";
  write_operator(path, a);
  CHECK(read_operator(path).block() == a.block());
  std::filesystem::remove(path);

  CHECK_THROWS_AS(operator_from_text("{\"n\": 2, \"real_parts\": [1]}"), InvalidInput);
  CHECK_THROWS_AS(operator_from_text("not json"), InvalidInput);
}

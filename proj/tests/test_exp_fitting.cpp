#include <doctest.h>

#include <cmath>

#include "mtqs/exp_fitting.hpp"

using namespace mtqs;

namespace {

CorrelationSeries sample_sum(const ExponentialSum& es, double t_max, int n) {
  CorrelationSeries s;
  for (int i = 0; i < n; ++i) {
    const double t = t_max * i / (n - 1);
    s.grid.push_back(t);
    s.values.push_back(evaluate(es, t));
  }
  return s;
}

}  // namespace

TEST_CASE("evaluate") {
  ExponentialSum empty;
  CHECK(evaluate(empty, 1.0) == Complex(0.0));

  ExponentialSum one{{{Complex(0.7, -0.2), Complex(-1.0, 3.0)}}};
  CHECK(evaluate(one, 0.0) == Complex(0.7, -0.2));

  // conjugate pair stays real
  ExponentialSum pair{{{Complex(0.5, 0.25), Complex(-1.0, 2.0)},
                       {Complex(0.5, -0.25), Complex(-1.0, -2.0)}}};
  for (double t : {0.0, 0.4, 2.2}) {
    CHECK(std::abs(evaluate(pair, t).imag()) < 1e-14);
  }
  CHECK_THROWS_AS(evaluate(one, -1.0), std::invalid_argument);
}

TEST_CASE("single-term round trip") {
  ExponentialSum truth{{{Complex(2.0, 0.0), Complex(-1.0, 2.0)}}};
  auto [fit, report] = matrix_pencil_fit(sample_sum(truth, 6.0, 64), 1);
  REQUIRE(fit.terms.size() == 1);
  CHECK(std::abs(fit.terms[0].amplitude - Complex(2.0)) < 1e-8);
  CHECK(std::abs(fit.terms[0].exponent - Complex(-1.0, 2.0)) < 1e-8);
  CHECK(report.max_residual < 1e-9);
  CHECK(report.model_order == 1);
  CHECK(report.grid_span == doctest::Approx(6.0));
}

TEST_CASE("two-term round trip") {
  ExponentialSum truth{
      {{Complex(1.0), Complex(-1.0)}, {Complex(1.0), Complex(-2.0)}}};
  auto [fit, report] = matrix_pencil_fit(sample_sum(truth, 6.0, 64), 2);
  REQUIRE(fit.terms.size() == 2);
  // sorted by descending real part
  CHECK(std::abs(fit.terms[0].exponent - Complex(-1.0)) < 1e-8);
  CHECK(std::abs(fit.terms[1].exponent - Complex(-2.0)) < 1e-8);
  CHECK(std::abs(fit.terms[0].amplitude - Complex(1.0)) < 1e-8);
  CHECK(std::abs(fit.terms[1].amplitude - Complex(1.0)) < 1e-8);
}

TEST_CASE("constant series fits a zero exponent") {
  CorrelationSeries s;
  for (int i = 0; i < 16; ++i) {
    s.grid.push_back(0.25 * i);
    s.values.push_back(Complex(0.8, 0.0));
  }
  auto [fit, report] = matrix_pencil_fit(s, 1);
  CHECK(std::abs(fit.terms[0].amplitude - Complex(0.8)) < 1e-12);
  CHECK(std::abs(fit.terms[0].exponent) < 1e-12);
  CHECK(report.max_residual < 1e-12);
}

TEST_CASE("fit rejects bad inputs") {
  ExponentialSum truth{{{Complex(1.0), Complex(-1.0)}}};
  CorrelationSeries s = sample_sum(truth, 4.0, 32);

  CHECK_THROWS_AS(matrix_pencil_fit(s, 0), std::invalid_argument);

  CorrelationSeries short_series = s;
  short_series.grid.resize(2);
  short_series.values.resize(2);
  CHECK_THROWS_AS(matrix_pencil_fit(short_series, 1), std::invalid_argument);

  CorrelationSeries nonuniform = s;
  nonuniform.grid[5] += 0.01;
  CHECK_THROWS_AS(matrix_pencil_fit(nonuniform, 1), std::invalid_argument);

  // order far above the true rank: pencil becomes rank deficient
  CHECK_THROWS_AS(matrix_pencil_fit(s, 6), std::runtime_error);

  // a growing signal is refused as unstable
  CorrelationSeries growing;
  for (int i = 0; i < 32; ++i) {
    const double t = 0.2 * i;
    growing.grid.push_back(t);
    growing.values.push_back(std::exp(Complex(0.05, 1.0) * t));
  }
  CHECK_THROWS_AS(matrix_pencil_fit(growing, 1), std::runtime_error);
}

TEST_CASE("residual decreases weakly with model order") {
  ExponentialSum truth{{{Complex(1.0), Complex(-0.3, 1.0)},
                        {Complex(0.5), Complex(-1.0, -2.0)},
                        {Complex(0.25), Complex(-2.0, 0.5)}}};
  const CorrelationSeries s = sample_sum(truth, 8.0, 96);
  double prev = 1e300;
  for (int order = 1; order <= 3; ++order) {
    auto [fit, report] = matrix_pencil_fit(s, order);
    CHECK(report.max_residual <= prev + 1e-12);
    prev = report.max_residual;
  }
  CHECK(prev < 1e-8);
}

TEST_CASE("conjugate-symmetric input gives conjugate-paired terms") {
  ExponentialSum truth{{{Complex(0.5, 0.2), Complex(-1.0, 2.0)},
                        {Complex(0.5, -0.2), Complex(-1.0, -2.0)}}};
  auto [fit, report] = matrix_pencil_fit(sample_sum(truth, 6.0, 64), 2);
  REQUIRE(fit.terms.size() == 2);
  bool paired = false;
  const auto& a = fit.terms[0];
  const auto& b = fit.terms[1];
  if (std::abs(a.exponent - std::conj(b.exponent)) < 1e-8 &&
      std::abs(a.amplitude - std::conj(b.amplitude)) < 1e-8) {
    paired = true;
  }
  CHECK(paired);
}

TEST_CASE("mode synthesis parameter identities") {
  ExponentialSum es{{{Complex(0.25), Complex(-0.1, -3.0)}}};
  const PseudomodeParams p = to_pseudomodes(es, 5);
  REQUIRE(p.modes.size() == 1);
  CHECK(p.modes[0].omega == doctest::Approx(3.0));
  CHECK(p.modes[0].gamma == doctest::Approx(0.2));
  CHECK(p.modes[0].n_max == 5);
  CHECK(p.couplings[0][0].real() == doctest::Approx(0.5));

  ExponentialSum empty;
  CHECK(to_pseudomodes(empty).modes.empty());

  ExponentialSum real_decay{{{Complex(1.0), Complex(-2.0)}}};
  const PseudomodeParams p2 = to_pseudomodes(real_decay);
  CHECK(p2.modes[0].omega == doctest::Approx(0.0));
  CHECK(p2.modes[0].gamma == doctest::Approx(4.0));
  CHECK(p2.couplings[0][0].real() == doctest::Approx(1.0));

  ExponentialSum complex_weight{{{Complex(0.5, 0.5), Complex(-1.0)}}};
  CHECK_THROWS_AS(to_pseudomodes(complex_weight), std::invalid_argument);
  ExponentialSum negative_weight{{{Complex(-0.5), Complex(-1.0)}}};
  CHECK_THROWS_AS(to_pseudomodes(negative_weight), std::invalid_argument);
  ExponentialSum undamped{{{Complex(0.5), Complex(0.0, 1.0)}}};
  CHECK_THROWS_AS(to_pseudomodes(undamped), std::invalid_argument);
}

TEST_CASE("degenerate exponents merge before synthesis") {
  ExponentialSum es{{{Complex(0.25), Complex(-0.5, -1.0)},
                     {Complex(0.5), Complex(-0.5, -1.0 + 1e-11)}}};
  const PseudomodeParams p = to_pseudomodes(es);
  REQUIRE(p.modes.size() == 1);
  CHECK(p.couplings[0][0].real() == doctest::Approx(std::sqrt(0.75)));
}

TEST_CASE("synthesized modes reproduce the fitted sum") {
  // hypothesis check by construction: the damped-mode two-point function of
  // the synthesized bath equals the fitted exponential sum
  ExponentialSum truth{{{Complex(0.09), Complex(-0.25, -1.0)},
                        {Complex(0.04), Complex(-0.6, 0.7)}}};
  const CorrelationSeries s = sample_sum(truth, 10.0, 80);
  auto [fit, report] = matrix_pencil_fit(s, 2);
  REQUIRE(report.max_residual < 1e-9);

  SystemModel trivial;
  trivial.d_s = 1;
  trivial.h_schedule = {{0.0, Matrix::Zero(1, 1)}};
  trivial.couplings = {Matrix::Ones(1, 1)};
  GKLSModel model(trivial, to_pseudomodes(fit, 4), {});
  for (std::size_t i = 0; i < s.grid.size(); i += 7) {
    const Complex via_modes = model.free_bath_two_time(0, 0, s.grid[i], 0.0);
    CHECK(std::abs(via_modes - evaluate(fit, s.grid[i])) < 1e-6);
  }
}

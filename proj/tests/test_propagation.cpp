#include <doctest.h>

#include <random>

#include "mtqs/exp_fitting.hpp"
#include "mtqs/propagation.hpp"

using namespace mtqs;

namespace {

const Matrix kSigmaZ = (Matrix(2, 2) << 1, 0, 0, -1).finished();
const Matrix kSigmaX = (Matrix(2, 2) << 0, 1, 1, 0).finished();
const Matrix kSigmaY = (Matrix(2, 2) << 0, Complex(0, -1), Complex(0, 1), 0)
                           .finished();
const Matrix kSigmaPlus = (Matrix(2, 2) << 0, 1, 0, 0).finished();
const Matrix kSigmaMinus = (Matrix(2, 2) << 0, 0, 1, 0).finished();
const Matrix kId2 = Matrix::Identity(2, 2);

SystemModel qubit(const Matrix& h, std::vector<Matrix> couplings = {}) {
  SystemModel s;
  s.d_s = 2;
  s.h_schedule = {{0.0, h}};
  s.couplings = std::move(couplings);
  return s;
}

GKLSModel qubit_plus_mode(double hs_scale, double omega, double gamma,
                          Complex g, int n_max) {
  PseudomodeParams bath;
  bath.modes = {{omega, gamma, n_max}};
  bath.couplings = {{g}};
  return GKLSModel(qubit(hs_scale * kSigmaZ, {kSigmaX}), bath, {});
}

Matrix plus_x_state() {
  Matrix rho(2, 2);
  rho << 0.5, 0.5, 0.5, 0.5;
  return rho;
}

std::mt19937 rng(0xabcd);

Matrix random_op(int n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = Complex(u(rng), u(rng));
  return m;
}

}  // namespace

TEST_CASE("propagate basics") {
  GKLSModel m = qubit_plus_mode(0.5, 1.0, 0.4, Complex(0.2), 8);
  MultiTimeEvaluator ev(m);

  DensityMatrix rho = m.initial_state(plus_x_state());
  const DensityMatrix same = ev.propagate(rho, 0.7, 0.7);
  CHECK((same.matrix - rho.matrix).cwiseAbs().maxCoeff() == 0.0);

  // gamma = 0 and static H: unitary conjugation
  GKLSModel mu = qubit_plus_mode(0.5, 1.0, 0.0, Complex(0.2), 8);
  MultiTimeEvaluator evu(mu);
  const DensityMatrix rho_u = mu.initial_state(plus_x_state());
  const DensityMatrix evolved = evu.propagate(rho_u, 0.0, 1.3);
  const Matrix u_t = expm(-kI * mu.build_hamiltonian(0.0) * 1.3);
  CHECK((evolved.matrix - u_t * rho_u.matrix * u_t.adjoint())
            .cwiseAbs()
            .maxCoeff() < 1e-10);
  CHECK(std::abs(evolved.matrix.trace() - Complex(1.0)) < 1e-9);
  CHECK(hermiticity_defect(evolved.matrix) < 1e-9);

  // damped mode decays from the first excited state
  SystemModel trivial;
  trivial.d_s = 1;
  trivial.h_schedule = {{0.0, Matrix::Zero(1, 1)}};
  PseudomodeParams bath;
  bath.modes = {{1.0, 0.6, 3}};
  bath.couplings = {};
  BathState fock;
  fock.kind = BathState::Kind::Fock;
  fock.occupations = {1};
  GKLSModel md(trivial, bath, fock);
  MultiTimeEvaluator evd(md);
  const DensityMatrix r0 = md.initial_state(Matrix::Ones(1, 1));
  for (double t : {0.5, 1.0, 3.0}) {
    const DensityMatrix rt = evd.propagate(r0, 0.0, t);
    CHECK(std::abs(rt.matrix(1, 1).real() - std::exp(-0.6 * t)) < 1e-10);
  }
}

TEST_CASE("propagator composition and cache consistency") {
  SystemModel s = qubit(0.5 * kSigmaZ, {kSigmaX});
  s.h_schedule.push_back({1.0, 1.1 * kSigmaZ});  // schedule switch inside
  PseudomodeParams bath;
  bath.modes = {{1.0, 0.4, 3}};
  bath.couplings = {{Complex(0.25)}};
  GKLSModel m(s, bath, {});
  MultiTimeEvaluator ev(m);

  const Matrix a = ev.interval_propagator(0.4, 0.9);
  const Matrix b = ev.interval_propagator(0.9, 1.7);
  const Matrix c = ev.interval_propagator(0.4, 1.7);
  CHECK((b * a - c).cwiseAbs().maxCoeff() < 1e-10);

  // cached segment propagator equals a fresh computation
  const Matrix fresh = expm(m.build_liouvillian(0.0) * 0.5);
  const Matrix cached = ev.interval_propagator(0.0, 0.5);
  CHECK((fresh - cached).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("truncation breach is reported with the offending mode") {
  // strong resonant driving of a tiny mode overfills the truncation
  PseudomodeParams bath;
  bath.modes = {{0.0, 0.0, 2}};
  bath.couplings = {{Complex(2.0)}};
  SystemModel s = qubit(Matrix::Zero(2, 2), {kId2});
  GKLSModel m(s, bath, {});
  MultiTimeEvaluator ev(m);
  const DensityMatrix r0 = m.initial_state(0.5 * kId2);
  try {
    ev.propagate(r0, 0.0, 2.0);
    FAIL("expected a truncation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("mode 0") != std::string::npos);
  }
}

TEST_CASE("multitime identities") {
  GKLSModel m = qubit_plus_mode(0.5, 1.0, 0.4, Complex(0.2), 7);
  MultiTimeEvaluator ev(m);

  MultiTimeRequest all_id;
  all_id.times = {0.3, 0.9, 2.0};
  for (int k = 0; k < 3; ++k) {
    all_id.left_ops.push_back(kId2);
    all_id.right_ops.push_back(kId2);
  }
  CHECK(std::abs(ev.multitime(plus_x_state(), all_id) - Complex(1.0)) < 1e-10);

  // n = 1 reduces to a single-time mean
  MultiTimeRequest single;
  single.times = {1.1};
  single.left_ops = {kSigmaZ};
  single.right_ops = {kId2};
  const DensityMatrix rho_t =
      ev.propagate(m.initial_state(plus_x_state()), 0.0, 1.1);
  const Matrix emb = kron(kSigmaZ, Matrix::Identity(m.bath_dim(), m.bath_dim()));
  CHECK(std::abs(ev.multitime(plus_x_state(), single) -
                 (emb * rho_t.matrix).trace()) < 1e-12);

  // interior identity insertions are free
  MultiTimeRequest with_id;
  with_id.times = {0.5, 1.0, 1.6};
  with_id.left_ops = {kSigmaMinus, kId2, kSigmaPlus};
  with_id.right_ops = {kId2, kId2, kId2};
  MultiTimeRequest without_id;
  without_id.times = {0.5, 1.6};
  without_id.left_ops = {kSigmaMinus, kSigmaPlus};
  without_id.right_ops = {kId2, kId2};
  CHECK(std::abs(ev.multitime(plus_x_state(), with_id) -
                 ev.multitime(plus_x_state(), without_id)) < 1e-12);
}

TEST_CASE("conjugation symmetry") {
  GKLSModel m = qubit_plus_mode(0.7, 1.2, 0.5, Complex(0.3, 0.1), 3);
  MultiTimeEvaluator ev(m);
  for (int rep = 0; rep < 5; ++rep) {
    MultiTimeRequest req;
    req.times = {0.4, 1.3};
    req.left_ops = {random_op(2), random_op(2)};
    req.right_ops = {random_op(2), random_op(2)};

    MultiTimeRequest daggered;
    daggered.times = req.times;
    daggered.left_ops = {req.right_ops[0].adjoint(), req.right_ops[1].adjoint()};
    daggered.right_ops = {req.left_ops[0].adjoint(), req.left_ops[1].adjoint()};

    const Complex a = ev.multitime(plus_x_state(), req);
    const Complex b = ev.multitime(plus_x_state(), daggered);
    CHECK(std::abs(std::conj(a) - b) < 1e-12);
  }
}

TEST_CASE("nested and superoperator-chain evaluations agree") {
  GKLSModel m = qubit_plus_mode(0.5, 1.0, 0.4, Complex(0.2, 0.05), 3);
  MultiTimeEvaluator ev(m);
  std::uniform_real_distribution<double> u(0.0, 2.5);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> times = {u(rng), u(rng), u(rng)};
    std::sort(times.begin(), times.end());
    MultiTimeRequest req;
    req.times = times;
    for (int k = 0; k < 3; ++k) {
      req.left_ops.push_back(random_op(2));
      req.right_ops.push_back(random_op(2));
    }
    const Complex nested = ev.multitime(plus_x_state(), req);
    const Complex chain = ev.multitime_chain(plus_x_state(), req);
    CHECK(std::abs(nested - chain) < 1e-12);
  }
}

TEST_CASE("two-time helper") {
  GKLSModel m = qubit_plus_mode(0.5, 1.0, 0.4, Complex(0.2), 7);
  MultiTimeEvaluator ev(m);
  CHECK(std::abs(ev.two_time(plus_x_state(), kId2, kId2, 0.7, 1.1) -
                 Complex(1.0)) < 1e-10);

  // tau = 0 is the equal-time product
  const double t = 0.9;
  const DensityMatrix rho_t =
      ev.propagate(m.initial_state(plus_x_state()), 0.0, t);
  const Matrix xy = kron((kSigmaPlus * kSigmaMinus).eval(),
                         Matrix::Identity(m.bath_dim(), m.bath_dim()));
  CHECK(std::abs(ev.two_time(plus_x_state(), kSigmaPlus, kSigmaMinus, t, 0.0) -
                 (xy * rho_t.matrix).trace()) < 1e-12);
}

TEST_CASE("resonant exchange coupling against the closed two-level form") {
  // rotating-wave exchange coupling realized with two hermitian channels:
  // sx (x) (g/2)(b + b^dag) + sy (x) (g/2) i(b - b^dag) = g(s+ b + s- b^dag)
  const double omega = 1.7, g = 0.3;
  PseudomodeParams bath;
  bath.modes = {{omega, 0.0, 3}, {omega, 0.0, 3}};
  bath.couplings.clear();
  bath.couplings = {{Complex(0.5 * g), Complex(0.0)},
                    {Complex(0.0), Complex(0.0, 0.5 * g)}};
  // both channels couple to the same mode: realize by one mode coupled twice
  PseudomodeParams bath1;
  bath1.modes = {{omega, 0.0, 3}};
  bath1.couplings = {{Complex(0.5 * g)}, {Complex(0.0, 0.5 * g)}};
  GKLSModel m(qubit(0.5 * omega * kSigmaZ, {kSigmaX, kSigmaY}), bath1, {});
  MultiTimeEvaluator ev(m);

  Matrix excited = Matrix::Zero(2, 2);
  excited(0, 0) = 1.0;
  for (double tau : {0.3, 1.0, 2.4}) {
    const Complex value = ev.two_time(excited, kSigmaPlus, kSigmaMinus, 0.0, tau);
    const Complex expected = std::exp(kI * omega * tau) * std::cos(g * tau);
    CHECK(std::abs(value - expected) < 1e-10);
  }
}

TEST_CASE("measurement sequence probabilities") {
  GKLSModel m = qubit_plus_mode(0.5, 1.0, 0.4, Complex(0.25), 4);
  MultiTimeEvaluator ev(m);
  Matrix p0 = Matrix::Zero(2, 2), p1 = Matrix::Zero(2, 2);
  p0(0, 0) = 1.0;
  p1(1, 1) = 1.0;

  // completeness at a single time
  double total = 0.0;
  for (const Matrix& p : {p0, p1}) {
    MultiTimeRequest req;
    req.times = {0.8};
    req.left_ops = {p};
    req.right_ops = {p};
    total += ev.measurement_probability(plus_x_state(), req);
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));

  // repeated projector with zero delay is idempotent
  MultiTimeRequest once;
  once.times = {0.8};
  once.left_ops = {p0};
  once.right_ops = {p0};
  MultiTimeRequest twice;
  twice.times = {0.8, 0.8};
  twice.left_ops = {p0, p0};
  twice.right_ops = {p0, p0};
  CHECK(std::abs(ev.measurement_probability(plus_x_state(), once) -
                 ev.measurement_probability(plus_x_state(), twice)) < 1e-12);

  // adjoint mismatch is rejected
  MultiTimeRequest bad;
  bad.times = {0.8};
  bad.left_ops = {kSigmaMinus};
  bad.right_ops = {kSigmaMinus};
  CHECK_THROWS_AS(ev.measurement_probability(plus_x_state(), bad),
                  std::invalid_argument);
}

TEST_CASE("emission spectrum of a bare two-level emitter") {
  // no bath coupling: dipole correlation oscillates at the level splitting
  const double omega0 = 1.5;
  PseudomodeParams bath;
  bath.modes = {{1.0, 0.5, 2}};
  bath.couplings = {{Complex(0.0)}};
  GKLSModel m(qubit(0.5 * omega0 * kSigmaZ, {kSigmaX}), bath, {});
  MultiTimeEvaluator ev(m);

  std::vector<double> tau_grid, freq_grid;
  for (int i = 0; i <= 400; ++i) tau_grid.push_back(0.05 * i);
  for (int i = 0; i <= 120; ++i) freq_grid.push_back(0.5 + 0.5 / 30.0 * i);

  Matrix excited = Matrix::Zero(2, 2);
  excited(0, 0) = 1.0;

  // zero dipole: zero spectrum
  const auto zero_spec = ev.emission_spectrum(excited, Matrix::Zero(2, 2), 0.0,
                                              tau_grid, freq_grid);
  for (double sv : zero_spec) CHECK(sv == 0.0);

  const auto spec =
      ev.emission_spectrum(excited, kSigmaMinus, 0.0, tau_grid, freq_grid);
  std::size_t argmax = 0;
  for (std::size_t i = 1; i < spec.size(); ++i) {
    if (spec[i] > spec[argmax]) argmax = i;
  }
  CHECK(std::abs(freq_grid[argmax] - omega0) < 0.5 / 30.0 + 1e-12);
}

TEST_CASE("damped emitter linewidth matches the coherence decay rate") {
  // qubit resonant with a strongly damped mode; the dipole correlation is
  // fitted with one exponential and the spectrum's half width must agree
  const double omega0 = 1.5;
  PseudomodeParams bath;
  bath.modes = {{omega0, 2.0, 4}};
  bath.couplings = {{Complex(0.3)}};
  SystemModel sys;
  sys.d_s = 2;
  sys.h_schedule = {{0.0, 0.5 * omega0 * kSigmaZ}};
  sys.couplings = {kSigmaX};
  GKLSModel m(sys, bath, {});
  MultiTimeEvaluator ev(m);

  Matrix excited = Matrix::Zero(2, 2);
  excited(0, 0) = 1.0;
  std::vector<double> tau_grid;
  for (int i = 0; i <= 1600; ++i) tau_grid.push_back(0.05 * i);
  const auto corr = ev.dipole_correlation(excited, kSigmaMinus, 0.0, tau_grid);

  CorrelationSeries series;
  series.grid = tau_grid;
  series.values = corr;
  auto [fit, report] = matrix_pencil_fit(series, 8);
  REQUIRE(report.max_residual < 1e-6);
  std::size_t dominant = 0;
  for (std::size_t k = 1; k < fit.terms.size(); ++k) {
    if (std::abs(fit.terms[k].amplitude) >
        std::abs(fit.terms[dominant].amplitude)) {
      dominant = k;
    }
  }
  const double gamma_coh = -fit.terms[dominant].exponent.real();
  REQUIRE(gamma_coh > 0.0);

  const double bin = 0.01;
  std::vector<double> freq_grid;
  for (int i = 0; i <= 200; ++i) freq_grid.push_back(omega0 - 1.0 + bin * i);
  const auto spec =
      ev.emission_spectrum(excited, kSigmaMinus, 0.0, tau_grid, freq_grid);

  std::size_t peak = 0;
  for (std::size_t i = 1; i < spec.size(); ++i) {
    if (spec[i] > spec[peak]) peak = i;
  }
  const double half = 0.5 * spec[peak];
  // linear interpolation of the half crossings on both flanks
  auto crossing = [&](int dir) {
    std::size_t i = peak;
    while (i > 0 && i + 1 < spec.size() && spec[i] > half) {
      i = static_cast<std::size_t>(static_cast<long>(i) + dir);
    }
    const std::size_t a = i, b = static_cast<std::size_t>(static_cast<long>(i) - dir);
    const double f =
        (half - spec[a]) / (spec[b] - spec[a]);
    return freq_grid[a] + f * (freq_grid[b] - freq_grid[a]);
  };
  const double hwhm =
      0.5 * std::abs(crossing(+1) - crossing(-1));
  CHECK(std::abs(hwhm - gamma_coh) < bin);
}

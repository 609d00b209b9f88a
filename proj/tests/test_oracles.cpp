#include <doctest.h>

#include <cmath>

#include "mtqs/oracles.hpp"

using namespace mtqs;

namespace {

const Matrix kSigmaZ = (Matrix(2, 2) << 1, 0, 0, -1).finished();
const Matrix kSigmaX = (Matrix(2, 2) << 0, 1, 1, 0).finished();
const Matrix kSigmaPlus = (Matrix(2, 2) << 0, 1, 0, 0).finished();
const Matrix kSigmaMinus = (Matrix(2, 2) << 0, 0, 1, 0).finished();
const Matrix kId2 = Matrix::Identity(2, 2);
const Matrix kPlusX = (Matrix(2, 2) << 0.5, 0.5, 0.5, 0.5).finished();

SystemModel dephasing_system(double omega0) {
  SystemModel s;
  s.d_s = 2;
  s.h_schedule = {{0.0, 0.5 * omega0 * kSigmaZ}};
  s.couplings = {kSigmaZ};
  return s;
}

GKLSModel bare_damped_mode(double omega, double gamma, int n_max, int occ) {
  SystemModel sys;
  sys.d_s = 1;
  sys.h_schedule = {{0.0, Matrix::Zero(1, 1)}};
  PseudomodeParams bath;
  bath.modes = {{omega, gamma, n_max}};
  BathState fock;
  fock.kind = BathState::Kind::Fock;
  fock.occupations = {occ};
  return GKLSModel(sys, bath, fock);
}

std::vector<double> time_grid(double t_max, int n) {
  std::vector<double> g;
  for (int i = 0; i <= n; ++i) g.push_back(t_max * i / n);
  return g;
}

}  // namespace

TEST_CASE("discretization of a lorentzian line") {
  auto sd = SpectralDensity::lorentzian(0.15, 1.0, 0.5);
  const auto bath =
      discretize_spectral_density(sd, 1.0 - 5.0, 1.0 + 5.0, 400, 2, 10.0);
  CHECK(bath.correlation_sup_error < 1e-3);
  CHECK(bath.modes.size() == 400);
  CHECK(bath.mass_fraction > 0.95);

  CHECK_THROWS_AS(discretize_spectral_density(sd, -4.0, 6.0, 1, 2, 5.0),
                  std::invalid_argument);

  auto zero = SpectralDensity::lorentzian(0.0, 1.0, 0.5);
  const auto none =
      discretize_spectral_density(zero, -4.0, 6.0, 16, 2, 5.0);
  for (const auto& m : none.modes) CHECK(m.g == 0.0);

  // a window missing most of the support is rejected
  auto oh = SpectralDensity::ohmic(0.4, 1.0);
  CHECK_THROWS_AS(discretize_spectral_density(oh, 0.0, 0.5, 16, 2, 5.0),
                  std::invalid_argument);
}

TEST_CASE("unitary oracle identities and resource cap") {
  SystemModel sys = dephasing_system(1.0);
  auto sd = SpectralDensity::lorentzian(0.2, 1.0, 0.5);
  const auto bath = discretize_spectral_density(sd, -4.0, 6.0, 5, 3, 3.0);
  const auto cfg = unitary_config_from_bath(sys, {bath});

  MultiTimeRequest all_id;
  all_id.times = {0.5, 1.5};
  all_id.left_ops = {kId2, kId2};
  all_id.right_ops = {kId2, kId2};
  const auto r = multitime_unitary(cfg, kPlusX, all_id, UnitaryPath::Dense);
  CHECK(std::abs(r.value - Complex(1.0)) < 1e-12);

  // a large non-commuting product space is refused
  SystemModel sys_x = sys;
  sys_x.couplings = {kSigmaX};
  auto big = bath;
  big.modes.clear();
  for (int i = 0; i < 40; ++i) big.modes.push_back({1.0 + 0.01 * i, 0.01, 2});
  auto cfg_big = unitary_config_from_bath(sys_x, {big});
  CHECK_THROWS_AS(multitime_unitary(cfg_big, kPlusX, all_id),
                  std::invalid_argument);
}

TEST_CASE("undamped single-mode bath matches the damped-generator route") {
  // same physical model evaluated through the two code paths
  const double omega = 1.3, g = 0.3;
  SystemModel sys;
  sys.d_s = 2;
  sys.h_schedule = {{0.0, 0.5 * kSigmaZ}};
  sys.couplings = {kSigmaX};

  PseudomodeParams pm;
  pm.modes = {{omega, 0.0, 5}};
  pm.couplings = {{Complex(g)}};
  GKLSModel model(sys, pm, {});
  MultiTimeEvaluator ev(model);

  UnitaryConfig cfg;
  cfg.system = sys;
  cfg.channels = {{kSigmaX, {{omega, g, 5}}}};

  MultiTimeRequest req;
  req.times = {0.6, 1.7};
  req.left_ops = {kSigmaMinus, kSigmaPlus};
  req.right_ops = {kId2, kId2};

  const Complex via_gkls = ev.multitime(kPlusX, req);
  const auto via_unitary = multitime_unitary(cfg, kPlusX, req, UnitaryPath::Dense);
  CHECK(std::abs(via_gkls - via_unitary.value) < 1e-10);
}

TEST_CASE("excited-state decay into a flat band tracks the golden-rule rate") {
  const double j0 = 0.004, w0 = 2.5;
  SystemModel sys;
  sys.d_s = 2;
  sys.h_schedule = {{0.0, 0.5 * w0 * kSigmaZ}};
  sys.couplings = {kSigmaX};
  auto sd = SpectralDensity::tabulated({w0 - 2.0, w0 + 2.0}, {j0, j0});
  const auto bath = discretize_spectral_density(sd, w0 - 2.0, w0 + 2.0, 8, 2, 4.0);
  const auto cfg = unitary_config_from_bath(sys, {bath});

  Matrix excited = Matrix::Zero(2, 2);
  excited(0, 0) = 1.0;
  const double rate = 2.0 * M_PI * j0;
  for (double t : {2.0, 4.0}) {
    MultiTimeRequest req;
    req.times = {t};
    req.left_ops = {excited};
    req.right_ops = {kId2};
    const auto r = multitime_unitary(cfg, excited, req, UnitaryPath::Dense);
    const double rate_est = -std::log(r.value.real()) / t;
    CHECK(std::abs(rate_est / rate - 1.0) < 0.2);
  }
}

TEST_CASE("dense and factorized routes agree for commuting couplings") {
  SystemModel sys = dephasing_system(1.0);
  auto sd = SpectralDensity::lorentzian(0.3, 1.0, 0.5);
  const auto bath = discretize_spectral_density(sd, -4.0, 6.0, 5, 3, 3.0);
  const auto cfg = unitary_config_from_bath(sys, {bath});

  MultiTimeRequest req;
  req.times = {0.8, 2.3};
  req.left_ops = {kSigmaMinus, kSigmaPlus};
  req.right_ops = {kId2, kId2};

  const auto dense = multitime_unitary(cfg, kPlusX, req, UnitaryPath::Dense);
  const auto fact = multitime_unitary(cfg, kPlusX, req, UnitaryPath::Factorized);
  CHECK_FALSE(dense.used_factorized);
  CHECK(fact.used_factorized);
  CHECK(std::abs(dense.value - fact.value) < 1e-12);

  // the factorized route requires commuting couplings
  SystemModel sys_x = sys;
  sys_x.couplings = {kSigmaX};
  const auto cfg_x = unitary_config_from_bath(sys_x, {bath});
  CHECK_THROWS_AS(multitime_unitary(cfg_x, kPlusX, req, UnitaryPath::Factorized),
                  std::invalid_argument);
}

TEST_CASE("dilation construction") {
  // gamma = 0: the input field decouples entirely
  GKLSModel undamped = bare_damped_mode(1.0, 0.0, 3, 1);
  DilationParams p;
  p.n_modes = 50;
  const auto cfg0 = build_dilation(undamped, p);
  CHECK(cfg0.channels.empty());
  const auto res0 =
      verify_lemma1(undamped, Matrix::Ones(1, 1), 20.0, {50}, time_grid(4.0, 20));
  CHECK(res0[0].max_deviation < 1e-10);

  GKLSModel damped = bare_damped_mode(0.0, 0.5, 3, 1);
  const auto cfg = build_dilation(damped, p);
  REQUIRE(cfg.channels.size() == 1);
  CHECK(cfg.channels[0].modes.size() == 50);
  // coupling operator is anti-hermitian times the annihilator scale
  CHECK(hermiticity_defect(cfg.channels[0].op + cfg.channels[0].op.adjoint()) <
        1e-14);

  // occupation decay follows e^{-gamma t} within the discretization floor
  const auto res =
      verify_lemma1(damped, Matrix::Ones(1, 1), 20.0, {300}, time_grid(4.0, 20));
  CHECK(res[0].max_deviation < 2e-2);

  // a very coarse input field is a controlled failure
  const auto bad =
      verify_lemma1(damped, Matrix::Ones(1, 1), 20.0, {3}, time_grid(4.0, 20));
  CHECK(bad[0].max_deviation > 0.1);
}

TEST_CASE("reduced-state checks refine with the input-field resolution") {
  GKLSModel m = bare_damped_mode(1.0, 0.5, 3, 1);
  const auto grid = time_grid(4.0, 20);

  // recurrence-limited regime: doubling the mode count at least halves the
  // deviation
  const auto ladder =
      verify_lemma1(m, Matrix::Ones(1, 1), 20.0, {10, 20, 40}, grid);
  CHECK(ladder[0].max_deviation > 2.0 * ladder[1].max_deviation);
  CHECK(ladder[1].max_deviation > 2.0 * ladder[2].max_deviation);

  // joint window/mode refinement keeps decreasing through the window floor
  double prev = 1e9;
  for (const auto& [w, mm] :
       std::vector<std::pair<double, int>>{{10.0, 150}, {20.0, 300}, {40.0, 600}}) {
    const auto lv = verify_lemma1(m, Matrix::Ones(1, 1), w, {mm}, grid);
    CHECK(lv[0].max_deviation < prev);
    prev = lv[0].max_deviation;
  }
  CHECK(prev < 1e-2);
}

TEST_CASE("sector and dense dilation routes agree") {
  // same bath physics; d_s = 2 with no coupling forces the dense route
  PseudomodeParams bath;
  bath.modes = {{1.0, 0.5, 3}};
  BathState fock;
  fock.kind = BathState::Kind::Fock;
  fock.occupations = {1};

  SystemModel s1;
  s1.d_s = 1;
  s1.h_schedule = {{0.0, Matrix::Zero(1, 1)}};
  GKLSModel sector_model(s1, bath, fock);

  SystemModel s2;
  s2.d_s = 2;
  s2.h_schedule = {{0.0, Matrix::Zero(2, 2)}};
  GKLSModel dense_model(s2, bath, fock);

  const auto grid = time_grid(2.0, 8);
  const auto a = verify_lemma1(sector_model, Matrix::Ones(1, 1), 6.0, {6}, grid);
  Matrix pure = Matrix::Zero(2, 2);
  pure(0, 0) = 1.0;
  const auto b = verify_lemma1(dense_model, pure, 6.0, {6}, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(std::abs(a[0].per_time[i] - b[0].per_time[i]) < 1e-10);
  }
}

TEST_CASE("free-field correlation of the dilation") {
  SystemModel sys;
  sys.d_s = 1;
  sys.h_schedule = {{0.0, Matrix::Zero(1, 1)}};
  sys.couplings = {Matrix::Ones(1, 1)};
  PseudomodeParams bath;
  bath.modes = {{1.0, 0.5, 3}};
  bath.couplings = {{Complex(0.3)}};
  GKLSModel m(sys, bath, {});
  const auto grid = time_grid(4.0, 20);

  // zero coupling: both correlation functions vanish identically
  PseudomodeParams b0 = bath;
  b0.couplings = {{Complex(0.0)}};
  GKLSModel m0(sys, b0, {});
  const auto r0 = verify_lemma2(m0, 0, 0, 20.0, {100}, grid);
  CHECK(r0[0].max_deviation < 1e-14);

  const auto res = verify_lemma2(m, 0, 0, 20.0, {150, 300}, grid);
  // the equal-time point carries no dynamics and is exact
  CHECK(res[0].per_time[0] < 1e-10);
  CHECK(res[1].max_deviation <= res[0].max_deviation);
  CHECK(res[1].max_deviation < 2e-2);

  const auto coarse = verify_lemma2(m, 0, 0, 20.0, {3}, grid);
  CHECK(coarse[0].max_deviation > 0.05);
}

TEST_CASE("second-cumulant reference matches the damped-mode evaluation") {
  const double om = 1.3, gam = 0.7, g = 0.25;
  SystemModel sys = dephasing_system(1.0);
  PseudomodeParams bath;
  bath.modes = {{om, gam, 10}};
  bath.couplings = {{Complex(g)}};
  GKLSModel model(sys, bath, {});
  MultiTimeEvaluator ev(model);

  MultiTimeRequest req;
  req.times = {1.0, 3.0};
  req.left_ops = {kSigmaMinus, kSigmaPlus};
  req.right_ops = {kId2, kId2};

  auto corr = [&](double tau) {
    const double at = std::abs(tau);
    const Complex c = g * g * std::exp(Complex(-0.5 * gam, -om) * at);
    return tau >= 0 ? c : std::conj(c);
  };
  const auto ref = dephasing_reference(corr, sys, kPlusX, req);
  REQUIRE(ref.has_value());
  CHECK(std::abs(ev.multitime(kPlusX, req) - *ref) < 1e-8);

  // equal times reduce to the excited population
  MultiTimeRequest eq;
  eq.times = {1.4, 1.4};
  eq.left_ops = req.left_ops;
  eq.right_ops = req.right_ops;
  const auto ref_eq = dephasing_reference(corr, sys, kPlusX, eq);
  REQUIRE(ref_eq.has_value());
  CHECK(std::abs(*ref_eq - Complex(0.5)) < 1e-10);

  // pattern mismatches are declined
  SystemModel sys_x = sys;
  sys_x.couplings = {kSigmaX};
  CHECK_FALSE(dephasing_reference(corr, sys_x, kPlusX, req).has_value());
  MultiTimeRequest other = req;
  other.left_ops = {kSigmaZ, kSigmaPlus};
  CHECK_FALSE(dephasing_reference(corr, sys, kPlusX, other).has_value());
}

TEST_CASE("equivalence pipeline end to end") {
  TheoremParams p;
  p.sd = SpectralDensity::lorentzian(0.2, 1.0, 0.5);
  p.fit_order = 1;
  for (int i = 0; i <= 100; ++i) p.fit_grid.push_back(0.1 * i);
  p.system = dephasing_system(1.0);
  p.rho_s = kPlusX;
  p.request.times = {1.0, 3.0};
  p.request.left_ops = {kSigmaMinus, kSigmaPlus};
  p.request.right_ops = {kId2, kId2};
  p.window_lo = -4.0;
  p.window_hi = 6.0;
  p.n_modes = 200;
  p.mode_n_max = 4;
  p.pseudomode_n_max = 8;

  const auto r = verify_theorem(p);
  CHECK(r.fit.max_residual < 1e-10);
  CHECK(r.pass);
  CHECK(r.used_factorized);
  CHECK(r.delta_unitary <= r.discretization_estimate);
  REQUIRE(r.analytic_value.has_value());
  CHECK(r.delta_analytic < 1e-6);

  // identity request: both sides give exactly 1
  TheoremParams pid = p;
  pid.request.left_ops = {kId2, kId2};
  const auto rid = verify_theorem(pid);
  CHECK(std::abs(rid.gkls_value - Complex(1.0)) < 1e-12);
  CHECK(std::abs(rid.unitary_value - Complex(1.0)) < 1e-12);
  CHECK(rid.delta_unitary < 1e-12);

  // hypothesis violation: the mismatch dwarfs the reported error budget
  TheoremParams pneg = p;
  pneg.gamma_scale = 1.5;
  const auto rneg = verify_theorem(pneg);
  CHECK_FALSE(rneg.pass);
  CHECK(rneg.delta_unitary > 10.0 * r.error_estimate);
}

TEST_CASE("thermal initial states agree between the two code paths") {
  const double omega = 1.4, g = 0.2, temp = 1.1;
  SystemModel sys;
  sys.d_s = 2;
  sys.h_schedule = {{0.0, 0.5 * kSigmaZ}};
  sys.couplings = {kSigmaX};

  BathState th;
  th.kind = BathState::Kind::Thermal;
  th.temperature = temp;

  PseudomodeParams pm;
  pm.modes = {{omega, 0.0, 7}};
  pm.couplings = {{Complex(g)}};
  GKLSModel model(sys, pm, th);
  MultiTimeEvaluator ev(model);

  UnitaryConfig cfg;
  cfg.system = sys;
  cfg.channels = {{kSigmaX, {{omega, g, 7}}}};
  cfg.initial_bath = th;

  MultiTimeRequest req;
  req.times = {0.5, 1.3};
  req.left_ops = {kSigmaMinus, kSigmaPlus};
  req.right_ops = {kId2, kId2};
  const Complex via_gkls = ev.multitime(kPlusX, req);
  const auto via_unitary = multitime_unitary(cfg, kPlusX, req, UnitaryPath::Dense);
  CHECK(std::abs(via_gkls - via_unitary.value) < 1e-10);
}

TEST_CASE("joint window and mode refinement of the free-field correlation") {
  SystemModel sys;
  sys.d_s = 1;
  sys.h_schedule = {{0.0, Matrix::Zero(1, 1)}};
  sys.couplings = {Matrix::Ones(1, 1)};
  PseudomodeParams bath;
  bath.modes = {{1.0, 0.5, 3}};
  bath.couplings = {{Complex(0.3)}};
  GKLSModel m(sys, bath, {});
  const auto grid = time_grid(4.0, 20);

  double prev = 1e9;
  for (const auto& [w, mm] :
       std::vector<std::pair<double, int>>{{10.0, 150}, {20.0, 300}, {40.0, 600}}) {
    const auto lv = verify_lemma2(m, 0, 0, w, {mm}, grid);
    CHECK(lv[0].max_deviation < prev);
    prev = lv[0].max_deviation;
  }
}

TEST_CASE("projective sequences agree across the two configurations") {
  // dephasing model with an exactly representable continuum line
  SystemModel sys = dephasing_system(1.0);
  auto sd = SpectralDensity::lorentzian(0.2, 1.0, 0.5);

  PseudomodeParams pm;
  pm.modes = {{1.0, 0.5, 8}};
  pm.couplings = {{Complex(0.2)}};
  GKLSModel model(sys, pm, {});
  MultiTimeEvaluator ev(model);

  const Matrix p_plus = kPlusX;  // projector onto the +x eigenstate
  Matrix p0 = Matrix::Zero(2, 2);
  p0(0, 0) = 1.0;
  MultiTimeRequest req;
  req.times = {1.0, 2.5};
  req.left_ops = {p_plus, p0};
  req.right_ops = {p_plus, p0};
  const double prob = ev.measurement_probability(kPlusX, req);
  CHECK(prob > 0.0);
  CHECK(prob < 1.0);

  const auto bath =
      discretize_spectral_density(sd, 1.0 - 25.0, 1.0 + 25.0, 8000, 4, 3.0);
  const auto r =
      multitime_unitary(unitary_config_from_bath(sys, {bath}), kPlusX, req);
  CHECK(r.used_factorized);
  CHECK(std::abs(r.value.imag()) < 1e-10);
  CHECK(std::abs(r.value.real() - prob) < 1e-6);
}

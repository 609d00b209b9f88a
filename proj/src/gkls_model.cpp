#include "mtqs/gkls_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace mtqs {

void SystemModel::validate() const {
  if (d_s < 1) throw std::invalid_argument("system: dimension must be >= 1");
  if (h_schedule.empty()) {
    throw std::invalid_argument("system: empty hamiltonian schedule");
  }
  if (h_schedule.front().t_start != 0.0) {
    throw std::invalid_argument("system: schedule must start at t = 0");
  }
  for (std::size_t i = 0; i < h_schedule.size(); ++i) {
    const auto& e = h_schedule[i];
    if (i > 0 && e.t_start <= h_schedule[i - 1].t_start) {
      throw std::invalid_argument("system: schedule times must increase");
    }
    if (e.h.rows() != d_s || e.h.cols() != d_s) {
      throw std::invalid_argument("system: hamiltonian dimension mismatch");
    }
    if (!is_hermitian(e.h)) {
      throw std::invalid_argument("system: hamiltonian is not hermitian");
    }
  }
  if (couplings.size() > static_cast<std::size_t>(d_s) * d_s) {
    throw std::invalid_argument(
        "system: more coupling channels than d_s^2");
  }
  for (const auto& a : couplings) {
    if (a.rows() != d_s || a.cols() != d_s) {
      throw std::invalid_argument("system: coupling dimension mismatch");
    }
    if (!is_hermitian(a)) {
      throw std::invalid_argument("system: coupling operator not hermitian");
    }
  }
}

int SystemModel::segment_index(double t) const {
  int idx = 0;
  for (std::size_t i = 0; i < h_schedule.size(); ++i) {
    if (h_schedule[i].t_start <= t) idx = static_cast<int>(i);
  }
  return idx;
}

const Matrix& SystemModel::hamiltonian_at(double t) const {
  return h_schedule[static_cast<std::size_t>(segment_index(t))].h;
}

std::vector<double> SystemModel::switch_times(double t_from,
                                              double t_to) const {
  std::vector<double> out;
  for (const auto& e : h_schedule) {
    if (e.t_start > t_from && e.t_start < t_to) out.push_back(e.t_start);
  }
  return out;
}

void PseudomodeParams::validate() const {
  for (const auto& m : modes) {
    if (m.gamma < 0.0) {
      throw std::invalid_argument("pseudomode: gamma must be >= 0");
    }
    if (m.n_max < 2) {
      throw std::invalid_argument("pseudomode: n_max must be >= 2");
    }
  }
  for (const auto& ch : couplings) {
    if (ch.size() != modes.size()) {
      throw std::invalid_argument(
          "pseudomode: coupling list length must equal the mode count");
    }
  }
  if (mode_mode) {
    const auto& c = *mode_mode;
    if (c.rows() != static_cast<Eigen::Index>(modes.size()) ||
        c.cols() != static_cast<Eigen::Index>(modes.size())) {
      throw std::invalid_argument("pseudomode: mode_mode dimension mismatch");
    }
    if (!is_hermitian(c)) {
      throw std::invalid_argument("pseudomode: mode_mode must be hermitian");
    }
  }
}

double bose_occupation(double omega, double temperature) {
  if (temperature <= 0.0) return 0.0;
  return 1.0 / std::expm1(omega / temperature);
}

namespace {

std::string mode_label(std::size_t k) { return "B" + std::to_string(k); }

SpaceLayout make_layout(int d_s, const PseudomodeParams& bath,
                        bool with_system) {
  std::vector<SpaceFactor> factors;
  if (with_system) factors.push_back({"S", d_s});
  for (std::size_t k = 0; k < bath.modes.size(); ++k) {
    factors.push_back({mode_label(k), bath.modes[k].n_max});
  }
  return SpaceLayout(factors);
}

}  // namespace

GKLSModel::GKLSModel(SystemModel system, PseudomodeParams bath,
                     BathState initial)
    : system_(std::move(system)),
      bath_(std::move(bath)),
      initial_(std::move(initial)),
      layout_(make_layout(system_.d_s, bath_, true)),
      bath_layout_(make_layout(system_.d_s, bath_, false)) {
  system_.validate();
  bath_.validate();
  if (system_.couplings.size() != bath_.couplings.size()) {
    throw std::invalid_argument(
        "model: system and bath channel counts differ");
  }
  switch (initial_.kind) {
    case BathState::Kind::Vacuum:
      break;
    case BathState::Kind::Thermal:
      if (initial_.temperature <= 0.0) {
        throw std::invalid_argument(
            "model: thermal initial state needs temperature > 0");
      }
      for (const auto& m : bath_.modes) {
        if (m.omega <= 0.0) {
          throw std::invalid_argument(
              "model: thermal initial state needs positive mode frequencies");
        }
      }
      break;
    case BathState::Kind::Fock:
      if (initial_.occupations.size() != bath_.modes.size()) {
        throw std::invalid_argument(
            "model: fock occupations must list one entry per mode");
      }
      for (std::size_t k = 0; k < bath_.modes.size(); ++k) {
        if (initial_.occupations[k] < 0 ||
            initial_.occupations[k] >= bath_.modes[k].n_max) {
          throw std::invalid_argument(
              "model: fock occupation outside the mode truncation");
        }
      }
      break;
  }
}

Matrix GKLSModel::bath_hamiltonian() const {
  const int dim = bath_layout_.total_dim();
  Matrix h = Matrix::Zero(dim, dim);
  for (std::size_t k = 0; k < bath_.modes.size(); ++k) {
    const auto& m = bath_.modes[k];
    h += m.omega *
         embed(number_operator(m.n_max), mode_label(k), bath_layout_);
  }
  if (bath_.mode_mode) {
    const auto& c = *bath_.mode_mode;
    for (std::size_t k = 0; k < bath_.modes.size(); ++k) {
      for (std::size_t l = 0; l < bath_.modes.size(); ++l) {
        if (k == l || c(k, l) == Complex(0)) continue;
        const Matrix bk_dag =
            embed(creation(bath_.modes[k].n_max), mode_label(k), bath_layout_);
        const Matrix bl =
            embed(annihilation(bath_.modes[l].n_max), mode_label(l),
                  bath_layout_);
        h += c(k, l) * bk_dag * bl;
      }
    }
  }
  return h;
}

Matrix GKLSModel::channel_bath_operator(std::size_t j) const {
  if (j >= bath_.couplings.size()) {
    throw std::invalid_argument("channel index out of range");
  }
  const int dim = bath_layout_.total_dim();
  Matrix f = Matrix::Zero(dim, dim);
  for (std::size_t k = 0; k < bath_.modes.size(); ++k) {
    const Complex g = bath_.couplings[j][k];
    if (g == Complex(0)) continue;
    const Matrix b =
        embed(annihilation(bath_.modes[k].n_max), mode_label(k), bath_layout_);
    f += g * b + std::conj(g) * b.adjoint();
  }
  return f;
}

std::vector<LindbladChannel> GKLSModel::lindblad_channels() const {
  std::vector<LindbladChannel> out;
  const bool thermal = initial_.kind == BathState::Kind::Thermal;
  for (std::size_t k = 0; k < bath_.modes.size(); ++k) {
    const auto& m = bath_.modes[k];
    if (m.gamma == 0.0) continue;
    const Matrix b =
        embed(annihilation(m.n_max), mode_label(k), bath_layout_);
    if (thermal) {
      const double nbar = bose_occupation(m.omega, initial_.temperature);
      out.push_back({m.gamma * (nbar + 1.0), b});
      out.push_back({m.gamma * nbar, b.adjoint()});
    } else {
      out.push_back({m.gamma, b});
    }
  }
  return out;
}

Matrix GKLSModel::build_hamiltonian(double t) const {
  if (t < 0.0) throw std::invalid_argument("build_hamiltonian: t must be >= 0");
  const Matrix id_b =
      Matrix::Identity(bath_layout_.total_dim(), bath_layout_.total_dim());
  const Matrix id_s = Matrix::Identity(system_.d_s, system_.d_s);
  Matrix h = kron(system_.hamiltonian_at(t), id_b);
  h += kron(id_s, bath_hamiltonian());
  for (std::size_t j = 0; j < system_.couplings.size(); ++j) {
    h += kron(system_.couplings[j], channel_bath_operator(j));
  }
  return h;
}

Matrix liouvillian_matrix(const Matrix& h,
                          const std::vector<LindbladChannel>& channels) {
  const Eigen::Index d = h.rows();
  const Matrix id = Matrix::Identity(d, d);
  Matrix l = -kI * (kron(id, h) - kron(h.transpose(), id));
  for (const auto& ch : channels) {
    const Matrix ldl = ch.op.adjoint() * ch.op;
    l += ch.rate * (kron(ch.op.conjugate(), ch.op) -
                    0.5 * kron(id, ldl) - 0.5 * kron(ldl.transpose(), id));
  }
  return l;
}

Matrix GKLSModel::build_liouvillian(double t) const {
  std::vector<LindbladChannel> full;
  const Matrix id_s = Matrix::Identity(system_.d_s, system_.d_s);
  for (const auto& ch : lindblad_channels()) {
    full.push_back({ch.rate, kron(id_s, ch.op)});
  }
  return liouvillian_matrix(build_hamiltonian(t), full);
}

Matrix GKLSModel::build_free_bath_generator() const {
  return liouvillian_matrix(bath_hamiltonian(), lindblad_channels());
}

Matrix GKLSModel::initial_bath_density() const {
  Matrix rho = Matrix::Identity(1, 1);
  for (std::size_t k = 0; k < bath_.modes.size(); ++k) {
    const auto& m = bath_.modes[k];
    Matrix mode = Matrix::Zero(m.n_max, m.n_max);
    switch (initial_.kind) {
      case BathState::Kind::Vacuum:
        mode(0, 0) = 1.0;
        break;
      case BathState::Kind::Thermal: {
        // geometric occupation truncated at n_max, renormalized
        const double q = std::exp(-m.omega / initial_.temperature);
        double norm = 0.0;
        for (int n = 0; n < m.n_max; ++n) norm += std::pow(q, n);
        for (int n = 0; n < m.n_max; ++n) mode(n, n) = std::pow(q, n) / norm;
        break;
      }
      case BathState::Kind::Fock:
        mode(initial_.occupations[k], initial_.occupations[k]) = 1.0;
        break;
    }
    rho = kron(rho, mode);
  }
  return rho;
}

DensityMatrix GKLSModel::initial_state(const Matrix& rho_s) const {
  if (rho_s.rows() != system_.d_s || rho_s.cols() != system_.d_s) {
    throw std::invalid_argument("initial_state: system state dimension");
  }
  DensityMatrix rho{layout_, kron(rho_s, initial_bath_density())};
  validate_state(rho);
  return rho;
}

Complex GKLSModel::free_bath_one_time(std::size_t j, double t) const {
  if (t < 0.0) throw std::invalid_argument("free_bath_one_time: t >= 0");
  const Matrix prop = expm(build_free_bath_generator() * t);
  const Vector evolved = prop * vectorize(initial_bath_density());
  return (channel_bath_operator(j) * devectorize(evolved)).trace();
}

Complex GKLSModel::free_bath_two_time(std::size_t j, std::size_t jp, double t,
                                      double s) const {
  return free_bath_two_time_checked(j, jp, t, s, nullptr);
}

Complex GKLSModel::free_bath_two_time_checked(std::size_t j, std::size_t jp,
                                              double t, double s,
                                              double* max_top_weight) const {
  if (t < 0.0 || s < 0.0) {
    throw std::invalid_argument("free_bath_two_time: t, s >= 0");
  }
  const Matrix gen = build_free_bath_generator();
  Vector x = vectorize(initial_bath_density());
  if (s > 0.0) x = expm(gen * s) * x;
  x = vectorize(channel_bath_operator(jp) * devectorize(x));
  if (t > 0.0) x = expm(gen * t) * x;
  const Matrix evolved = devectorize(x);
  if (max_top_weight) {
    const auto weights = top_state_weights(evolved);
    *max_top_weight =
        weights.empty() ? 0.0 : *std::max_element(weights.begin(), weights.end());
  }
  return (channel_bath_operator(j) * evolved).trace();
}

std::vector<Complex> GKLSModel::free_bath_correlation_series(
    std::size_t j, std::size_t jp, const std::vector<double>& grid) const {
  if (grid.empty()) {
    throw std::invalid_argument("free_bath_correlation_series: empty grid");
  }
  const Matrix gen = build_free_bath_generator();
  const Matrix f_j = channel_bath_operator(j);
  Vector x = vectorize(channel_bath_operator(jp) * initial_bath_density());

  bool uniform = grid.size() >= 2 && grid.front() >= 0.0;
  double dt = uniform ? grid[1] - grid[0] : 0.0;
  for (std::size_t i = 1; uniform && i < grid.size(); ++i) {
    if (std::abs(grid[i] - grid[i - 1] - dt) > 1e-12 * std::max(1.0, dt)) {
      uniform = false;
    }
  }

  std::vector<Complex> out;
  out.reserve(grid.size());
  if (uniform) {
    if (grid.front() > 0.0) x = expm(gen * grid.front()) * x;
    const Matrix step = expm(gen * dt);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (i > 0) x = step * x;
      out.push_back((f_j * devectorize(x)).trace());
    }
  } else {
    for (double t : grid) {
      out.push_back(free_bath_two_time(j, jp, t, 0.0));
    }
  }
  return out;
}

std::pair<Complex, Complex> GKLSModel::wick_four_point_check(
    std::size_t j, const std::array<double, 4>& times) const {
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (times[i] < times[i - 1]) {
      throw std::invalid_argument("wick check: times must be non-decreasing");
    }
  }
  if (times[0] < 0.0) {
    throw std::invalid_argument("wick check: times must be >= 0");
  }
  const Matrix gen = build_free_bath_generator();
  const Matrix f = channel_bath_operator(j);

  Vector x = vectorize(initial_bath_density());
  double prev = 0.0;
  for (double tk : times) {
    if (tk > prev) x = expm(gen * (tk - prev)) * x;
    x = vectorize(f * devectorize(x));
    prev = tk;
  }
  const Complex lhs = devectorize(x).trace();

  auto c2 = [&](double ta, double tb) {
    return free_bath_two_time(j, j, ta - tb, tb);
  };
  const Complex rhs = c2(times[3], times[2]) * c2(times[1], times[0]) +
                      c2(times[3], times[1]) * c2(times[2], times[0]) +
                      c2(times[3], times[0]) * c2(times[2], times[1]);
  return {lhs, rhs};
}

std::vector<double> GKLSModel::top_state_weights(const Matrix& bath_op) const {
  std::vector<double> out;
  double total = 0.0;
  for (Eigen::Index i = 0; i < bath_op.rows(); ++i) {
    total += std::abs(bath_op(i, i));
  }
  if (total <= 0.0) total = 1.0;
  for (std::size_t k = 0; k < bath_.modes.size(); ++k) {
    const Matrix top = [&] {
      const int nm = bath_.modes[k].n_max;
      Matrix p = Matrix::Zero(nm, nm);
      p(nm - 1, nm - 1) = 1.0;
      return embed(p, mode_label(k), bath_layout_);
    }();
    double w = 0.0;
    for (Eigen::Index i = 0; i < bath_op.rows(); ++i) {
      if (top(i, i).real() > 0.5) w += std::abs(bath_op(i, i));
    }
    out.push_back(w / total);
  }
  return out;
}

std::vector<double> GKLSModel::top_state_weights_full(
    const Matrix& full_op) const {
  std::vector<double> out;
  double total = 0.0;
  for (Eigen::Index i = 0; i < full_op.rows(); ++i) {
    total += std::abs(full_op(i, i));
  }
  if (total <= 0.0) total = 1.0;
  for (std::size_t k = 0; k < bath_.modes.size(); ++k) {
    const int nm = bath_.modes[k].n_max;
    Matrix p = Matrix::Zero(nm, nm);
    p(nm - 1, nm - 1) = 1.0;
    const Matrix top = embed(p, mode_label(k), layout_);
    double w = 0.0;
    for (Eigen::Index i = 0; i < full_op.rows(); ++i) {
      if (top(i, i).real() > 0.5) w += std::abs(full_op(i, i));
    }
    out.push_back(w / total);
  }
  return out;
}

}  // namespace mtqs

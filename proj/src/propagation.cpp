#include "mtqs/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mtqs {

void MultiTimeRequest::validate(int d_s) const {
  if (times.empty()) {
    throw std::invalid_argument("request: needs at least one time");
  }
  if (left_ops.size() != times.size() || right_ops.size() != times.size()) {
    throw std::invalid_argument(
        "request: times and operator lists must have equal length");
  }
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < 0.0 || (i > 0 && times[i] < times[i - 1])) {
      throw std::invalid_argument(
          "request: times must be non-decreasing and >= 0");
    }
    if (left_ops[i].rows() != d_s || left_ops[i].cols() != d_s ||
        right_ops[i].rows() != d_s || right_ops[i].cols() != d_s) {
      throw std::invalid_argument(
          "request: operators must act on the system factor");
    }
  }
}

MultiTimeEvaluator::MultiTimeEvaluator(const GKLSModel& model,
                                       double truncation_tol)
    : model_(model), truncation_tol_(truncation_tol) {}

Matrix MultiTimeEvaluator::segment_propagator(int segment,
                                              double duration) const {
  const int dim2 = model_.total_dim() * model_.total_dim();
  if (duration == 0.0) return Matrix::Identity(dim2, dim2);
  {
    std::lock_guard<std::mutex> lock(mutex_);
    const auto it = cache_.find({segment, duration});
    if (it != cache_.end()) return it->second;
  }
  Matrix gen;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = generators_.find(segment);
    if (it == generators_.end()) {
      const double t_seg =
          model_.system().h_schedule[static_cast<std::size_t>(segment)].t_start;
      it = generators_.emplace(segment, model_.build_liouvillian(t_seg)).first;
    }
    gen = it->second;
  }
  Matrix prop = expm(gen * duration);
  std::lock_guard<std::mutex> lock(mutex_);
  return cache_.emplace(std::make_pair(segment, duration), std::move(prop))
      .first->second;
}

Matrix MultiTimeEvaluator::interval_propagator(double t_from,
                                               double t_to) const {
  if (t_to < t_from || t_from < 0.0) {
    throw std::invalid_argument("propagator: need t_to >= t_from >= 0");
  }
  const int dim2 = model_.total_dim() * model_.total_dim();
  Matrix prop = Matrix::Identity(dim2, dim2);
  double cursor = t_from;
  auto switches = model_.system().switch_times(t_from, t_to);
  switches.push_back(t_to);
  for (double edge : switches) {
    if (edge > cursor) {
      const int seg = model_.system().segment_index(cursor);
      prop = segment_propagator(seg, edge - cursor) * prop;
      cursor = edge;
    }
  }
  return prop;
}

Matrix MultiTimeEvaluator::embed_system(const Matrix& op) const {
  return kron(op, Matrix::Identity(model_.bath_dim(), model_.bath_dim()));
}

void MultiTimeEvaluator::check_top_weights(const Matrix& full_matrix,
                                           const char* where) const {
  const auto weights = model_.top_state_weights_full(full_matrix);
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k] > truncation_tol_) {
      std::ostringstream msg;
      msg << where << ": top Fock-state population " << weights[k]
          << " of mode " << k << " exceeds the truncation tolerance "
          << truncation_tol_ << "; raise that mode's n_max";
      throw ValidationError(msg.str());
    }
  }
}

DensityMatrix MultiTimeEvaluator::propagate(const DensityMatrix& rho,
                                            double t_from, double t_to,
                                            bool check_truncation) const {
  if (rho.matrix.rows() != model_.total_dim()) {
    throw std::invalid_argument("propagate: state dimension mismatch");
  }
  Vector x = vectorize(rho.matrix);
  double cursor = t_from;
  auto switches = model_.system().switch_times(t_from, t_to);
  switches.push_back(t_to);
  for (double edge : switches) {
    if (edge > cursor) {
      const int seg = model_.system().segment_index(cursor);
      x = segment_propagator(seg, edge - cursor) * x;
      cursor = edge;
    }
  }
  DensityMatrix out{rho.layout, devectorize(x)};
  if (check_truncation) check_top_weights(out.matrix, "propagate");
  return out;
}

Complex MultiTimeEvaluator::multitime(const Matrix& rho_s,
                                      const MultiTimeRequest& req) const {
  req.validate(model_.system().d_s);
  DensityMatrix state = model_.initial_state(rho_s);
  double prev = 0.0;
  for (std::size_t k = 0; k < req.times.size(); ++k) {
    state = propagate(state, prev, req.times[k], false);
    state.matrix = embed_system(req.left_ops[k]) * state.matrix *
                   embed_system(req.right_ops[k]);
    prev = req.times[k];
  }
  return state.matrix.trace();
}

Complex MultiTimeEvaluator::multitime_chain(const Matrix& rho_s,
                                            const MultiTimeRequest& req) const {
  req.validate(model_.system().d_s);
  Vector w = vectorize(model_.initial_state(rho_s).matrix);
  double prev = 0.0;
  for (std::size_t k = 0; k < req.times.size(); ++k) {
    if (req.times[k] > prev) {
      w = interval_propagator(prev, req.times[k]) * w;
    }
    w = kron(embed_system(req.right_ops[k]).transpose(),
             embed_system(req.left_ops[k])) *
        w;
    prev = req.times[k];
  }
  const Vector vec_id =
      vectorize(Matrix::Identity(model_.total_dim(), model_.total_dim()));
  return vec_id.dot(w);
}

Complex MultiTimeEvaluator::two_time(const Matrix& rho_s, const Matrix& x,
                                     const Matrix& y, double t,
                                     double tau) const {
  if (t < 0.0 || tau < 0.0) {
    throw std::invalid_argument("two_time: t, tau >= 0");
  }
  const int d = model_.system().d_s;
  MultiTimeRequest req;
  req.times = {t, t + tau};
  req.left_ops = {y, x};
  req.right_ops = {Matrix::Identity(d, d), Matrix::Identity(d, d)};
  return multitime(rho_s, req);
}

double MultiTimeEvaluator::measurement_probability(
    const Matrix& rho_s, const MultiTimeRequest& req) const {
  req.validate(model_.system().d_s);
  for (std::size_t k = 0; k < req.times.size(); ++k) {
    if ((req.right_ops[k] - req.left_ops[k].adjoint()).cwiseAbs().maxCoeff() >
        1e-12) {
      throw std::invalid_argument(
          "measurement_probability: right operators must be the adjoints of "
          "the left operators");
    }
  }
  const Complex value = multitime(rho_s, req);
  if (std::abs(value.imag()) > 1e-9 * std::max(1.0, std::abs(value.real()))) {
    throw std::runtime_error(
        "measurement_probability: value has a non-negligible imaginary part");
  }
  if (value.real() < -1e-10) {
    std::ostringstream msg;
    msg << "measurement_probability: negative probability " << value.real();
    throw std::runtime_error(msg.str());
  }
  return std::max(value.real(), 0.0);
}

std::vector<Complex> MultiTimeEvaluator::dipole_correlation(
    const Matrix& rho_s, const Matrix& dipole_down, double t_ss,
    const std::vector<double>& tau_grid) const {
  if (tau_grid.size() < 2 || tau_grid.front() != 0.0) {
    throw std::invalid_argument(
        "spectrum: tau grid must start at 0 with at least two points");
  }
  const double dtau = tau_grid[1] - tau_grid[0];
  for (std::size_t i = 1; i < tau_grid.size(); ++i) {
    if (std::abs(tau_grid[i] - tau_grid[i - 1] - dtau) > 1e-9 * dtau) {
      throw std::invalid_argument("spectrum: tau grid must be uniform");
    }
  }
  DensityMatrix state = model_.initial_state(rho_s);
  state = propagate(state, 0.0, t_ss, false);
  Matrix m = embed_system(dipole_down) * state.matrix;
  const Matrix raise = embed_system(dipole_down.adjoint().eval());

  std::vector<Complex> corr;
  corr.reserve(tau_grid.size());
  corr.push_back((raise * m).trace());
  for (std::size_t i = 1; i < tau_grid.size(); ++i) {
    DensityMatrix step{state.layout, m};
    step = propagate(step, t_ss + tau_grid[i - 1], t_ss + tau_grid[i], false);
    m = step.matrix;
    corr.push_back((raise * m).trace());
  }
  return corr;
}

std::vector<double> MultiTimeEvaluator::emission_spectrum(
    const Matrix& rho_s, const Matrix& dipole_down, double t_ss,
    const std::vector<double>& tau_grid,
    const std::vector<double>& freq_grid) const {
  const std::vector<Complex> corr =
      dipole_correlation(rho_s, dipole_down, t_ss, tau_grid);
  const double dtau = tau_grid[1] - tau_grid[0];
  std::vector<double> spectrum;
  spectrum.reserve(freq_grid.size());
  for (double w : freq_grid) {
    Complex acc = 0.0;
    for (std::size_t k = 0; k < corr.size(); ++k) {
      const double weight =
          (k == 0 || k + 1 == corr.size()) ? 0.5 : 1.0;
      acc += weight * corr[k] * std::exp(-kI * w * tau_grid[k]);
    }
    spectrum.push_back(2.0 * dtau * acc.real());
  }
  return spectrum;
}

}  // namespace mtqs

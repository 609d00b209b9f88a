#pragma once

#include <array>
#include <optional>
#include <vector>

#include "mtqs/operator_algebra.hpp"
#include "mtqs/types.hpp"

namespace mtqs {

/// Piecewise-constant system Hamiltonian: H(t) = entry.h for the last entry
/// with t_start <= t.
struct ScheduleEntry {
  double t_start = 0.0;
  Matrix h;
};

struct SystemModel {
  int d_s = 0;
  std::vector<ScheduleEntry> h_schedule;  // first entry must start at 0
  std::vector<Matrix> couplings;          // hermitian A_j, one per channel

  void validate() const;
  const Matrix& hamiltonian_at(double t) const;
  int segment_index(double t) const;
  /// Schedule switch times inside (t_from, t_to), sorted.
  std::vector<double> switch_times(double t_from, double t_to) const;
};

struct PseudomodeSpec {
  double omega = 0.0;
  double gamma = 0.0;  // >= 0
  int n_max = 0;       // >= 2
};

struct PseudomodeParams {
  std::vector<PseudomodeSpec> modes;
  /// couplings[channel][mode]; F_j = sum_k (g_jk b_k + conj(g_jk) b_k^dag)
  std::vector<std::vector<Complex>> couplings;
  /// optional hermitian quadratic inter-mode coupling, sum c_kl b_k^dag b_l
  std::optional<Matrix> mode_mode;

  void validate() const;
};

struct BathState {
  enum class Kind { Vacuum, Thermal, Fock };
  Kind kind = Kind::Vacuum;
  double temperature = 0.0;
  std::vector<int> occupations;  // per mode, Fock kind only
};

/// One dissipative channel: rate gamma and jump operator L (given on the
/// bath-only space; embedding handled by the callers).
struct LindbladChannel {
  double rate = 0.0;
  Matrix op;
};

/// The damped-environment configuration: system, pseudomodes, dissipation
/// acting on the modes only, and a factorized initial state.
class GKLSModel {
 public:
  GKLSModel(SystemModel system, PseudomodeParams bath, BathState initial);

  const SystemModel& system() const { return system_; }
  const PseudomodeParams& bath() const { return bath_; }
  const BathState& initial_bath() const { return initial_; }
  const SpaceLayout& layout() const { return layout_; }
  const SpaceLayout& bath_layout() const { return bath_layout_; }
  int bath_dim() const { return bath_layout_.total_dim(); }
  int total_dim() const { return layout_.total_dim(); }
  std::size_t channel_count() const { return bath_.couplings.size(); }
  std::size_t mode_count() const { return bath_.modes.size(); }

  /// H_B = sum_k omega_k n_k + quadratic couplings, on the bath space.
  Matrix bath_hamiltonian() const;
  /// F_j on the bath space.
  Matrix channel_bath_operator(std::size_t j) const;
  /// Jump operators with rates, on the bath space (two per mode for thermal
  /// initial states, one per mode otherwise).
  std::vector<LindbladChannel> lindblad_channels() const;

  /// Full H(t) = H_S(t) x 1 + 1 x H_B + sum_j A_j x F_j.
  Matrix build_hamiltonian(double t) const;
  /// Vectorized generator on the full space (dim = total_dim^2).
  Matrix build_liouvillian(double t) const;
  /// Vectorized generator of the free environment (dim = bath_dim^2).
  Matrix build_free_bath_generator() const;

  Matrix initial_bath_density() const;
  DensityMatrix initial_state(const Matrix& rho_s) const;

  Complex free_bath_one_time(std::size_t j, double t) const;
  Complex free_bath_two_time(std::size_t j, std::size_t jp, double t,
                             double s) const;
  /// As free_bath_two_time, also reporting the largest relative top-Fock
  /// weight encountered in the propagated object.
  Complex free_bath_two_time_checked(std::size_t j, std::size_t jp, double t,
                                     double s, double* max_top_weight) const;
  /// C(t_k) for all grid points against s = 0; uses stepping on uniform grids.
  std::vector<Complex> free_bath_correlation_series(
      std::size_t j, std::size_t jp, const std::vector<double>& grid) const;

  /// Four nested channel insertions at t1<=t2<=t3<=t4 (first) versus the
  /// pair-product combination of two-point functions (second).
  std::pair<Complex, Complex> wick_four_point_check(
      std::size_t j, const std::array<double, 4>& times) const;

  /// Relative weight of the top Fock state of each mode in a bath-space
  /// operator (population for states).
  std::vector<double> top_state_weights(const Matrix& bath_op) const;
  /// Same for an operator on the full S+B space.
  std::vector<double> top_state_weights_full(const Matrix& full_op) const;

 private:
  SystemModel system_;
  PseudomodeParams bath_;
  BathState initial_;
  SpaceLayout layout_;
  SpaceLayout bath_layout_;
};

/// Vectorized GKLS generator for a given hamiltonian and channel list,
/// column-stacking convention.
Matrix liouvillian_matrix(const Matrix& h,
                          const std::vector<LindbladChannel>& channels);

/// Mean occupation 1/(e^{omega/T} - 1).
double bose_occupation(double omega, double temperature);

}  // namespace mtqs

#pragma once

#include <map>
#include <mutex>
#include <vector>

#include "mtqs/gkls_model.hpp"

namespace mtqs {

/// Time-ordered operator insertions: value = Tr{ O_n P(t_n,t_{n-1})[ ...
/// O_1 P(t_1)[rho] O'_1 ... ] O'_n } with all operators acting on the system
/// factor.
struct MultiTimeRequest {
  std::vector<double> times;
  std::vector<Matrix> left_ops;
  std::vector<Matrix> right_ops;

  void validate(int d_s) const;
};

/// Evaluates propagators and nested multi-time expectation values for one
/// model. Interval propagators are cached per (schedule segment, duration);
/// the cache is guarded so concurrent evaluations behave as if serialized.
class MultiTimeEvaluator {
 public:
  explicit MultiTimeEvaluator(const GKLSModel& model,
                              double truncation_tol = kDefaultTruncationTol);

  const GKLSModel& model() const { return model_; }

  /// Ordered product of per-segment exponentials covering [t_from, t_to].
  Matrix interval_propagator(double t_from, double t_to) const;

  /// Schroedinger propagation of a physical state; enforces the top-Fock
  /// population check unless check_truncation is false.
  DensityMatrix propagate(const DensityMatrix& rho, double t_from, double t_to,
                          bool check_truncation = true) const;

  /// Nested evaluation from rho_S(0) x rho_B(0).
  Complex multitime(const Matrix& rho_s, const MultiTimeRequest& req) const;
  /// Same value through the vectorized superoperator chain.
  Complex multitime_chain(const Matrix& rho_s,
                          const MultiTimeRequest& req) const;

  /// <X(t+tau) Y(t)>
  Complex two_time(const Matrix& rho_s, const Matrix& x, const Matrix& y,
                   double t, double tau) const;

  /// Probability of an outcome sequence; requires right_ops = left_ops^dag.
  double measurement_probability(const Matrix& rho_s,
                                 const MultiTimeRequest& req) const;

  /// One-sided transform of <d^dag(t_ss+tau) d(t_ss)> on a uniform tau grid,
  /// real part doubled with trapezoidal end weights.
  std::vector<double> emission_spectrum(const Matrix& rho_s,
                                        const Matrix& dipole_down, double t_ss,
                                        const std::vector<double>& tau_grid,
                                        const std::vector<double>& freq_grid)
      const;

  /// Correlation samples used by the spectrum, exposed for reporting.
  std::vector<Complex> dipole_correlation(const Matrix& rho_s,
                                          const Matrix& dipole_down,
                                          double t_ss,
                                          const std::vector<double>& tau_grid)
      const;

  double truncation_tol() const { return truncation_tol_; }

 private:
  Matrix segment_propagator(int segment, double duration) const;
  Matrix embed_system(const Matrix& op) const;
  void check_top_weights(const Matrix& full_matrix, const char* where) const;

  const GKLSModel& model_;
  double truncation_tol_;
  mutable std::mutex mutex_;
  mutable std::map<int, Matrix> generators_;
  mutable std::map<std::pair<int, double>, Matrix> cache_;
};

}  // namespace mtqs

#pragma once

#include <vector>

#include "mtqs/bath_models.hpp"
#include "mtqs/gkls_model.hpp"
#include "mtqs/types.hpp"

namespace mtqs {

/// Sum of weighted complex exponentials, sum_k d_k e^{z_k t} with
/// Re z_k <= 0.
struct ExponentialSum {
  struct Term {
    Complex amplitude;  // d_k
    Complex exponent;   // z_k
  };
  std::vector<Term> terms;
};

struct FitReport {
  int model_order = 0;
  double max_residual = 0.0;
  double rms_residual = 0.0;
  double grid_span = 0.0;
};

Complex evaluate(const ExponentialSum& es, double t);

/// Exponent recovery from the generalized eigenvalues of the shifted Hankel
/// pencil of the samples (SVD-projected), amplitudes by least squares.
/// Requires a uniform grid with at least 2*order+1 points.
std::pair<ExponentialSum, FitReport> matrix_pencil_fit(
    const CorrelationSeries& series, int order);

/// Terms with nearly equal exponents (|z_k - z_l| < 1e-9) merged by summing
/// amplitudes.
ExponentialSum merge_degenerate(const ExponentialSum& es);

/// One damped mode per term: Omega = -Im z, gamma = -2 Re z, g = sqrt(Re d).
/// Requires positive near-real amplitudes and strictly decaying exponents.
PseudomodeParams to_pseudomodes(const ExponentialSum& es, int n_max = 6);

}  // namespace mtqs

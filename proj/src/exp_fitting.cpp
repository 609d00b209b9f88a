#include "mtqs/exp_fitting.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mtqs {

Complex evaluate(const ExponentialSum& es, double t) {
  if (t < 0.0) throw std::invalid_argument("evaluate: t must be >= 0");
  Complex acc = 0.0;
  for (const auto& term : es.terms) {
    acc += term.amplitude * std::exp(term.exponent * t);
  }
  return acc;
}

std::pair<ExponentialSum, FitReport> matrix_pencil_fit(
    const CorrelationSeries& series, int order) {
  const std::size_t n = series.values.size();
  if (order < 1) throw std::invalid_argument("fit: order must be >= 1");
  if (n < static_cast<std::size_t>(2 * order + 1)) {
    throw std::invalid_argument(
        "fit: need at least 2*order+1 samples, have " + std::to_string(n));
  }
  if (series.grid.size() != n) {
    throw std::invalid_argument("fit: grid/value length mismatch");
  }
  const double dt = series.grid[1] - series.grid[0];
  if (dt <= 0.0) throw std::invalid_argument("fit: grid must increase");
  for (std::size_t i = 1; i < n; ++i) {
    if (std::abs(series.grid[i] - series.grid[i - 1] - dt) > 1e-9 * dt) {
      throw std::invalid_argument("fit: grid must be uniformly spaced");
    }
  }

  // Shifted Hankel pencil: Y0[i][j] = c_{i+j}, Y1[i][j] = c_{i+j+1}.
  const std::size_t cols = n / 2;
  const std::size_t rows = n - cols;
  Matrix y0(rows, cols), y1(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      y0(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          series.values[i + j];
      y1(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          series.values[i + j + 1];
    }
  }
  if (static_cast<std::size_t>(order) > cols) {
    throw std::invalid_argument("fit: order exceeds the pencil width");
  }

  Eigen::JacobiSVD<Matrix> svd(y0, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv(0) <= 0.0 || sv(order - 1) / sv(0) < 1e-13) {
    std::ostringstream msg;
    msg << "fit: Hankel pencil is rank deficient at order " << order
        << " (singular value ratio "
        << (sv(0) > 0 ? sv(order - 1) / sv(0) : 0.0)
        << "); reduce the model order";
    throw std::runtime_error(msg.str());
  }

  const Matrix u_r = svd.matrixU().leftCols(order);
  const Matrix v_r = svd.matrixV().leftCols(order);
  const Matrix s_inv = sv.head(order).cwiseInverse().asDiagonal();
  const Matrix pencil = s_inv * (u_r.adjoint() * y1 * v_r);

  Eigen::ComplexEigenSolver<Matrix> es(pencil);
  std::vector<Complex> exponents;
  const double freq_scale = 1.0 / dt;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const Complex lambda = es.eigenvalues()(i);
    Complex z = std::log(lambda) / dt;
    if (z.real() > 0.0) {
      if (z.real() < 1e-10 * freq_scale) {
        z = Complex(-z.real(), z.imag());
      } else {
        std::ostringstream msg;
        msg << "fit: unstable exponent with Re z = " << z.real()
            << " beyond the numerical-noise threshold "
            << 1e-10 * freq_scale;
        throw std::runtime_error(msg.str());
      }
    }
    exponents.push_back(z);
  }
  std::sort(exponents.begin(), exponents.end(), [](Complex a, Complex b) {
    return a.real() != b.real() ? a.real() > b.real() : a.imag() < b.imag();
  });

  // Amplitudes from the least-squares Vandermonde system on the full grid.
  Matrix vand(n, order);
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < order; ++k) {
      vand(static_cast<Eigen::Index>(i), k) =
          std::exp(exponents[static_cast<std::size_t>(k)] *
                   (series.grid[i] - series.grid[0]));
    }
  }
  Vector rhs(n);
  for (std::size_t i = 0; i < n; ++i) rhs(static_cast<Eigen::Index>(i)) = series.values[i];
  const Vector amps0 = vand.colPivHouseholderQr().solve(rhs);

  ExponentialSum sum;
  for (int k = 0; k < order; ++k) {
    // amplitudes were fit relative to the grid origin
    const Complex d =
        amps0(k) * std::exp(-exponents[static_cast<std::size_t>(k)] *
                            series.grid[0]);
    sum.terms.push_back({d, exponents[static_cast<std::size_t>(k)]});
  }

  FitReport report;
  report.model_order = order;
  report.grid_span = series.grid.back() - series.grid.front();
  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = std::abs(evaluate(sum, series.grid[i]) - series.values[i]);
    report.max_residual = std::max(report.max_residual, r);
    sq += r * r;
  }
  report.rms_residual = std::sqrt(sq / static_cast<double>(n));
  return {sum, report};
}

ExponentialSum merge_degenerate(const ExponentialSum& es) {
  ExponentialSum out;
  std::vector<bool> used(es.terms.size(), false);
  for (std::size_t i = 0; i < es.terms.size(); ++i) {
    if (used[i]) continue;
    Complex d = es.terms[i].amplitude;
    for (std::size_t j = i + 1; j < es.terms.size(); ++j) {
      if (!used[j] &&
          std::abs(es.terms[j].exponent - es.terms[i].exponent) < 1e-9) {
        d += es.terms[j].amplitude;
        used[j] = true;
      }
    }
    out.terms.push_back({d, es.terms[i].exponent});
  }
  return out;
}

PseudomodeParams to_pseudomodes(const ExponentialSum& es, int n_max) {
  const ExponentialSum merged = merge_degenerate(es);
  PseudomodeParams params;
  params.couplings.resize(1);
  for (const auto& term : merged.terms) {
    const double dr = term.amplitude.real();
    const double di = term.amplitude.imag();
    if (std::abs(di) > 1e-10 * std::abs(term.amplitude) || dr <= 0.0) {
      std::ostringstream msg;
      msg << "mode synthesis requires positive real weights; got d = (" << dr
          << ", " << di
          << "). Complex-weight terms need paired auxiliary modes with "
             "internal couplings, which this release does not construct.";
      throw std::invalid_argument(msg.str());
    }
    if (term.exponent.real() >= 0.0) {
      throw std::invalid_argument(
          "mode synthesis requires strictly decaying exponents (Re z < 0)");
    }
    PseudomodeSpec mode;
    mode.omega = -term.exponent.imag();
    mode.gamma = -2.0 * term.exponent.real();
    mode.n_max = n_max;
    params.modes.push_back(mode);
    params.couplings[0].push_back(Complex(std::sqrt(dr), 0.0));
  }
  params.validate();
  return params;
}

}  // namespace mtqs

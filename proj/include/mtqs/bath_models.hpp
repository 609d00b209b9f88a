#pragma once

#include <string>
#include <vector>

#include "mtqs/types.hpp"

namespace mtqs {

/// Coupling-weighted density of environment modes. The lorentzian kind is a
/// full-line Cauchy profile centered at `center`; the other kinds live on
/// positive frequencies only.
struct SpectralDensity {
  enum class Kind { Lorentzian, OhmicExpCutoff, Debye, Tabulated };

  Kind kind = Kind::Lorentzian;
  double temperature = 0.0;  // 0 means vacuum

  // lorentzian: J(w) = amplitude^2/(2pi) * width / ((w-center)^2 + width^2/4)
  double amplitude = 0.0;
  double center = 0.0;
  double width = 0.0;

  // ohmic with exponential cutoff: J(w) = coupling * w^s * cutoff^(1-s) * exp(-w/cutoff)
  double coupling = 0.0;
  double cutoff = 0.0;
  double exponent = 1.0;

  // debye: J(w) = 2 * reorganization * debye_cutoff * w / (w^2 + debye_cutoff^2)
  double reorganization = 0.0;
  double debye_cutoff = 0.0;

  // tabulated: piecewise-linear on a positive frequency grid, zero outside
  std::vector<double> grid_omega;
  std::vector<double> grid_value;

  static SpectralDensity lorentzian(double amplitude, double center,
                                    double width, double temperature = 0.0);
  static SpectralDensity ohmic(double coupling, double cutoff,
                               double exponent = 1.0,
                               double temperature = 0.0);
  static SpectralDensity debye(double reorganization, double cutoff,
                               double temperature = 0.0);
  static SpectralDensity tabulated(std::vector<double> omega,
                                   std::vector<double> value,
                                   double temperature = 0.0);

  void validate() const;
  double value_at(double omega) const;
  bool full_line_support() const { return kind == Kind::Lorentzian; }
  std::string kind_name() const;
};

/// A two-time correlation function sampled on a time grid (stationary models,
/// so a single time argument).
struct CorrelationSeries {
  std::vector<double> grid;
  std::vector<Complex> values;
  int channel_row = 0;
  int channel_col = 0;
};

/// C(t) for t >= 0: the J-weighted frequency integral (vacuum kernel
/// e^{-iwt}, thermal kernel coth(w/2T)cos(wt) - i sin(wt)); closed form for
/// the vacuum lorentzian, adaptive quadrature elsewhere (relative 1e-8).
Complex correlation_analytic(const SpectralDensity& sd, double t);

/// Extension to negative arguments by C(-t) = conj(C(t)).
Complex correlation_extended(const SpectralDensity& sd, double t);

/// Two-argument signature kept for non-stationary models; asserts
/// stationarity for the supported initial states and reduces to C(t).
Complex correlation_two_time(const SpectralDensity& sd, double t_plus_s,
                             double s);

/// Single-time mean of the environment coupling operator: identically zero
/// for the supported zero-mean Gaussian initial states.
Complex mean_field(const SpectralDensity& sd, double t);

CorrelationSeries sample_correlation(const SpectralDensity& sd,
                                     const std::vector<double>& grid);

/// Two-column CSV (frequency, value); lines starting with '#' are skipped.
SpectralDensity load_tabulated_csv(const std::string& path,
                                   double temperature = 0.0);

/// Integral of J over [lo, hi], used for discretization mass checks.
double spectral_mass(const SpectralDensity& sd, double lo, double hi);

}  // namespace mtqs

#include "mtqs/bath_models.hpp"

#include <algorithm>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/ooura_fourier_integrals.hpp>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace mtqs {

namespace {

constexpr double kQuadRelTol = 1e-8;

double coth(double x) {
  if (std::abs(x) < 1e-4) {
    return 1.0 / x + x / 3.0 - x * x * x / 45.0;
  }
  return 1.0 + 2.0 / std::expm1(2.0 * x);
}

// Bose factor n(w) = 1/(e^{w/T} - 1); w > 0.
double bose(double omega, double temperature) {
  return 1.0 / std::expm1(omega / temperature);
}

void check_quadrature(double err, double scale, const std::string& what) {
  if (!std::isfinite(err) || err > 1e-5 * std::max(scale, 1e-12)) {
    std::ostringstream msg;
    msg << "quadrature did not converge for " << what
        << " (achieved error estimate " << err << ")";
    throw std::runtime_error(msg.str());
  }
}

double fourier_cos(const std::function<double(double)>& f, double t,
                   const std::string& what) {
  static thread_local boost::math::quadrature::ooura_fourier_cos<double>
      integrator(kQuadRelTol * 1e-1);
  auto [value, rel_err] = integrator.integrate(f, t);
  check_quadrature(rel_err * std::abs(value), std::abs(value), what);
  return value;
}

double fourier_sin(const std::function<double(double)>& f, double t,
                   const std::string& what) {
  static thread_local boost::math::quadrature::ooura_fourier_sin<double>
      integrator(kQuadRelTol * 1e-1);
  auto [value, rel_err] = integrator.integrate(f, t);
  check_quadrature(rel_err * std::abs(value), std::abs(value), what);
  return value;
}

double semi_infinite(const std::function<double(double)>& f,
                     const std::string& what) {
  boost::math::quadrature::exp_sinh<double> integrator;
  double err = 0.0;
  double value = integrator.integrate(f, kQuadRelTol * 1e-1, &err);
  check_quadrature(err, std::abs(value), what);
  return value;
}

double finite_interval(const std::function<double(double)>& f, double a,
                       double b, const std::string& what) {
  double err = 0.0;
  double value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      f, a, b, 14, kQuadRelTol * 1e-1, &err);
  check_quadrature(err, std::abs(value), what);
  return value;
}

// Exact integral of the linear segment (j0 + slope*(w-a)) * e^{-iwt} over
// [a,b], evaluated in centered coordinates to stay stable for steep segments.
Complex linear_segment_vacuum(double a, double b, double j0, double j1,
                              double t) {
  const double h = b - a;
  if (t == 0.0) {
    return 0.5 * (j0 + j1) * h;
  }
  const Complex z = -kI * t * h;
  Complex e0, e1;  // Int_0^1 e^{z x} dx and Int_0^1 x e^{z x} dx, times h, h^2
  if (std::abs(z) < 1e-4) {
    e0 = h * (1.0 + z * (0.5 + z * (1.0 / 6.0 + z * (1.0 / 24.0 + z / 120.0))));
    e1 = h * h *
         (0.5 + z * (1.0 / 3.0 + z * (1.0 / 8.0 + z * (1.0 / 30.0 + z / 144.0))));
  } else {
    const Complex ez = std::exp(z);
    e0 = h * (ez - 1.0) / z;
    e1 = h * h * (ez * (z - 1.0) + 1.0) / (z * z);
  }
  const double slope = (j1 - j0) / h;
  return std::exp(-kI * t * a) * (j0 * e0 + slope * e1);
}

}  // namespace

SpectralDensity SpectralDensity::lorentzian(double amplitude, double center,
                                            double width, double temperature) {
  SpectralDensity sd;
  sd.kind = Kind::Lorentzian;
  sd.amplitude = amplitude;
  sd.center = center;
  sd.width = width;
  sd.temperature = temperature;
  sd.validate();
  return sd;
}

SpectralDensity SpectralDensity::ohmic(double coupling, double cutoff,
                                       double exponent, double temperature) {
  SpectralDensity sd;
  sd.kind = Kind::OhmicExpCutoff;
  sd.coupling = coupling;
  sd.cutoff = cutoff;
  sd.exponent = exponent;
  sd.temperature = temperature;
  sd.validate();
  return sd;
}

SpectralDensity SpectralDensity::debye(double reorganization, double cutoff,
                                       double temperature) {
  SpectralDensity sd;
  sd.kind = Kind::Debye;
  sd.reorganization = reorganization;
  sd.debye_cutoff = cutoff;
  sd.temperature = temperature;
  sd.validate();
  return sd;
}

SpectralDensity SpectralDensity::tabulated(std::vector<double> omega,
                                           std::vector<double> value,
                                           double temperature) {
  SpectralDensity sd;
  sd.kind = Kind::Tabulated;
  sd.grid_omega = std::move(omega);
  sd.grid_value = std::move(value);
  sd.temperature = temperature;
  sd.validate();
  return sd;
}

void SpectralDensity::validate() const {
  if (temperature < 0.0) {
    throw std::invalid_argument("spectral density: temperature must be >= 0");
  }
  switch (kind) {
    case Kind::Lorentzian:
      if (amplitude < 0.0) {
        throw std::invalid_argument("lorentzian: amplitude must be >= 0");
      }
      if (width <= 0.0) {
        throw std::invalid_argument("lorentzian: width must be > 0");
      }
      break;
    case Kind::OhmicExpCutoff:
      if (coupling < 0.0 || cutoff <= 0.0 || exponent <= 0.0) {
        throw std::invalid_argument(
            "ohmic: need coupling >= 0, cutoff > 0, exponent > 0");
      }
      break;
    case Kind::Debye:
      if (reorganization < 0.0 || debye_cutoff <= 0.0) {
        throw std::invalid_argument(
            "debye: need reorganization >= 0 and cutoff > 0");
      }
      break;
    case Kind::Tabulated: {
      if (grid_omega.size() != grid_value.size() || grid_omega.size() < 2) {
        throw std::invalid_argument(
            "tabulated: need matching grids with at least two points");
      }
      for (std::size_t i = 0; i < grid_omega.size(); ++i) {
        if (grid_omega[i] < 0.0) {
          throw std::invalid_argument(
              "tabulated: frequency grid must be non-negative");
        }
        if (i > 0 && grid_omega[i] <= grid_omega[i - 1]) {
          throw std::invalid_argument(
              "tabulated: frequency grid must be strictly increasing");
        }
        if (grid_value[i] < 0.0) {
          throw std::invalid_argument("tabulated: values must be >= 0");
        }
      }
      break;
    }
  }
}

double SpectralDensity::value_at(double omega) const {
  switch (kind) {
    case Kind::Lorentzian: {
      const double d = omega - center;
      return amplitude * amplitude / (2.0 * M_PI) * width /
             (d * d + 0.25 * width * width);
    }
    case Kind::OhmicExpCutoff:
      if (omega <= 0.0) return 0.0;
      return coupling * std::pow(omega, exponent) *
             std::pow(cutoff, 1.0 - exponent) * std::exp(-omega / cutoff);
    case Kind::Debye:
      if (omega <= 0.0) return 0.0;
      return 2.0 * reorganization * debye_cutoff * omega /
             (omega * omega + debye_cutoff * debye_cutoff);
    case Kind::Tabulated: {
      if (omega <= grid_omega.front() || omega >= grid_omega.back()) {
        // zero outside the grid; boundary values respected inside
        if (omega == grid_omega.front()) return grid_value.front();
        if (omega == grid_omega.back()) return grid_value.back();
        return 0.0;
      }
      const auto it = std::upper_bound(grid_omega.begin(), grid_omega.end(),
                                       omega);
      const std::size_t hi = static_cast<std::size_t>(it - grid_omega.begin());
      const std::size_t lo = hi - 1;
      const double f =
          (omega - grid_omega[lo]) / (grid_omega[hi] - grid_omega[lo]);
      return (1.0 - f) * grid_value[lo] + f * grid_value[hi];
    }
  }
  return 0.0;
}

std::string SpectralDensity::kind_name() const {
  switch (kind) {
    case Kind::Lorentzian:
      return "lorentzian";
    case Kind::OhmicExpCutoff:
      return "ohmic_exp_cutoff";
    case Kind::Debye:
      return "debye";
    case Kind::Tabulated:
      return "tabulated";
  }
  return "?";
}

namespace {

Complex vacuum_correlation(const SpectralDensity& sd, double t) {
  switch (sd.kind) {
    case SpectralDensity::Kind::Lorentzian:
      // residue of the full-line profile
      return sd.amplitude * sd.amplitude *
             std::exp(-kI * sd.center * t - 0.5 * sd.width * t);
    case SpectralDensity::Kind::OhmicExpCutoff: {
      auto j = [&](double w) { return sd.value_at(w); };
      if (t == 0.0) {
        return semi_infinite(j, "ohmic C(0)");
      }
      return Complex(fourier_cos(j, t, "ohmic Re C"),
                     -fourier_sin(j, t, "ohmic Im C"));
    }
    case SpectralDensity::Kind::Debye: {
      if (t == 0.0) {
        throw std::runtime_error(
            "debye correlation diverges at t=0 (1/w tail of J); sample "
            "strictly positive times or use a tabulated cutoff");
      }
      auto j = [&](double w) { return sd.value_at(w); };
      return Complex(fourier_cos(j, t, "debye Re C"),
                     -fourier_sin(j, t, "debye Im C"));
    }
    case SpectralDensity::Kind::Tabulated: {
      Complex acc = 0.0;
      for (std::size_t i = 0; i + 1 < sd.grid_omega.size(); ++i) {
        acc += linear_segment_vacuum(sd.grid_omega[i], sd.grid_omega[i + 1],
                                     sd.grid_value[i], sd.grid_value[i + 1], t);
      }
      return acc;
    }
  }
  return 0.0;
}

Complex thermal_correlation(const SpectralDensity& sd, double t) {
  const double T = sd.temperature;
  switch (sd.kind) {
    case SpectralDensity::Kind::Lorentzian:
      throw std::invalid_argument(
          "thermal correlation for a lorentzian line is infrared-divergent "
          "(J(0) > 0 meets coth(w/2T) ~ 2T/w); use temperature 0 or a "
          "positive-support tabulated profile");
    case SpectralDensity::Kind::OhmicExpCutoff:
    case SpectralDensity::Kind::Debye: {
      auto j = [&](double w) { return sd.value_at(w); };
      auto j_coth = [&](double w) { return sd.value_at(w) * coth(0.5 * w / T); };
      if (t == 0.0) {
        if (sd.kind == SpectralDensity::Kind::Debye) {
          throw std::runtime_error(
              "debye correlation diverges at t=0 (1/w tail of J); sample "
              "strictly positive times or use a tabulated cutoff");
        }
        return semi_infinite(j_coth, "thermal C(0)");
      }
      // coth = 1 + 2n splits off the vacuum part; the n-weighted part decays
      // like e^{-w/T} and can be truncated at a finite frequency.
      auto j_bose = [&](double w) {
        return w > 0 ? 2.0 * sd.value_at(w) * bose(w, T) : 0.0;
      };
      const double scale = (sd.kind == SpectralDensity::Kind::Debye)
                               ? sd.debye_cutoff
                               : sd.cutoff;
      const double upper = 80.0 * std::max(T, 0.25 * scale);
      const double re =
          fourier_cos(j, t, "thermal Re C (vacuum part)") +
          finite_interval([&](double w) { return j_bose(w) * std::cos(w * t); },
                          0.0, upper, "thermal Re C (bose part)");
      const double im = -fourier_sin(j, t, "thermal Im C");
      return Complex(re, im);
    }
    case SpectralDensity::Kind::Tabulated: {
      double re = 0.0, im = 0.0;
      for (std::size_t i = 0; i + 1 < sd.grid_omega.size(); ++i) {
        const double a = sd.grid_omega[i], b = sd.grid_omega[i + 1];
        if (b <= 0.0) continue;
        auto jc = [&](double w) {
          return sd.value_at(w) * (w > 0 ? coth(0.5 * w / T) : 0.0);
        };
        auto js = [&](double w) { return sd.value_at(w); };
        re += finite_interval([&](double w) { return jc(w) * std::cos(w * t); },
                              a, b, "tabulated thermal Re C");
        im -= finite_interval([&](double w) { return js(w) * std::sin(w * t); },
                              a, b, "tabulated thermal Im C");
      }
      return Complex(re, im);
    }
  }
  return 0.0;
}

}  // namespace

Complex correlation_analytic(const SpectralDensity& sd, double t) {
  sd.validate();
  if (t < 0.0) {
    throw std::invalid_argument(
        "correlation_analytic: t must be >= 0 (negative arguments are "
        "defined by conjugation, see correlation_extended)");
  }
  if (sd.temperature == 0.0) return vacuum_correlation(sd, t);
  return thermal_correlation(sd, t);
}

Complex correlation_extended(const SpectralDensity& sd, double t) {
  if (t < 0.0) return std::conj(correlation_analytic(sd, -t));
  return correlation_analytic(sd, t);
}

Complex correlation_two_time(const SpectralDensity& sd, double t_plus_s,
                             double s) {
  if (s < 0.0 || t_plus_s < s) {
    throw std::invalid_argument(
        "correlation_two_time: need t_plus_s >= s >= 0");
  }
  // The supported initial states are stationary under the free environment
  // evolution, so only the difference enters.
  return correlation_analytic(sd, t_plus_s - s);
}

Complex mean_field(const SpectralDensity& sd, double t) {
  sd.validate();
  if (t < 0.0) {
    throw std::invalid_argument("mean_field: t must be >= 0");
  }
  // Linear coupling operators have zero mean in any thermal or vacuum state.
  return Complex(0.0, 0.0);
}

CorrelationSeries sample_correlation(const SpectralDensity& sd,
                                     const std::vector<double>& grid) {
  if (grid.empty()) {
    throw std::invalid_argument("sample_correlation: empty grid");
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] < 0.0 || (i > 0 && grid[i] <= grid[i - 1])) {
      throw std::invalid_argument(
          "sample_correlation: grid must be strictly increasing and >= 0");
    }
  }
  CorrelationSeries series;
  series.grid = grid;
  series.values.reserve(grid.size());
  for (double t : grid) {
    const Complex c = correlation_analytic(sd, t);
    if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) {
      throw std::runtime_error("sample_correlation: non-finite value at t=" +
                               std::to_string(t));
    }
    series.values.push_back(c);
  }
  if (grid.front() == 0.0 && series.values.front().real() < -1e-12) {
    throw std::runtime_error(
        "sample_correlation: diagonal correlation has negative real part at "
        "t=0");
  }
  return series;
}

SpectralDensity load_tabulated_csv(const std::string& path,
                                   double temperature) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open tabulated spectral density file '" +
                             path + "'");
  }
  std::vector<double> omega, value;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    double w = 0, j = 0;
    if (!(ls >> w >> j)) {
      throw std::runtime_error("malformed line in '" + path + "': " + line);
    }
    omega.push_back(w);
    value.push_back(j);
  }
  return SpectralDensity::tabulated(std::move(omega), std::move(value),
                                    temperature);
}

double spectral_mass(const SpectralDensity& sd, double lo, double hi) {
  if (hi <= lo) {
    throw std::invalid_argument("spectral_mass: need hi > lo");
  }
  if (sd.kind == SpectralDensity::Kind::Lorentzian) {
    // Cauchy CDF in closed form.
    auto cdf = [&](double w) {
      return 0.5 + std::atan(2.0 * (w - sd.center) / sd.width) / M_PI;
    };
    return sd.amplitude * sd.amplitude * (cdf(hi) - cdf(lo));
  }
  return finite_interval([&](double w) { return sd.value_at(w); },
                         std::max(lo, 0.0), hi, "spectral mass");
}

}  // namespace mtqs

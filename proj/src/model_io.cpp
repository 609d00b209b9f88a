#include "mtqs/model_io.hpp"

#include <cmath>
#include <fstream>

namespace mtqs {

const Json& require_key(const Json& node, const std::string& key,
                        const std::string& context) {
  if (!node.is_object() || !node.contains(key)) {
    throw std::invalid_argument("config missing key '" + key + "' in " +
                                context);
  }
  return node.at(key);
}

namespace {

Complex parse_complex(const Json& node, const std::string& context) {
  if (node.is_number()) return Complex(node.get<double>(), 0.0);
  if (node.is_array() && node.size() == 2 && node[0].is_number() &&
      node[1].is_number()) {
    return Complex(node[0].get<double>(), node[1].get<double>());
  }
  throw std::invalid_argument("expected a [re, im] pair in " + context);
}

}  // namespace

Matrix parse_matrix(const Json& node, const std::string& context) {
  if (!node.is_array() || node.empty()) {
    throw std::invalid_argument("expected a matrix (array of rows) in " +
                                context);
  }
  const std::size_t n = node.size();
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const Json& row = node[i];
    if (!row.is_array() || row.size() != n) {
      throw std::invalid_argument("matrix in " + context +
                                  " must be square; row " + std::to_string(i) +
                                  " has the wrong length");
    }
    for (std::size_t j = 0; j < n; ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          parse_complex(row[j], context);
    }
  }
  return m;
}

Json complex_to_json(const Complex& z) { return Json::array({z.real(), z.imag()}); }

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      row.push_back(complex_to_json(m(i, j)));
    }
    rows.push_back(row);
  }
  return rows;
}

Matrix parse_operator(const Json& node, int dim, const std::string& context) {
  if (node.is_array()) {
    const Matrix m = parse_matrix(node, context);
    if (m.rows() != dim) {
      throw std::invalid_argument("operator in " + context +
                                  " does not match the system dimension");
    }
    return m;
  }
  if (!node.is_string()) {
    throw std::invalid_argument("operator in " + context +
                                " must be a name or a matrix");
  }
  const std::string name = node.get<std::string>();
  if (name == "identity") return Matrix::Identity(dim, dim);
  if (dim != 2) {
    throw std::invalid_argument("named operator '" + name + "' in " + context +
                                " needs a two-level system");
  }
  Matrix m = Matrix::Zero(2, 2);
  if (name == "pauli_x") {
    m << 0, 1, 1, 0;
  } else if (name == "pauli_y") {
    m << 0, Complex(0, -1), Complex(0, 1), 0;
  } else if (name == "pauli_z") {
    m << 1, 0, 0, -1;
  } else if (name == "sigma_plus") {
    m << 0, 1, 0, 0;
  } else if (name == "sigma_minus") {
    m << 0, 0, 1, 0;
  } else if (name == "projector_0") {
    m << 1, 0, 0, 0;
  } else if (name == "projector_1") {
    m << 0, 0, 0, 1;
  } else {
    throw std::invalid_argument("unknown operator name '" + name + "' in " +
                                context);
  }
  return m;
}

Matrix parse_state(const Json& node, int dim, const std::string& context) {
  if (node.is_array()) {
    const Matrix m = parse_matrix(node, context);
    if (m.rows() != dim) {
      throw std::invalid_argument("state in " + context +
                                  " does not match the system dimension");
    }
    return m;
  }
  if (!node.is_string()) {
    throw std::invalid_argument("state in " + context +
                                " must be a name or a density matrix");
  }
  const std::string name = node.get<std::string>();
  if (name == "maximally_mixed") {
    return Matrix::Identity(dim, dim) / static_cast<double>(dim);
  }
  if (dim != 2) {
    throw std::invalid_argument("named state '" + name + "' in " + context +
                                " needs a two-level system");
  }
  Matrix m = Matrix::Zero(2, 2);
  if (name == "excited") {
    m(0, 0) = 1.0;
  } else if (name == "ground") {
    m(1, 1) = 1.0;
  } else if (name == "plus_x") {
    m << 0.5, 0.5, 0.5, 0.5;
  } else if (name == "minus_x") {
    m << 0.5, -0.5, -0.5, 0.5;
  } else if (name == "plus_y") {
    m << 0.5, Complex(0, -0.5), Complex(0, 0.5), 0.5;
  } else if (name == "minus_y") {
    m << 0.5, Complex(0, 0.5), Complex(0, -0.5), 0.5;
  } else {
    throw std::invalid_argument("unknown state name '" + name + "' in " +
                                context);
  }
  return m;
}

SystemModel parse_system(const Json& node) {
  SystemModel s;
  s.d_s = require_key(node, "dim", "system").get<int>();
  if (node.contains("schedule")) {
    for (const Json& entry : node.at("schedule")) {
      ScheduleEntry e;
      e.t_start = require_key(entry, "t_start", "system.schedule").get<double>();
      e.h = parse_matrix(require_key(entry, "matrix", "system.schedule"),
                         "system.schedule");
      s.h_schedule.push_back(std::move(e));
    }
  } else {
    s.h_schedule.push_back(
        {0.0, parse_matrix(require_key(node, "hamiltonian", "system"),
                           "system.hamiltonian")});
  }
  if (node.contains("couplings")) {
    for (const Json& c : node.at("couplings")) {
      s.couplings.push_back(parse_operator(c, s.d_s, "system.couplings"));
    }
  }
  s.validate();
  return s;
}

GKLSModel parse_model(const Json& node) {
  const SystemModel system = parse_system(require_key(node, "system", "model"));

  PseudomodeParams bath;
  const Json& bath_node = require_key(node, "bath", "model");
  for (const Json& m : require_key(bath_node, "modes", "bath")) {
    PseudomodeSpec spec;
    spec.omega = require_key(m, "omega", "bath.modes").get<double>();
    spec.gamma = require_key(m, "gamma", "bath.modes").get<double>();
    spec.n_max = require_key(m, "n_max", "bath.modes").get<int>();
    bath.modes.push_back(spec);
  }
  if (bath_node.contains("couplings")) {
    for (const Json& ch : bath_node.at("couplings")) {
      std::vector<Complex> gs;
      for (const Json& g : ch) gs.push_back(parse_complex(g, "bath.couplings"));
      bath.couplings.push_back(std::move(gs));
    }
  }
  if (bath_node.contains("mode_mode")) {
    bath.mode_mode = parse_matrix(bath_node.at("mode_mode"), "bath.mode_mode");
  }

  BathState initial;
  if (node.contains("initial_bath_state")) {
    const Json& st = node.at("initial_bath_state");
    const std::string kind =
        require_key(st, "kind", "initial_bath_state").get<std::string>();
    if (kind == "vacuum") {
      initial.kind = BathState::Kind::Vacuum;
    } else if (kind == "thermal") {
      initial.kind = BathState::Kind::Thermal;
      initial.temperature =
          require_key(st, "temperature", "initial_bath_state").get<double>();
    } else if (kind == "fock") {
      initial.kind = BathState::Kind::Fock;
      for (const Json& n :
           require_key(st, "occupations", "initial_bath_state")) {
        initial.occupations.push_back(n.get<int>());
      }
    } else {
      throw std::invalid_argument("unknown initial_bath_state kind '" + kind +
                                  "'");
    }
  }
  return GKLSModel(system, bath, initial);
}

SpectralDensity parse_spectral_density(const Json& node,
                                       const std::string& base_dir) {
  const std::string kind =
      require_key(node, "kind", "spectral_density").get<std::string>();
  const double temperature = node.value("temperature", 0.0);
  if (kind == "lorentzian") {
    return SpectralDensity::lorentzian(
        require_key(node, "amplitude", "spectral_density").get<double>(),
        require_key(node, "center", "spectral_density").get<double>(),
        require_key(node, "width", "spectral_density").get<double>(),
        temperature);
  }
  if (kind == "ohmic_exp_cutoff") {
    return SpectralDensity::ohmic(
        require_key(node, "coupling", "spectral_density").get<double>(),
        require_key(node, "cutoff", "spectral_density").get<double>(),
        node.value("exponent", 1.0), temperature);
  }
  if (kind == "debye") {
    return SpectralDensity::debye(
        require_key(node, "reorganization", "spectral_density").get<double>(),
        require_key(node, "cutoff", "spectral_density").get<double>(),
        temperature);
  }
  if (kind == "tabulated") {
    if (node.contains("csv_path")) {
      std::string path = node.at("csv_path").get<std::string>();
      if (!base_dir.empty() && !path.empty() && path[0] != '/') {
        path = base_dir + "/" + path;
      }
      return load_tabulated_csv(path, temperature);
    }
    std::vector<double> grid, values;
    for (const Json& w : require_key(node, "grid", "spectral_density")) {
      grid.push_back(w.get<double>());
    }
    for (const Json& v : require_key(node, "values", "spectral_density")) {
      values.push_back(v.get<double>());
    }
    return SpectralDensity::tabulated(std::move(grid), std::move(values),
                                      temperature);
  }
  throw std::invalid_argument("unknown spectral density kind '" + kind + "'");
}

MultiTimeRequest parse_request(const Json& node, int d_s) {
  MultiTimeRequest req;
  for (const Json& t : require_key(node, "times", "request")) {
    req.times.push_back(t.get<double>());
  }
  for (const Json& op : require_key(node, "left_ops", "request")) {
    req.left_ops.push_back(parse_operator(op, d_s, "request.left_ops"));
  }
  for (const Json& op : require_key(node, "right_ops", "request")) {
    req.right_ops.push_back(parse_operator(op, d_s, "request.right_ops"));
  }
  req.validate(d_s);
  return req;
}

std::vector<double> parse_time_grid(const Json& node,
                                    const std::string& context) {
  std::vector<double> grid;
  if (node.is_array()) {
    for (const Json& t : node) grid.push_back(t.get<double>());
  } else if (node.is_object()) {
    const double t_max = require_key(node, "t_max", context).get<double>();
    const int points = require_key(node, "points", context).get<int>();
    if (points < 2 || t_max <= 0.0) {
      throw std::invalid_argument("bad grid in " + context);
    }
    for (int i = 0; i < points; ++i) {
      grid.push_back(t_max * i / (points - 1));
    }
  } else {
    throw std::invalid_argument("expected a grid in " + context);
  }
  return grid;
}

Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open '" + path + "'");
  }
  Json j;
  try {
    in >> j;
  } catch (const Json::parse_error& e) {
    throw std::runtime_error("malformed JSON in '" + path + "': " + e.what());
  }
  return j;
}

}  // namespace mtqs

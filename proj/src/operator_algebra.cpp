#include "mtqs/operator_algebra.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace mtqs {

SpaceLayout::SpaceLayout(std::vector<SpaceFactor> factors)
    : factors_(std::move(factors)) {
  std::set<std::string> seen;
  for (const auto& f : factors_) {
    if (f.dim < 1) {
      throw std::invalid_argument("SpaceLayout: factor '" + f.label +
                                  "' has non-positive dimension");
    }
    if (!seen.insert(f.label).second) {
      throw std::invalid_argument("SpaceLayout: duplicate factor label '" +
                                  f.label + "'");
    }
    total_dim_ *= f.dim;
  }
}

int SpaceLayout::index_of(const std::string& label) const {
  for (std::size_t i = 0; i < factors_.size(); ++i) {
    if (factors_[i].label == label) return static_cast<int>(i);
  }
  throw std::invalid_argument("SpaceLayout: unknown factor label '" + label +
                              "'");
}

int SpaceLayout::dim_of(const std::string& label) const {
  return factors_[static_cast<std::size_t>(index_of(label))].dim;
}

bool SpaceLayout::has(const std::string& label) const {
  return std::any_of(factors_.begin(), factors_.end(),
                     [&](const SpaceFactor& f) { return f.label == label; });
}

SpaceLayout SpaceLayout::sublayout(
    const std::vector<std::string>& labels) const {
  std::vector<SpaceFactor> kept;
  for (const auto& f : factors_) {
    if (std::find(labels.begin(), labels.end(), f.label) != labels.end()) {
      kept.push_back(f);
    }
  }
  if (kept.size() != labels.size()) {
    throw std::invalid_argument("SpaceLayout: sublayout label not present");
  }
  return SpaceLayout(kept);
}

Matrix kron(const Matrix& a, const Matrix& b) {
  const Eigen::Index ar = a.rows(), ac = a.cols();
  const Eigen::Index br = b.rows(), bc = b.cols();
  Matrix out(ar * br, ac * bc);
  for (Eigen::Index i = 0; i < ar; ++i) {
    for (Eigen::Index j = 0; j < ac; ++j) {
      out.block(i * br, j * bc, br, bc) = a(i, j) * b;
    }
  }
  return out;
}

Matrix embed(const Matrix& op, const std::string& factor_label,
             const SpaceLayout& layout) {
  const int idx = layout.index_of(factor_label);
  const auto& factors = layout.factors();
  if (op.rows() != factors[static_cast<std::size_t>(idx)].dim ||
      op.cols() != factors[static_cast<std::size_t>(idx)].dim) {
    throw std::invalid_argument(
        "embed: operator dimension does not match factor '" + factor_label +
        "'");
  }
  Matrix out = Matrix::Identity(1, 1);
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (static_cast<int>(i) == idx) {
      out = kron(out, op);
    } else {
      out = kron(out, Matrix::Identity(factors[i].dim, factors[i].dim));
    }
  }
  return out;
}

Matrix annihilation(int n_max) {
  if (n_max < 2) {
    throw std::invalid_argument("annihilation: n_max must be >= 2");
  }
  Matrix b = Matrix::Zero(n_max, n_max);
  for (int n = 1; n < n_max; ++n) {
    b(n - 1, n) = std::sqrt(static_cast<double>(n));
  }
  return b;
}

Matrix creation(int n_max) { return annihilation(n_max).adjoint(); }

Matrix number_operator(int n_max) {
  if (n_max < 2) {
    throw std::invalid_argument("number_operator: n_max must be >= 2");
  }
  Matrix n = Matrix::Zero(n_max, n_max);
  for (int k = 0; k < n_max; ++k) n(k, k) = static_cast<double>(k);
  return n;
}

namespace {

// Diagonal Pade approximant of order (p,p) evaluated as U, V with
// exp(A) ~ (V+U)(V-U)^{-1}.
void pade_uv(const Matrix& a, const std::vector<double>& b, Matrix& u,
             Matrix& v) {
  const Eigen::Index n = a.rows();
  const Matrix a2 = a * a;
  Matrix even = b[0] * Matrix::Identity(n, n);
  Matrix odd = b[1] * Matrix::Identity(n, n);
  Matrix pw = Matrix::Identity(n, n);
  for (std::size_t k = 2; k < b.size(); k += 2) {
    pw = pw * a2;
    even += b[k] * pw;
    if (k + 1 < b.size()) odd += b[k + 1] * pw;
  }
  u = a * odd;
  v = even;
}

void pade13_uv(const Matrix& a, Matrix& u, Matrix& v) {
  static const double b[] = {64764752532480000.0, 32382376266240000.0,
                             7771770303897600.0,  1187353796428800.0,
                             129060195264000.0,   10559470521600.0,
                             670442572800.0,      33522128640.0,
                             1323241920.0,        40840800.0,
                             960960.0,            16380.0,
                             182.0,               1.0};
  const Eigen::Index n = a.rows();
  const Matrix a2 = a * a;
  const Matrix a4 = a2 * a2;
  const Matrix a6 = a4 * a2;
  Matrix w = b[13] * a6 + b[11] * a4 + b[9] * a2;
  w = a6 * w + b[7] * a6 + b[5] * a4 + b[3] * a2 +
      b[1] * Matrix::Identity(n, n);
  u = a * w;
  v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2);
  v += b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * Matrix::Identity(n, n);
}

}  // namespace

Matrix expm(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument("expm: matrix must be square");
  }
  if (!m.allFinite()) {
    throw std::invalid_argument("expm: matrix has non-finite entries");
  }
  const double norm = m.cwiseAbs().colwise().sum().maxCoeff();

  Matrix u, v;
  int squarings = 0;
  if (norm < 1.495585217958292e-2) {
    pade_uv(m, {120.0, 60.0, 12.0, 1.0}, u, v);
  } else if (norm < 2.539398330063230e-1) {
    pade_uv(m, {30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0}, u, v);
  } else if (norm < 9.504178996162932e-1) {
    pade_uv(m, {17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0,
                56.0, 1.0},
            u, v);
  } else if (norm < 2.097847961257068e0) {
    pade_uv(m, {17643225600.0, 8821612800.0, 2075673600.0, 302702400.0,
                30270240.0, 2162160.0, 110880.0, 3960.0, 90.0, 1.0},
            u, v);
  } else {
    const double max_norm_13 = 5.371920351148152;
    squarings = std::max(0, static_cast<int>(std::ceil(
                                std::log2(norm / max_norm_13))));
    const Matrix scaled = m * std::pow(2.0, -squarings);
    pade13_uv(scaled, u, v);
  }

  Matrix numer = v + u;
  Matrix denom = v - u;
  Matrix result = denom.partialPivLu().solve(numer);
  for (int i = 0; i < squarings; ++i) result = result * result;
  return result;
}

DensityMatrix partial_trace(const DensityMatrix& rho,
                            const std::vector<std::string>& keep_labels) {
  const auto& factors = rho.layout.factors();
  const std::size_t nf = factors.size();
  std::vector<bool> keep(nf, false);
  for (const auto& label : keep_labels) {
    keep[static_cast<std::size_t>(rho.layout.index_of(label))] = true;
  }

  std::vector<int> dims(nf);
  for (std::size_t i = 0; i < nf; ++i) dims[i] = factors[i].dim;

  // Strides of each factor in the full index, and in the kept/traced parts.
  std::vector<long> stride(nf, 1);
  for (std::size_t i = nf; i-- > 1;) {
    stride[i - 1] = stride[i] * dims[i];
  }
  long kept_dim = 1, traced_dim = 1;
  for (std::size_t i = 0; i < nf; ++i) {
    (keep[i] ? kept_dim : traced_dim) *= dims[i];
  }

  std::vector<long> kept_stride(nf, 0), traced_stride(nf, 0);
  {
    long ks = 1, ts = 1;
    for (std::size_t i = nf; i-- > 0;) {
      if (keep[i]) {
        kept_stride[i] = ks;
        ks *= dims[i];
      } else {
        traced_stride[i] = ts;
        ts *= dims[i];
      }
    }
  }

  // Map flattened kept/traced indices back to a full-space index.
  std::vector<long> kept_offset(static_cast<std::size_t>(kept_dim), 0);
  std::vector<long> traced_offset(static_cast<std::size_t>(traced_dim), 0);
  for (long k = 0; k < kept_dim; ++k) {
    long off = 0;
    for (std::size_t i = 0; i < nf; ++i) {
      if (!keep[i]) continue;
      const long digit = (k / kept_stride[i]) % dims[i];
      off += digit * stride[i];
    }
    kept_offset[static_cast<std::size_t>(k)] = off;
  }
  for (long t = 0; t < traced_dim; ++t) {
    long off = 0;
    for (std::size_t i = 0; i < nf; ++i) {
      if (keep[i]) continue;
      const long digit = (t / traced_stride[i]) % dims[i];
      off += digit * stride[i];
    }
    traced_offset[static_cast<std::size_t>(t)] = off;
  }

  Matrix out = Matrix::Zero(kept_dim, kept_dim);
  for (long i = 0; i < kept_dim; ++i) {
    for (long j = 0; j < kept_dim; ++j) {
      Complex acc = 0.0;
      for (long t = 0; t < traced_dim; ++t) {
        acc += rho.matrix(kept_offset[static_cast<std::size_t>(i)] +
                              traced_offset[static_cast<std::size_t>(t)],
                          kept_offset[static_cast<std::size_t>(j)] +
                              traced_offset[static_cast<std::size_t>(t)]);
      }
      out(i, j) = acc;
    }
  }

  return DensityMatrix{rho.layout.sublayout(keep_labels), std::move(out)};
}

Vector vectorize(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument("vectorize: matrix must be square");
  }
  return Eigen::Map<const Vector>(m.data(), m.size());
}

Matrix devectorize(const Vector& v) {
  const auto n = static_cast<Eigen::Index>(
      std::llround(std::sqrt(static_cast<double>(v.size()))));
  if (n * n != v.size()) {
    throw std::invalid_argument(
        "devectorize: length is not a perfect square");
  }
  return Eigen::Map<const Matrix>(v.data(), n, n);
}

bool is_hermitian(const Matrix& m, double tol) {
  return hermiticity_defect(m) <= tol;
}

double hermiticity_defect(const Matrix& m) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

void validate_state(const DensityMatrix& rho) {
  if (rho.matrix.rows() != rho.layout.total_dim()) {
    throw std::invalid_argument("state dimension does not match layout");
  }
  const double herm = hermiticity_defect(rho.matrix);
  if (herm > kHermitianTol) {
    throw std::invalid_argument("state is not hermitian (defect " +
                                std::to_string(herm) + ")");
  }
  const double tr_err = std::abs(rho.matrix.trace() - Complex(1.0));
  if (tr_err > kTraceTol) {
    throw std::invalid_argument("state trace deviates from 1 by " +
                                std::to_string(tr_err));
  }
}

double trace_distance(const Matrix& a, const Matrix& b) {
  Matrix diff = a - b;
  diff = 0.5 * (diff + diff.adjoint().eval());
  Eigen::SelfAdjointEigenSolver<Matrix> es(diff);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

}  // namespace mtqs

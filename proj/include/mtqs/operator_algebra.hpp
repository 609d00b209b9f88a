#pragma once

#include <string>
#include <vector>

#include "mtqs/types.hpp"

namespace mtqs {

/// One tensor factor of a composite Hilbert space.
struct SpaceFactor {
  std::string label;
  int dim = 0;
};

/// Ordered tensor factorization defining all Kronecker embeddings.
/// Factor order is the storage order: the first factor varies slowest.
class SpaceLayout {
 public:
  SpaceLayout() = default;
  explicit SpaceLayout(std::vector<SpaceFactor> factors);

  const std::vector<SpaceFactor>& factors() const { return factors_; }
  int total_dim() const { return total_dim_; }
  std::size_t size() const { return factors_.size(); }

  int index_of(const std::string& label) const;
  int dim_of(const std::string& label) const;
  bool has(const std::string& label) const;

  /// Layout restricted to the given factors, keeping their original order.
  SpaceLayout sublayout(const std::vector<std::string>& labels) const;

 private:
  std::vector<SpaceFactor> factors_;
  int total_dim_ = 1;
};

/// A state (or state-like intermediate) carried together with its layout.
struct DensityMatrix {
  SpaceLayout layout;
  Matrix matrix;
};

/// Kronecker product, (a⊗b)[(i*bd+k),(j*bd+l)] = a(i,j)*b(k,l).
Matrix kron(const Matrix& a, const Matrix& b);

/// Operator on one factor extended by identities on all other factors.
Matrix embed(const Matrix& op, const std::string& factor_label,
             const SpaceLayout& layout);

/// Bosonic annihilation operator on a Fock space truncated to n_max levels.
Matrix annihilation(int n_max);
Matrix creation(int n_max);
Matrix number_operator(int n_max);

/// Matrix exponential, scaling-and-squaring with diagonal Pade approximants.
Matrix expm(const Matrix& m);

/// Trace over the complement of keep_labels.
DensityMatrix partial_trace(const DensityMatrix& rho,
                            const std::vector<std::string>& keep_labels);

/// Column-stacking vectorization; vec(AXB) = (B^T ⊗ A) vec(X).
Vector vectorize(const Matrix& m);
Matrix devectorize(const Vector& v);

bool is_hermitian(const Matrix& m, double tol = kHermitianTol);
double hermiticity_defect(const Matrix& m);

/// Checks trace ~ 1 and hermiticity for a physical state.
void validate_state(const DensityMatrix& rho);

/// (1/2)·||a − b||_1 for hermitian a, b.
double trace_distance(const Matrix& a, const Matrix& b);

}  // namespace mtqs

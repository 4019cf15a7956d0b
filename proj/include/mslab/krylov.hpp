#pragma once

// Short-iterate Lanczos propagator for exp(-i H t) psi and the dense
// eigendecomposition oracle used to cross-check it on small spaces.

#include "mslab/operator.hpp"

namespace mslab {

struct KrylovOptions {
  double tolerance = 1e-12;  ///< bound on the a-posteriori error estimate per sub-step
  int max_dimension = 30;    ///< Krylov basis size
  std::size_t max_substeps = 1000000;
};

struct EvolveStats {
  std::size_t substeps = 0;
  std::size_t matvecs = 0;
  std::size_t rejected = 0;
  double max_error_estimate = 0.0;
};

/// exp(-i H t) psi. H must carry the hermitian flag (std::invalid_argument
/// otherwise). Sub-steps are chosen so that the estimate beta_m |e_m^T exp(-i tau T) e_1|
/// stays below the tolerance; an invariant subspace (happy breakdown) makes
/// the step exact.
Eigen::VectorXcd evolve(const Eigen::VectorXcd& psi, const OperatorHandle& H, double t, const KrylovOptions& options,
                        EvolveStats* stats = nullptr);

/// Dense matrix of an operator, assembled column by column.
Eigen::MatrixXcd dense_matrix(const OperatorHandle& op);

/// Eigendecomposition of a dense Hermitian matrix, reused for many times t.
class DensePropagator {
 public:
  explicit DensePropagator(const Eigen::MatrixXcd& H);
  Eigen::VectorXcd apply(const Eigen::VectorXcd& psi, double t) const;
  const Eigen::VectorXd& eigenvalues() const { return values_; }
  const Eigen::MatrixXcd& eigenvectors() const { return vectors_; }

 private:
  Eigen::VectorXd values_;
  Eigen::MatrixXcd vectors_;
};

}  // namespace mslab

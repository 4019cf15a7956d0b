#include "mslab/krylov.hpp"

#include <cmath>

namespace mslab {

namespace {

struct LanczosBasis {
  Eigen::MatrixXcd V;  // columns v_1 .. v_m
  Eigen::VectorXd diag;
  Eigen::VectorXd offdiag;  // beta_1 .. beta_{m-1}
  double beta_last = 0.0;   // beta_m, couples to the discarded v_{m+1}
  bool invariant = false;
  int size = 0;
  Eigen::VectorXd theta;
  Eigen::MatrixXd Q;
};

void diagonalize(LanczosBasis& b) {
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(b.size, b.size);
  for (int i = 0; i < b.size; ++i) {
    T(i, i) = b.diag(i);
    if (i + 1 < b.size) T(i, i + 1) = T(i + 1, i) = b.offdiag(i);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(T);
  b.theta = eig.eigenvalues();
  b.Q = eig.eigenvectors();
}

double last_component(const LanczosBasis& b, double tau) {
  Complex c = 0.0;
  for (int i = 0; i < b.size; ++i) c += b.Q(b.size - 1, i) * std::exp(-kI * tau * b.theta(i)) * b.Q(0, i);
  return std::abs(c);
}

// Stops early once the error estimate for a step `tau` drops below `target`.
LanczosBasis lanczos(const Eigen::VectorXcd& start, const OperatorHandle& H, int m_max, std::size_t& matvecs,
                     double tau, double target) {
  const Eigen::Index n = start.size();
  const int m_cap = static_cast<int>(std::min<Eigen::Index>(m_max, n));
  LanczosBasis b;
  b.V.resize(n, m_cap);
  b.diag.resize(m_cap);
  b.offdiag.resize(std::max(m_cap - 1, 0));
  b.V.col(0) = start / start.norm();
  Eigen::VectorXcd w(n);
  double scale = 0.0;
  int j = 0;
  for (; j < m_cap; ++j) {
    H.apply(b.V.col(j), w);
    ++matvecs;
    b.diag(j) = b.V.col(j).dot(w).real();
    // two passes of full reorthogonalization
    for (int pass = 0; pass < 2; ++pass) {
      const Eigen::VectorXcd overlap = b.V.leftCols(j + 1).adjoint() * w;
      w -= b.V.leftCols(j + 1) * overlap;
    }
    const double beta = w.norm();
    scale = std::max({scale, std::abs(b.diag(j)), beta});
    if (beta <= 1e-13 * std::max(scale, 1.0)) {
      b.invariant = true;
      b.beta_last = 0.0;
      ++j;
      break;
    }
    if (j + 1 == m_cap) {
      b.beta_last = beta;
      ++j;
      break;
    }
    if (j >= 3) {
      b.size = j + 1;
      diagonalize(b);
      if (beta * last_component(b, tau) <= target) {
        b.beta_last = beta;
        ++j;
        break;
      }
    }
    b.offdiag(j) = beta;
    b.V.col(j + 1) = w / beta;
  }
  b.size = j;
  if (b.size == n) b.invariant = true;
  diagonalize(b);
  return b;
}

// exp(-i tau T) e_1 in the Lanczos basis
Eigen::VectorXcd small_propagator(const LanczosBasis& b, double tau) {
  Eigen::VectorXcd c(b.size);
  for (int i = 0; i < b.size; ++i) c(i) = std::exp(-kI * tau * b.theta(i)) * b.Q(0, i);
  return b.Q.cast<Complex>() * c;
}

}  // namespace

Eigen::VectorXcd evolve(const Eigen::VectorXcd& psi, const OperatorHandle& H, double t, const KrylovOptions& options,
                        EvolveStats* stats) {
  if (!H.hermitian) throw std::invalid_argument("evolve: operator '" + H.name + "' is not flagged Hermitian");
  if (!(options.tolerance > 0.0)) throw std::invalid_argument("evolve: tolerance must be positive");
  if (static_cast<std::size_t>(psi.size()) != H.dimension) throw std::invalid_argument("evolve: dimension mismatch");
  EvolveStats local;
  EvolveStats& st = stats ? *stats : local;

  Eigen::VectorXcd state = psi;
  const double direction = t < 0 ? -1.0 : 1.0;
  double remaining = std::abs(t);
  double tau_guess = remaining;
  while (remaining > 0.0) {
    const double norm = state.norm();
    if (norm == 0.0) break;
    if (st.substeps >= options.max_substeps) throw std::runtime_error("evolve: sub-step limit reached");
    double tau = std::min(remaining, tau_guess);
    const auto basis = lanczos(state, H, options.max_dimension, st.matvecs, direction * tau, options.tolerance / norm);
    Eigen::VectorXcd y;
    double err = 0.0;
    for (;;) {
      y = small_propagator(basis, direction * tau);
      err = basis.invariant ? 0.0 : norm * basis.beta_last * std::abs(y(basis.size - 1));
      if (err <= options.tolerance) break;
      ++st.rejected;
      tau *= 0.5;
      if (tau < 1e-300) throw std::runtime_error("evolve: Krylov step size underflow");
    }
    state = norm * (basis.V.leftCols(basis.size) * y);
    remaining -= tau;
    if (remaining < 1e-15 * std::abs(t)) remaining = 0.0;
    ++st.substeps;
    st.max_error_estimate = std::max(st.max_error_estimate, err);
    // grow only when the accepted step had margin
    tau_guess = err < 0.1 * options.tolerance ? 2.0 * tau : tau;
  }
  return state;
}

Eigen::MatrixXcd dense_matrix(const OperatorHandle& op) {
  const auto n = static_cast<Eigen::Index>(op.dimension);
  Eigen::MatrixXcd M(n, n);
  Eigen::VectorXcd e = Eigen::VectorXcd::Zero(n), col(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    e(j) = 1.0;
    op.apply(e, col);
    M.col(j) = col;
    e(j) = 0.0;
  }
  return M;
}

DensePropagator::DensePropagator(const Eigen::MatrixXcd& H) {
  const Eigen::MatrixXcd sym = 0.5 * (H + H.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(sym);
  if (eig.info() != Eigen::Success) throw std::runtime_error("dense propagator: eigendecomposition failed");
  values_ = eig.eigenvalues();
  vectors_ = eig.eigenvectors();
}

Eigen::VectorXcd DensePropagator::apply(const Eigen::VectorXcd& psi, double t) const {
  Eigen::VectorXcd c = vectors_.adjoint() * psi;
  for (Eigen::Index i = 0; i < c.size(); ++i) c(i) *= std::exp(-kI * values_(i) * t);
  return vectors_ * c;
}

}  // namespace mslab

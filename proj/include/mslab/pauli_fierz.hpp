#pragma once

// Truncated Pauli-Fierz model: N bosons on the lattice sites coupled to the
// retained photon modes, scaling hbar = 1, mu = N^-1/2, g = N^-1.
//
//   H_N = sum_j (-i grad_j - N^-1/2 A(x_j))^2 + N^-1 sum_{j<k} v(x_j - x_k) + H_f
//
// Mode dictionary (fixed here, used everywhere): the delta-normalized a(k, lambda)
// corresponds to a_m / sqrt(w_m) with w_m the measure weight, so that
//   A_i(x) = sum_m sqrt(w_m) (conj(G_{x,i}) a_m + G_{x,i} a_m*),
//   H_f = sum_m |k_m| a_m* a_m,   Number = sum_m a_m* a_m,
// and the coherent amplitude of alpha is z_m = sqrt(N w_m) alpha_m.
//
// Storage: a state is a vector of length P * F (P particle configurations, F
// Fock occupations) with index p * F + f; viewed as an F x P column-major
// matrix X, a product term Q (particles) x O (photons) acts as O X Q^T.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Sparse>

#include "mslab/core.hpp"
#include "mslab/operator.hpp"

namespace mslab {

using SparseMatrixC = Eigen::SparseMatrix<Complex>;

struct FockTruncation {
  int n_max = 1;
  std::size_t n_modes = 0;

  /// (n_max + 1)^n_modes, or 0 if that overflows 2^62.
  std::size_t dimension() const;
};

/// Symmetric N-boson sector in the occupation basis over lattice sites.
/// Configurations are ordered lexicographically with site 0 most significant
/// and larger occupations first, so (N, 0, ..., 0) has index 0.
class ParticleBasis {
 public:
  ParticleBasis(int n_particles, std::size_t n_sites);

  int n_particles() const { return n_particles_; }
  std::size_t n_sites() const { return n_sites_; }
  std::size_t size() const { return size_; }
  std::span<const int> occupations(std::size_t index) const {
    return {occupations_.data() + index * n_sites_, n_sites_};
  }
  int occupation(std::size_t index, std::size_t site) const { return occupations_[index * n_sites_ + site]; }
  /// Throws std::out_of_range for a configuration outside the sector.
  std::size_t index_of(std::span<const int> occupations) const;

  /// C(N + S - 1, N), or 0 on overflow.
  static std::size_t count(int n_particles, std::size_t n_sites);

 private:
  int n_particles_;
  std::size_t n_sites_;
  std::size_t size_ = 0;
  std::vector<int> occupations_;
  std::map<std::vector<int>, std::size_t> lookup_;
};

/// Per-mode occupations 0..n_max, mixed radix with mode 0 most significant.
class FockBasis {
 public:
  explicit FockBasis(const FockTruncation& truncation);

  std::size_t size() const { return size_; }
  std::size_t n_modes() const { return truncation_.n_modes; }
  int n_max() const { return truncation_.n_max; }
  std::size_t stride(std::size_t mode) const { return strides_[mode]; }
  int occupation(std::size_t index, std::size_t mode) const {
    return static_cast<int>((index / strides_[mode]) % static_cast<std::size_t>(truncation_.n_max + 1));
  }
  /// Total photon number of each basis vector.
  const Eigen::VectorXd& total_occupation() const { return total_; }

 private:
  FockTruncation truncation_;
  std::size_t size_ = 0;
  std::vector<std::size_t> strides_;
  Eigen::VectorXd total_;
};

/// Photon-side actions on blocks of Fock vectors (columns of length F).
/// All of them accumulate: Y += c * Op X.
void add_annihilation(const FockBasis& fock, std::size_t mode, const Eigen::Ref<const Eigen::MatrixXcd>& X,
                      Eigen::Ref<Eigen::MatrixXcd> Y, Complex c = 1.0);
void add_creation(const FockBasis& fock, std::size_t mode, const Eigen::Ref<const Eigen::MatrixXcd>& X,
                  Eigen::Ref<Eigen::MatrixXcd> Y, Complex c = 1.0);

/// F x P column-major view of a state vector.
inline Eigen::Map<const Eigen::MatrixXcd> fock_view(const Eigen::VectorXcd& v, std::size_t fock_dim) {
  return {v.data(), static_cast<Eigen::Index>(fock_dim), static_cast<Eigen::Index>(v.size() / fock_dim)};
}
inline Eigen::Map<Eigen::MatrixXcd> fock_view(Eigen::VectorXcd& v, std::size_t fock_dim) {
  return {v.data(), static_cast<Eigen::Index>(fock_dim), static_cast<Eigen::Index>(v.size() / fock_dim)};
}

struct ManyBodyState {
  int n_particles = 0;
  std::size_t particle_dim = 0;
  std::size_t fock_dim = 0;
  Eigen::VectorXcd amplitudes;
  double time = 0.0;
};

/// Matched microscopic model. Owns the bases, the second-quantized one-body
/// matrices and the photon tables; all operator applications are read-only
/// and safe to call concurrently.
class PauliFierzSystem {
 public:
  /// Refuses (ResourceError) if P * F exceeds `max_dimension`.
  PauliFierzSystem(const ModelGrid& grid, const ChargeDistribution& kappa, const PairPotential& v, int n_particles,
                   const FockTruncation& truncation, std::size_t max_dimension);

  const ModelGrid& grid() const { return *grid_; }
  const ChargeDistribution& kappa() const { return *kappa_; }
  const PairPotential& potential() const { return *potential_; }
  int n_particles() const { return n_particles_; }
  const FockTruncation& truncation() const { return truncation_; }
  const ParticleBasis& particles() const { return particles_; }
  /// N - 1 particle sector, target of the annihilators b_x.
  const ParticleBasis& reduced_particles() const { return reduced_; }
  const FockBasis& fock() const { return fock_; }
  std::size_t particle_dim() const { return particles_.size(); }
  std::size_t fock_dim() const { return fock_.size(); }
  std::size_t dimension() const { return particles_.size() * fock_.size(); }
  int space_dim() const { return grid_->dim; }

  /// sqrt(w_m) G_{x,i}(m): g(i)(x, m)
  const Eigen::MatrixXcd& weighted_coupling(int component) const { return g_[component]; }

  /// Y += c A_i(x) X on the photon side.
  void add_field(int component, std::size_t site, const Eigen::Ref<const Eigen::MatrixXcd>& X,
                 Eigen::Ref<Eigen::MatrixXcd> Y, Complex c = 1.0) const;

  /// Second-quantized sum_xy Q_xy b_x* b_y on the N-particle sector.
  SparseMatrixC one_body(const Eigen::MatrixXcd& Q) const;
  /// Particle-number diagonal n_x over the N-particle configurations.
  const Eigen::VectorXd& site_occupation(std::size_t site) const { return occupation_[site]; }

  /// b_x Psi, a vector on (N - 1 particles) x Fock.
  Eigen::VectorXcd annihilate_particle(std::size_t site, const Eigen::VectorXcd& psi) const;

  /// X_m Psi, defined by [H_N, a_m] = -|k_m| a_m - X_m on the truncated space:
  ///   X_m = -N^-1/2 dGamma(B_m^dagger) Pi_m + N^-1 sum_x n_x sum_i g_i(x, m) (A_i(x) Pi_m + Pi_m A_i(x))
  /// with Pi_m = [a_m, a_m*] (identity below the cutoff, -n_max at it).
  Eigen::VectorXcd field_force(std::size_t mode, const Eigen::VectorXcd& psi) const;

  /// H_N Psi
  void apply_hamiltonian(const Eigen::VectorXcd& in, Eigen::VectorXcd& out) const;

  OperatorHandle hamiltonian() const;
  OperatorHandle field_energy() const;
  OperatorHandle photon_number() const;
  OperatorHandle annihilation(std::size_t mode) const;
  OperatorHandle creation(std::size_t mode) const;
  OperatorHandle field(int component, std::size_t site) const;

  /// Coupling matrices B_m with (B_m)_xy = sum_i P_i,xy (conj g_i(x, m) + conj g_i(y, m)),
  /// so the linear coupling is -N^-1/2 sum_m (B_m x a_m + B_m^dagger x a_m*).
  const Eigen::MatrixXcd& coupling_matrix(std::size_t mode) const { return coupling_[mode]; }

 private:
  const ModelGrid* grid_;
  const ChargeDistribution* kappa_;
  const PairPotential* potential_;
  int n_particles_;
  FockTruncation truncation_;
  ParticleBasis particles_;
  ParticleBasis reduced_;
  FockBasis fock_;
  std::array<Eigen::MatrixXcd, 3> g_;
  std::vector<Eigen::VectorXd> occupation_;
  std::vector<Eigen::MatrixXcd> coupling_;

  SparseMatrixC kinetic_t_;                  // one_body(kinetic)^T
  std::vector<SparseMatrixC> coupling_t_;    // one_body(B_m)^T
  std::vector<SparseMatrixC> coupling_h_t_;  // one_body(B_m^dagger)^T
  Eigen::VectorXd particle_diagonal_;        // pair potential
  Eigen::VectorXd field_diagonal_;           // H_f
  /// annihilation_table_[x] lists (source config, target config, sqrt(n_x))
  struct Hop {
    std::size_t from, to;
    double coefficient;
  };
  std::vector<std::vector<Hop>> annihilation_table_;
};

/// Per-mode truncated coherent vectors, then their tensor product.
struct CoherentState {
  Eigen::VectorXcd vector;  ///< length F, normalized
  double tail_mass = 0.0;   ///< 1 - prod_m (1 - tail_m), before renormalization
  std::vector<double> mode_tails;
};

/// Poisson tail sum_{n > n_max} exp(-|z|^2) |z|^{2n} / n!, summed directly.
double poisson_tail(double z_abs_sq, int n_max);

/// W(sqrt(N) alpha) Omega on the truncated Fock space. Throws TruncationError
/// if the tail mass exceeds `tail_tolerance`.
CoherentState coherent_state(const Eigen::VectorXcd& alpha, int n_particles, const ModelGrid& grid,
                             const FockTruncation& truncation, double tail_tolerance);

/// Occupation-basis amplitudes of phi^{(x)N}: sqrt(N! / prod n_x!) prod c_x^{n_x},
/// c_x = h^{d/2} phi(x).
Eigen::VectorXcd product_particle_vector(const Eigen::VectorXcd& phi, const ParticleBasis& basis,
                                         const ModelGrid& grid);

/// phi^{(x)N} (x) W(sqrt(N) alpha) Omega
ManyBodyState product_initial_state(const Eigen::VectorXcd& phi, const Eigen::VectorXcd& alpha,
                                    const PauliFierzSystem& system, double tail_tolerance);

/// Kronecker product of a particle vector and a Fock vector in the storage layout.
ManyBodyState tensor_state(const Eigen::VectorXcd& particle, const Eigen::VectorXcd& fock,
                           const PauliFierzSystem& system);

/// power = 0.5: |Number^1/2 Psi|; power = 1: <Psi, Number Psi>.
double photon_number_moment(const ManyBodyState& state, const PauliFierzSystem& system, double power);

/// gamma_xy = N^-1 <b_y Psi, b_x Psi>, in the h^{d/2}-scaled site basis (trace 1).
Eigen::MatrixXcd reduced_density_particle(const ManyBodyState& state, const PauliFierzSystem& system);

/// gamma_mm' = N^-1 <a_m' Psi, a_m Psi> on the retained modes (trace = <Number> / N).
Eigen::MatrixXcd reduced_density_photon(const ManyBodyState& state, const PauliFierzSystem& system);

/// <Psi, O Psi> / <Psi, Psi> is not taken: plain <Psi, O Psi>.
Complex expectation(const OperatorHandle& op, const Eigen::VectorXcd& psi);

/// Flat binary snapshot: u64 LE header (N, n_sites, n_modes, n_max), then the
/// amplitudes as LE double (re, im) pairs in storage order.
void write_pf_snapshot(std::ostream& out, const ManyBodyState& state, const PauliFierzSystem& system);
ManyBodyState read_pf_snapshot(std::istream& in, const PauliFierzSystem& system);

}  // namespace mslab

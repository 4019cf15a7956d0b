#pragma once

// Discretization shared by the effective (Maxwell-Schroedinger) solver and the
// microscopic (Pauli-Fierz) model: periodic lattice, retained photon modes with
// Coulomb-gauge polarizations, charge form factors, pair potentials and the
// site/mode coupling table.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mslab/types.hpp"

namespace mslab {

struct DiscretizationConfig {
  int dim = 1;
  int sites_per_dim = 4;
  double box_length = 2.0 * kPi;
  double k_max = 1.0;
};

/// One retained (k, lambda) field degree of freedom.
struct ModeSlot {
  std::array<int, 3> k_index{0, 0, 0};  ///< k = dual_lattice_spacing * k_index
  Vec3 k{0.0, 0.0, 0.0};
  double k_norm = 0.0;
  int lambda = 1;  ///< 1 or 2 in dim 3, always 1 in dim 1
  Vec3 epsilon{0.0, 0.0, 0.0};
  double measure_weight = 0.0;  ///< (2 pi / box_length)^dim, replaces d^dk
};

/// Periodic lattice plus retained mode set. Immutable after build_grid().
///
/// Besides geometry it owns the spectral lattice operators so that the
/// effective and microscopic kinetic terms are the same matrices:
///   kinetic   = F^-1 diag(|p|^2) F      (full spectral Laplacian, -Delta)
///   momentum  = F^-1 diag(p_i) F         (Nyquist component zeroed)
/// Both act on site amplitudes and are Hermitian.
struct ModelGrid {
  int dim = 1;
  int sites_per_dim = 0;
  double box_length = 0.0;
  double k_max = 0.0;
  double spacing = 0.0;               ///< lattice constant h
  double cell_volume = 0.0;           ///< h^dim
  double dual_lattice_spacing = 0.0;  ///< 2 pi / box_length
  std::vector<Vec3> site_positions;
  std::vector<std::array<int, 3>> site_index;
  std::vector<ModeSlot> retained_modes;

  Eigen::MatrixXcd kinetic;
  std::array<Eigen::MatrixXcd, 3> momentum;
  /// phases(x, m) = exp(i k_m . x)
  Eigen::MatrixXcd phases;
  /// Lattice momenta (fft ordering) used by the spectral operators.
  std::vector<Vec3> lattice_momenta;

  std::size_t n_sites() const { return site_positions.size(); }
  std::size_t n_modes() const { return retained_modes.size(); }
  double volume() const { return cell_volume * static_cast<double>(n_sites()); }
  /// Site label of x - y (componentwise modulo the lattice), used for pair potentials.
  std::size_t displacement_index(std::size_t x, std::size_t y) const;
  /// Largest |p|^2 on the lattice (sets the explicit-stepping bound).
  double max_kinetic_eigenvalue() const;
};

ModelGrid build_grid(const DiscretizationConfig& config);

/// Transverse, orthonormal pair for a nonzero 3-vector k. If k is parallel to
/// z the pair is (x, y); otherwise e1 = (k x z)/|k x z| and e2 = k_hat x e1.
std::pair<Vec3, Vec3> polarization_basis(const Vec3& k);

enum class ChargeKind { none, gaussian, sharp_cutoff, dipole, custom };

struct ChargeParams {
  double sigma = 1.0;   ///< gaussian width
  double cutoff = 1.0;  ///< sharp-cutoff Lambda
  double charge = 1.0;  ///< total charge e
  std::vector<double> custom_values;
};

/// Real form factor F[kappa](k) sampled on the retained modes.
struct ChargeDistribution {
  ChargeKind kind = ChargeKind::none;
  std::vector<double> fourier_values;
  double total_charge = 0.0;

  /// sum_modes weight (|k|^-2 + |k|) F^2, the discrete form of the
  /// infrared/ultraviolet admissibility condition on the form factor.
  double admissibility_norm_sq = 0.0;
  /// sum_modes weight (|k|^-1/2 + |k|^-1)^2 F^2.
  double coupling_norm_sq = 0.0;

  double value(std::size_t mode) const { return fourier_values[mode]; }
};

ChargeDistribution charge_preset(ChargeKind kind, const ChargeParams& params, const ModelGrid& grid);
std::string to_string(ChargeKind kind);
ChargeKind charge_kind_from_string(const std::string& name);

/// Dawson integral D(y) = exp(-y^2) int_0^y exp(t^2) dt.
double dawson(double y);

enum class PotentialKind { zero, softened_coulomb, gaussian_well, custom };

struct PotentialParams {
  double charge = 1.0;     ///< softened_coulomb: v = e^2 / sqrt(r^2 + s^2)
  double softening = 1.0;  ///< s
  double strength = 1.0;   ///< gaussian_well: v = a exp(-r^2 / (2 s^2))
  double width = 1.0;
  std::vector<double> custom_values;
};

/// Pair potential on relative lattice displacements (minimum-image distance).
struct PairPotential {
  PotentialKind kind = PotentialKind::zero;
  std::vector<double> values;  ///< indexed like sites: values[displacement_index]
  /// circulant(x, y) = v(x - y)
  Eigen::MatrixXd circulant;

  double at(std::size_t displacement) const { return values[displacement]; }
  bool is_zero() const;
};

PairPotential potential_preset(PotentialKind kind, const PotentialParams& params, const ModelGrid& grid);
std::string to_string(PotentialKind kind);
PotentialKind potential_kind_from_string(const std::string& name);

/// G_x(k, lambda) = F[kappa](k) (2|k|)^-1/2 eps_lambda(k) exp(-i k.x).
struct CouplingTable {
  /// g[i](x, m) is the i-th Cartesian component of G_x for mode m.
  std::array<Eigen::MatrixXcd, 3> g;
  int dim = 1;

  Complex at(std::size_t site, std::size_t mode, int component) const { return g[component](site, mode); }
};

CouplingTable build_coupling_table(const ModelGrid& grid, const ChargeDistribution& kappa);

/// ( sum weight (1 + |k|^2)^m |alpha|^2 )^1/2
double weighted_alpha_norm(const Eigen::VectorXcd& alpha, const ModelGrid& grid, double m);

/// Mode table export: kx,ky,kz,lambda,eps_x,eps_y,eps_z,Fkappa,weight.
void write_mode_table_csv(std::ostream& out, const ModelGrid& grid, const ChargeDistribution& kappa);

/// printf("%.17g") formatting used for every CSV number.
std::string format_double(double value);

}  // namespace mslab

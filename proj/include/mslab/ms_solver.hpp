#pragma once

// Effective Maxwell-Schroedinger dynamics for (phi, alpha) on a ModelGrid.
//
//   i d/dt phi   = (-i grad - kappa*A)^2 phi + (v * |phi|^2) phi
//   i d/dt alpha = |k| alpha - (2 pi)^{d/2} (2|k|)^{-1/2} F[kappa](k) eps . F[j](k)
//
// with the kinetic operator realized as -Delta - (P.A + A.P) + A^2 (spectral
// Laplacian, Nyquist-free momentum P), identical to the microscopic model.

#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "mslab/core.hpp"

namespace mslab {

struct EffectiveState {
  Eigen::VectorXcd phi;    ///< site values, sum_x h^d |phi|^2 = 1
  Eigen::VectorXcd alpha;  ///< one amplitude per ModeSlot
  double time = 0.0;
};

struct ConservationLedger {
  double time = 0.0;
  double energy = 0.0;
  double l2_norm = 0.0;
  double divA_residual = 0.0;
  double alpha_h_norm = 0.0;
  double alpha_h32_norm = 0.0;
};

/// Everything the effective equations need besides the state.
struct MsContext {
  const ModelGrid* grid = nullptr;
  const ChargeDistribution* kappa = nullptr;
  const PairPotential* potential = nullptr;
};

/// Vector potential at the lattice sites. With `kappa` the smeared field
/// kappa * A is returned (each mode term scaled by (2 pi)^{d/2} F[kappa](k)).
VectorField reconstruct_A(const Eigen::VectorXcd& alpha, const ModelGrid& grid,
                          const ChargeDistribution* kappa = nullptr);

/// Lattice divergence of the mode expansion of A, max over sites. Zero in the
/// scalarized one-dimensional model by definition.
double divergence_residual(const Eigen::VectorXcd& alpha, const ModelGrid& grid);

/// j = 2 (Im(conj(phi) grad phi) - |phi|^2 kappa*A), spectral gradient.
VectorField compute_current(const Eigen::VectorXcd& phi, const VectorField& A_smeared, const ModelGrid& grid);

/// Continuum-normalized transform (2 pi)^{-d/2} sum_x h^d j(x) exp(-i k.x) per mode and component.
Eigen::MatrixXcd fourier_current(const VectorField& j, const ModelGrid& grid);

/// Full right-hand side |k| alpha - prefactor F eps . F[j] of i d/dt alpha.
Eigen::VectorXcd alpha_source(const VectorField& j, const Eigen::VectorXcd& alpha, const ChargeDistribution& kappa,
                              const ModelGrid& grid);

/// Only the current-driven part, prefactor F eps . F[j] (so i d/dt alpha = |k| alpha - s).
Eigen::VectorXcd current_drive(const VectorField& j, const ChargeDistribution& kappa, const ModelGrid& grid);

/// (v * |phi|^2)(x) = sum_y h^d v(x - y) |phi(y)|^2
Eigen::VectorXd mean_field_potential(const Eigen::VectorXcd& phi, const ModelGrid& grid, const PairPotential& v);

/// Applies the magnetic kinetic operator -Delta - (P.A + A.P) + A^2 to psi.
Eigen::VectorXcd apply_kinetic(const Eigen::VectorXcd& psi, const VectorField& A_smeared, const ModelGrid& grid);

/// One-particle mean-field generator h = K_A + v * |phi|^2 as a dense matrix.
Eigen::MatrixXcd mean_field_hamiltonian(const EffectiveState& state, const MsContext& ctx);

struct MsDerivative {
  Eigen::VectorXcd dphi;
  Eigen::VectorXcd dalpha;
};

MsDerivative ms_rhs(const EffectiveState& state, const MsContext& ctx);

/// Explicit bound dt <= C / max|p|^2 for the classical fourth-order stage on phi.
double stability_bound(const ModelGrid& grid);

/// One Lawson (integrating-factor) fourth-order step; exp(-i|k|dt) is exact on
/// the free field rotation. No renormalization. Throws StabilityError if the
/// norm of phi moves by more than 1e-3 in the step.
EffectiveState step(const EffectiveState& state, double dt, const MsContext& ctx);

double ms_energy(const EffectiveState& state, const MsContext& ctx);

double l2_norm(const Eigen::VectorXcd& phi, const ModelGrid& grid);

ConservationLedger conservation_entry(const EffectiveState& state, const MsContext& ctx);

/// Integrates n_steps steps of size dt; calls `on_sample` every `stride`
/// steps (and at the start).
EffectiveState integrate(EffectiveState state, double dt, std::size_t n_steps, std::size_t stride, const MsContext& ctx,
                         const std::function<void(const EffectiveState&)>& on_sample = {});

/// Self-consistent ground state of -Delta + v*|phi|^2 (alpha = 0, kappa = 0)
/// by damped lowest-eigenvector iteration from `guess`.
Eigen::VectorXcd ground_state_iterate(const Eigen::VectorXcd& guess, const ModelGrid& grid, const PairPotential& v,
                                      double tolerance = 1e-13, int max_iterations = 500);

/// Normalizes site values so that sum_x h^d |phi|^2 = 1.
Eigen::VectorXcd normalized(const Eigen::VectorXcd& phi, const ModelGrid& grid);

/// Periodic Gaussian wave packet exp(-|x - c|^2 / (2 w^2) + i p.x), normalized.
/// Distances use the minimum image so the packet is smooth on the torus.
Eigen::VectorXcd gaussian_packet(const ModelGrid& grid, const Vec3& center, double width, const Vec3& momentum);

/// exp(i p.x) / sqrt(V).
Eigen::VectorXcd plane_wave(const ModelGrid& grid, const Vec3& momentum);

/// Flat binary snapshot: int64 LE header (dim, sites_per_dim, n_sites,
/// n_modes), then phi and alpha as LE double (re, im) pairs.
void write_ms_snapshot(std::ostream& out, const EffectiveState& state, const ModelGrid& grid);
EffectiveState read_ms_snapshot(std::istream& in, const ModelGrid& grid);

}  // namespace mslab

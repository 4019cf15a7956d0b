#pragma once

// Convergence functionals comparing a many-body state with an effective
// (phi, alpha) pair, plus the identities used to control them:
//
//   beta_a = <Psi, q_1 Psi>                 (condensate depletion)
//   beta_b = sum_m |(a_m / sqrt(N) - sqrt(w_m) alpha_m) Psi|^2
//   beta_c = |(H_N / N - E_M[phi, alpha]) Psi|^2
//
// Site vectors enter in the h^{d/2}-scaled basis of the particle sector,
// photon amplitudes as sqrt(w) alpha.

#include <vector>

#include "mslab/ms_solver.hpp"
#include "mslab/pauli_fierz.hpp"

namespace mslab {

/// 1 - <phi, gamma phi>
double beta_a(const ManyBodyState& state, const PauliFierzSystem& system, const Eigen::VectorXcd& phi);

/// Direct expansion over the retained modes.
double beta_b(const ManyBodyState& state, const PauliFierzSystem& system, const Eigen::VectorXcd& alpha);

struct WeylBetaB {
  double value = 0.0;
  double tail_mass = 0.0;  ///< max over modes of |1 - |W_m^-1 Psi|^2| on the extended cutoff
  int extended_cutoff = 0;
};

/// N^-1 <W^-1 Psi, Number W^-1 Psi> with W^-1(sqrt(N) alpha) built mode by
/// mode as exp(-z a* + conj(z) a) on an extended cutoff n_max + padding; only
/// the mode being counted is displaced, the others cancel by unitarity.
/// padding < 0 chooses one from |z|. Throws TruncationError above
/// `tail_tolerance`, ResourceError if one extended copy exceeds `max_dimension`.
WeylBetaB beta_b_weyl(const ManyBodyState& state, const PauliFierzSystem& system, const Eigen::VectorXcd& alpha,
                      double tail_tolerance, std::size_t max_dimension, int padding = -1);

double beta_c(const ManyBodyState& state, const PauliFierzSystem& system, const EffectiveState& effective,
              const MsContext& ctx);

/// Sum of |eigenvalues| of rho - sigma. Rejects non-Hermitian input.
double trace_distance(const Eigen::MatrixXcd& rho, const Eigen::MatrixXcd& sigma);

/// h^{d/2} phi
Eigen::VectorXcd scaled_orbital(const Eigen::VectorXcd& phi, const ModelGrid& grid);
/// sqrt(w) alpha
Eigen::VectorXcd scaled_amplitudes(const Eigen::VectorXcd& alpha, const ModelGrid& grid);

struct BetaReport {
  double time = 0.0;
  double beta_a = 0.0;
  double beta_b = 0.0;
  double beta_c = 0.0;
  double trace_dist_particle = 0.0;
  double trace_dist_photon = 0.0;
  double a_N = 0.0, b_N = 0.0, c_N = 0.0;  ///< values at the first sample of the run
  double energy_many_body = 0.0;           ///< <H_N> / N
  double energy_effective = 0.0;           ///< E_M[phi, alpha]
  double photon_number = 0.0;              ///< <Number>
  double photon_number_root = 0.0;         ///< |Number^1/2 Psi|
  double source_norm = 0.0;
  double parseval_residual = 0.0;
};

BetaReport beta_report(const ManyBodyState& state, const PauliFierzSystem& system, const EffectiveState& effective,
                       const MsContext& ctx);

/// Lattice-exact integrand of d beta_b / dt along (Psi_t, phi_t, alpha_t):
///   sum_m 2 Im < d_m Psi, (X_m / sqrt(N) + sqrt(w_m) s_m) Psi >
/// with d_m = a_m / sqrt(N) - sqrt(w_m) alpha_m, X_m from PauliFierzSystem::field_force
/// and s_m the current drive of the alpha equation.
double beta_b_integrand(const Eigen::VectorXcd& psi, const PauliFierzSystem& system, const EffectiveState& effective,
                        const MsContext& ctx);

/// Integrand of d beta_a / dt: -2 Im <Psi, p_1 D q_1 Psi> with
///   D = -(P.A'' + A''.P) + (N^-1 A^2 - A_cl^2) - v * |phi|^2 + N^-1 sum_{k >= 2} v(x_1 - x_k),
///   A'' = N^-1/2 A - A_cl,
/// evaluated through the vectors b_x Psi.
double beta_a_integrand(const Eigen::VectorXcd& psi, const PauliFierzSystem& system, const EffectiveState& effective,
                        const MsContext& ctx);

struct TrajectorySample {
  double time = 0.0;
  Eigen::VectorXcd psi;
  EffectiveState effective;
};

struct DerivativeReport {
  std::vector<double> times;
  std::vector<double> central_difference;
  std::vector<double> integrand;
  double max_residual = 0.0;           ///< max |central difference - integrand|
  double max_relative_residual = 0.0;  ///< max_residual / max |integrand|
  double max_third_derivative = 0.0;   ///< from third differences of the samples
  double differencing_bound = 0.0;     ///< spacing^2 / 6 * max |beta'''|
  double spacing = 0.0;
};

/// Samples must be equally spaced (at least five).
DerivativeReport beta_b_derivative_check(const std::vector<TrajectorySample>& samples, const PauliFierzSystem& system,
                                         const MsContext& ctx);
DerivativeReport beta_a_derivative_check(const std::vector<TrajectorySample>& samples, const PauliFierzSystem& system,
                                         const MsContext& ctx);

/// Lattice quadrature of int dy |(N^-1/2 F+(y) - F+(y, t)) Psi|^2 against
/// (1/2) (2 pi)^d beta_b; returns |lhs - rhs| / (rhs + 1e-300).
struct ParsevalCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;
};
ParsevalCheck parseval_beta_b_check(const ManyBodyState& state, const PauliFierzSystem& system,
                                    const Eigen::VectorXcd& alpha);

/// max over sites and components of |A_i(x) psi - (-i eta * F+ + i eta * F-)_i(x) psi| / |psi|,
/// eta the lattice cutoff function with transform (2 pi)^{-d/2} |k|^{-1/2} F[kappa](k).
double auxiliary_field_residual(const Eigen::VectorXcd& psi, const PauliFierzSystem& system);

/// ( sum_m w |k|^-1 F^2 |eps . F[j]|^2 )^1/2 for j = j[phi, A_smeared].
double current_source_norm(const Eigen::VectorXcd& phi, const VectorField& A_smeared,
                           const ChargeDistribution& kappa, const ModelGrid& grid);

struct GronwallFit {
  double rate = 0.0;            ///< smallest Lambda >= 0 with beta + 1/N <= (beta_0 + 1/N) e^{Lambda t}
  double slope = 0.0;           ///< least-squares slope of log(beta + 1/N)
  double slope_uncertainty = 0.0;
  bool dominated = false;       ///< envelope holds at every sample with `rate`
};
GronwallFit gronwall_envelope_check(const std::vector<double>& times, const std::vector<double>& beta,
                                    double n_particles);

struct SqrtEnvelopeFit {
  double coefficient = 0.0;  ///< least-squares c in d(t) ~ c sqrt(t)
  double rms_residual = 0.0;
  double amplitude = 0.0;    ///< c sqrt(t_max)
  bool accepted = false;     ///< c >= 0 and rms_residual < 0.1 amplitude
};
/// Fits growth(t) = c sqrt(t) through the origin.
SqrtEnvelopeFit sqrt_envelope_fit(const std::vector<double>& times, const std::vector<double>& growth);

}  // namespace mslab

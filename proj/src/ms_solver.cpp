#include "mslab/ms_solver.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "mslab/binary_io.hpp"

namespace mslab {

namespace {

double mode_prefactor(const ModeSlot& mode, int dim) {
  return std::pow(2.0 * kPi, 0.5 * dim) / std::sqrt(2.0 * mode.k_norm);
}

}  // namespace

VectorField reconstruct_A(const Eigen::VectorXcd& alpha, const ModelGrid& grid, const ChargeDistribution* kappa) {
  const std::size_t S = grid.n_sites();
  const std::size_t M = grid.n_modes();
  VectorField A = VectorField::Zero(S, grid.dim);
  const double unsmeared = std::pow(2.0 * kPi, -0.5 * grid.dim);
  for (std::size_t m = 0; m < M; ++m) {
    const auto& mode = grid.retained_modes[m];
    double coef = mode.measure_weight / std::sqrt(2.0 * mode.k_norm);
    coef *= kappa ? kappa->fourier_values[m] : unsmeared;
    if (coef == 0.0 || alpha(m) == Complex(0.0)) continue;
    for (std::size_t x = 0; x < S; ++x) {
      // e^{ikx} alpha + c.c.
      const double wave = 2.0 * (grid.phases(x, m) * alpha(m)).real();
      for (int i = 0; i < grid.dim; ++i) A(x, i) += coef * mode.epsilon[i] * wave;
    }
  }
  return A;
}

double divergence_residual(const Eigen::VectorXcd& alpha, const ModelGrid& grid) {
  if (grid.dim == 1) return 0.0;
  const double unsmeared = std::pow(2.0 * kPi, -0.5 * grid.dim);
  double worst = 0.0;
  for (std::size_t x = 0; x < grid.n_sites(); ++x) {
    double div = 0.0;
    for (std::size_t m = 0; m < grid.n_modes(); ++m) {
      const auto& mode = grid.retained_modes[m];
      const double coef = unsmeared * mode.measure_weight / std::sqrt(2.0 * mode.k_norm);
      // grad of e^{ikx} alpha + c.c. dotted with eps: (k . eps) 2 Re(i e^{ikx} alpha)
      div += coef * dot(mode.k, mode.epsilon) * 2.0 * (kI * grid.phases(x, m) * alpha(m)).real();
    }
    worst = std::max(worst, std::abs(div));
  }
  return worst;
}

VectorField compute_current(const Eigen::VectorXcd& phi, const VectorField& A_smeared, const ModelGrid& grid) {
  VectorField j(grid.n_sites(), grid.dim);
  for (int i = 0; i < grid.dim; ++i) {
    const Eigen::VectorXcd p_phi = grid.momentum[i] * phi;
    for (std::size_t x = 0; x < grid.n_sites(); ++x)
      j(x, i) = 2.0 * (std::conj(phi(x)) * (p_phi(x) - A_smeared(x, i) * phi(x))).real();
  }
  return j;
}

Eigen::MatrixXcd fourier_current(const VectorField& j, const ModelGrid& grid) {
  const double factor = std::pow(2.0 * kPi, -0.5 * grid.dim) * grid.cell_volume;
  // phases^H j gives sum_x e^{-ikx} j(x)
  return factor * (grid.phases.adjoint() * j.cast<Complex>());
}

Eigen::VectorXcd current_drive(const VectorField& j, const ChargeDistribution& kappa, const ModelGrid& grid) {
  const Eigen::MatrixXcd Fj = fourier_current(j, grid);
  Eigen::VectorXcd s(grid.n_modes());
  for (std::size_t m = 0; m < grid.n_modes(); ++m) {
    const auto& mode = grid.retained_modes[m];
    Complex eps_dot = 0.0;
    for (int i = 0; i < grid.dim; ++i) eps_dot += mode.epsilon[i] * Fj(m, i);
    s(m) = mode_prefactor(mode, grid.dim) * kappa.fourier_values[m] * eps_dot;
  }
  return s;
}

Eigen::VectorXcd alpha_source(const VectorField& j, const Eigen::VectorXcd& alpha, const ChargeDistribution& kappa,
                              const ModelGrid& grid) {
  Eigen::VectorXcd rhs = -current_drive(j, kappa, grid);
  for (std::size_t m = 0; m < grid.n_modes(); ++m) rhs(m) += grid.retained_modes[m].k_norm * alpha(m);
  return rhs;
}

Eigen::VectorXd mean_field_potential(const Eigen::VectorXcd& phi, const ModelGrid& grid, const PairPotential& v) {
  const Eigen::VectorXd density = phi.cwiseAbs2();
  return grid.cell_volume * (v.circulant * density);
}

Eigen::VectorXcd apply_kinetic(const Eigen::VectorXcd& psi, const VectorField& A_smeared, const ModelGrid& grid) {
  Eigen::VectorXcd out = grid.kinetic * psi;
  for (int i = 0; i < grid.dim; ++i) {
    const Eigen::VectorXcd a_psi = A_smeared.col(i).cast<Complex>().cwiseProduct(psi);
    out -= grid.momentum[i] * a_psi;
    out -= A_smeared.col(i).cast<Complex>().cwiseProduct(grid.momentum[i] * psi);
    out += A_smeared.col(i).cast<Complex>().cwiseProduct(a_psi);
  }
  return out;
}

Eigen::MatrixXcd mean_field_hamiltonian(const EffectiveState& state, const MsContext& ctx) {
  const ModelGrid& grid = *ctx.grid;
  const VectorField A = reconstruct_A(state.alpha, grid, ctx.kappa);
  Eigen::MatrixXcd h = grid.kinetic;
  for (int i = 0; i < grid.dim; ++i) {
    const Eigen::VectorXcd a = A.col(i).cast<Complex>();
    h -= grid.momentum[i] * a.asDiagonal();
    h -= a.asDiagonal() * grid.momentum[i];
    h += a.cwiseProduct(a).asDiagonal();
  }
  h += mean_field_potential(state.phi, grid, *ctx.potential).cast<Complex>().asDiagonal();
  return h;
}

MsDerivative ms_rhs(const EffectiveState& state, const MsContext& ctx) {
  const ModelGrid& grid = *ctx.grid;
  const VectorField A = reconstruct_A(state.alpha, grid, ctx.kappa);
  const Eigen::VectorXd V = mean_field_potential(state.phi, grid, *ctx.potential);
  MsDerivative d;
  d.dphi = -kI * (apply_kinetic(state.phi, A, grid) + V.cast<Complex>().cwiseProduct(state.phi));
  const VectorField j = compute_current(state.phi, A, grid);
  d.dalpha = -kI * alpha_source(j, state.alpha, *ctx.kappa, grid);
  return d;
}

double stability_bound(const ModelGrid& grid) { return 2.5 / std::max(1.0, grid.max_kinetic_eigenvalue()); }

double l2_norm(const Eigen::VectorXcd& phi, const ModelGrid& grid) {
  return std::sqrt(grid.cell_volume * phi.squaredNorm());
}

EffectiveState step(const EffectiveState& state, double dt, const MsContext& ctx) {
  const ModelGrid& grid = *ctx.grid;
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be positive");
  if (dt > stability_bound(grid)) throw StabilityError("step: dt exceeds the explicit stability bound");

  const std::size_t M = grid.n_modes();
  Eigen::VectorXd omega(M);
  for (std::size_t m = 0; m < M; ++m) omega(m) = grid.retained_modes[m].k_norm;
  const Eigen::VectorXcd E_half = (-kI * omega * (0.5 * dt)).array().exp();
  const Eigen::VectorXcd E_full = (-kI * omega * dt).array().exp();

  // Nonlinear part of the alpha equation: d/dt alpha = -i|k| alpha + i s.
  auto eval = [&](const Eigen::VectorXcd& phi, const Eigen::VectorXcd& alpha, Eigen::VectorXcd& dphi,
                  Eigen::VectorXcd& nalpha) {
    const VectorField A = reconstruct_A(alpha, grid, ctx.kappa);
    const Eigen::VectorXd V = mean_field_potential(phi, grid, *ctx.potential);
    dphi = -kI * (apply_kinetic(phi, A, grid) + V.cast<Complex>().cwiseProduct(phi));
    nalpha = kI * current_drive(compute_current(phi, A, grid), *ctx.kappa, grid);
  };

  const Eigen::VectorXcd& phi0 = state.phi;
  const Eigen::VectorXcd& a0 = state.alpha;
  Eigen::VectorXcd k1, k2, k3, k4, n1, n2, n3, n4;
  eval(phi0, a0, k1, n1);
  eval(phi0 + 0.5 * dt * k1, E_half.cwiseProduct(a0 + 0.5 * dt * n1), k2, n2);
  eval(phi0 + 0.5 * dt * k2, E_half.cwiseProduct(a0) + 0.5 * dt * n2, k3, n3);
  eval(phi0 + dt * k3, E_full.cwiseProduct(a0) + dt * E_half.cwiseProduct(n3), k4, n4);

  EffectiveState next;
  next.time = state.time + dt;
  next.phi = phi0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  next.alpha = E_full.cwiseProduct(a0) +
               (dt / 6.0) * (E_full.cwiseProduct(n1) + 2.0 * E_half.cwiseProduct(n2 + n3) + n4);

  const double before = l2_norm(phi0, grid);
  const double after = l2_norm(next.phi, grid);
  if (!std::isfinite(after) || std::abs(after - before) > 1e-3)
    throw StabilityError("step: norm of phi drifted by more than 1e-3 in one step at t = " + format_double(state.time));
  return next;
}

double ms_energy(const EffectiveState& state, const MsContext& ctx) {
  const ModelGrid& grid = *ctx.grid;
  const VectorField A = reconstruct_A(state.alpha, grid, ctx.kappa);
  const double kinetic = grid.cell_volume * state.phi.dot(apply_kinetic(state.phi, A, grid)).real();
  const Eigen::VectorXd V = mean_field_potential(state.phi, grid, *ctx.potential);
  const double interaction = 0.5 * grid.cell_volume * V.dot(state.phi.cwiseAbs2());
  double field = 0.0;
  for (std::size_t m = 0; m < grid.n_modes(); ++m) {
    const auto& mode = grid.retained_modes[m];
    field += mode.measure_weight * mode.k_norm * std::norm(state.alpha(m));
  }
  return kinetic + interaction + field;
}

ConservationLedger conservation_entry(const EffectiveState& state, const MsContext& ctx) {
  ConservationLedger row;
  row.time = state.time;
  row.energy = ms_energy(state, ctx);
  row.l2_norm = l2_norm(state.phi, *ctx.grid);
  row.divA_residual = divergence_residual(state.alpha, *ctx.grid);
  row.alpha_h_norm = weighted_alpha_norm(state.alpha, *ctx.grid, 0.0);
  row.alpha_h32_norm = weighted_alpha_norm(state.alpha, *ctx.grid, 1.5);
  return row;
}

EffectiveState integrate(EffectiveState state, double dt, std::size_t n_steps, std::size_t stride, const MsContext& ctx,
                         const std::function<void(const EffectiveState&)>& on_sample) {
  const double t0 = state.time;
  if (on_sample) on_sample(state);
  for (std::size_t n = 1; n <= n_steps; ++n) {
    state = step(state, dt, ctx);
    // Avoid accumulated rounding in the clock.
    state.time = t0 + static_cast<double>(n) * dt;
    if (on_sample && stride > 0 && n % stride == 0) on_sample(state);
  }
  return state;
}

Eigen::VectorXcd normalized(const Eigen::VectorXcd& phi, const ModelGrid& grid) {
  const double n = l2_norm(phi, grid);
  if (!(n > 0.0)) throw std::invalid_argument("normalized: zero wavefunction");
  return phi / n;
}

Eigen::VectorXcd gaussian_packet(const ModelGrid& grid, const Vec3& center, double width, const Vec3& momentum) {
  if (!(width > 0.0)) throw std::invalid_argument("gaussian_packet: width must be positive");
  Eigen::VectorXcd phi(grid.n_sites());
  for (std::size_t x = 0; x < grid.n_sites(); ++x) {
    double r2 = 0.0;
    for (int d = 0; d < grid.dim; ++d) {
      double dx = grid.site_positions[x][d] - center[d];
      dx -= grid.box_length * std::round(dx / grid.box_length);
      r2 += dx * dx;
    }
    phi(x) = std::exp(-r2 / (2.0 * width * width)) * std::exp(kI * dot(momentum, grid.site_positions[x]));
  }
  return normalized(phi, grid);
}

Eigen::VectorXcd plane_wave(const ModelGrid& grid, const Vec3& momentum) {
  Eigen::VectorXcd phi(grid.n_sites());
  for (std::size_t x = 0; x < grid.n_sites(); ++x) phi(x) = std::exp(kI * dot(momentum, grid.site_positions[x]));
  return normalized(phi, grid);
}

Eigen::VectorXcd ground_state_iterate(const Eigen::VectorXcd& guess, const ModelGrid& grid, const PairPotential& v,
                                      double tolerance, int max_iterations) {
  Eigen::VectorXcd phi = normalized(guess, grid);
  Eigen::VectorXd density = phi.cwiseAbs2();
  for (int it = 0; it < max_iterations; ++it) {
    const Eigen::VectorXd V = grid.cell_volume * (v.circulant * density);
    Eigen::MatrixXcd h = grid.kinetic;
    h += V.cast<Complex>().asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(h);
    Eigen::VectorXcd lowest = eig.eigenvectors().col(0);
    // Fix the global phase: largest component real positive.
    Eigen::Index imax = 0;
    lowest.cwiseAbs().maxCoeff(&imax);
    lowest *= std::abs(lowest(imax)) / lowest(imax);
    phi = normalized(lowest, grid);
    const Eigen::VectorXd out_density = phi.cwiseAbs2();
    const double change = (out_density - density).norm() * grid.cell_volume;
    density = 0.5 * density + 0.5 * out_density;
    if (change < tolerance) break;
  }
  return phi;
}

void write_ms_snapshot(std::ostream& out, const EffectiveState& state, const ModelGrid& grid) {
  binary::put_u64(out, static_cast<std::uint64_t>(grid.dim));
  binary::put_u64(out, static_cast<std::uint64_t>(grid.sites_per_dim));
  binary::put_u64(out, grid.n_sites());
  binary::put_u64(out, grid.n_modes());
  for (Eigen::Index i = 0; i < state.phi.size(); ++i) binary::put_complex(out, state.phi(i));
  for (Eigen::Index i = 0; i < state.alpha.size(); ++i) binary::put_complex(out, state.alpha(i));
}

EffectiveState read_ms_snapshot(std::istream& in, const ModelGrid& grid) {
  const auto dim = binary::get_u64(in);
  const auto spd = binary::get_u64(in);
  const auto sites = binary::get_u64(in);
  const auto modes = binary::get_u64(in);
  if (dim != static_cast<std::uint64_t>(grid.dim) || spd != static_cast<std::uint64_t>(grid.sites_per_dim) ||
      sites != grid.n_sites() || modes != grid.n_modes())
    throw std::runtime_error("snapshot: header does not match the grid");
  EffectiveState s;
  s.phi.resize(static_cast<Eigen::Index>(sites));
  s.alpha.resize(static_cast<Eigen::Index>(modes));
  for (Eigen::Index i = 0; i < s.phi.size(); ++i) s.phi(i) = binary::get_complex(in);
  for (Eigen::Index i = 0; i < s.alpha.size(); ++i) s.alpha(i) = binary::get_complex(in);
  return s;
}

}  // namespace mslab

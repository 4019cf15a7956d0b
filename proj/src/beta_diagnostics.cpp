#include "mslab/beta_diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace mslab {

namespace {

double max_abs_alpha(const Eigen::VectorXcd& alpha_scaled, double n_particles) {
  return std::sqrt(n_particles) * (alpha_scaled.size() ? alpha_scaled.cwiseAbs().maxCoeff() : 0.0);
}

// exp(-z a* + conj(z) a) on occupations 0..n_big, restricted to rows 0..n_out, cols 0..n_in.
Eigen::MatrixXcd displacement_block(Complex z, int n_in, int n_out, int n_big) {
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(n_big + 1, n_big + 1);
  for (int n = 1; n <= n_big; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  // generator G is anti-Hermitian; K = i G is Hermitian and exp(G) = exp(-i K)
  const Eigen::MatrixXcd G = -z * a.adjoint() + std::conj(z) * a;
  const Eigen::MatrixXcd K = kI * G;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(0.5 * (K + K.adjoint()));
  Eigen::VectorXcd phases(n_big + 1);
  for (int i = 0; i <= n_big; ++i) phases(i) = std::exp(-kI * eig.eigenvalues()(i));
  const Eigen::MatrixXcd D = eig.eigenvectors() * phases.asDiagonal() * eig.eigenvectors().adjoint();
  return D.topLeftCorner(n_out + 1, n_in + 1);
}

}  // namespace

Eigen::VectorXcd scaled_orbital(const Eigen::VectorXcd& phi, const ModelGrid& grid) {
  return std::sqrt(grid.cell_volume) * phi;
}

Eigen::VectorXcd scaled_amplitudes(const Eigen::VectorXcd& alpha, const ModelGrid& grid) {
  Eigen::VectorXcd out(alpha.size());
  for (Eigen::Index m = 0; m < alpha.size(); ++m)
    out(m) = std::sqrt(grid.retained_modes[static_cast<std::size_t>(m)].measure_weight) * alpha(m);
  return out;
}

double beta_a(const ManyBodyState& state, const PauliFierzSystem& system, const Eigen::VectorXcd& phi) {
  const Eigen::VectorXcd c = scaled_orbital(phi, system.grid());
  const Eigen::MatrixXcd gamma = reduced_density_particle(state, system);
  return std::max(0.0, 1.0 - c.dot(gamma * c).real());
}

double beta_b(const ManyBodyState& state, const PauliFierzSystem& system, const Eigen::VectorXcd& alpha) {
  const std::size_t F = system.fock_dim();
  const Eigen::VectorXcd at = scaled_amplitudes(alpha, system.grid());
  const double invSqrtN = 1.0 / std::sqrt(static_cast<double>(system.n_particles()));
  const auto X = fock_view(state.amplitudes, F);
  Eigen::MatrixXcd d(X.rows(), X.cols());
  double total = 0.0;
  for (std::size_t m = 0; m < system.grid().n_modes(); ++m) {
    d = -at(static_cast<Eigen::Index>(m)) * X;
    add_annihilation(system.fock(), m, X, d, invSqrtN);
    total += d.squaredNorm();
  }
  return total;
}

WeylBetaB beta_b_weyl(const ManyBodyState& state, const PauliFierzSystem& system, const Eigen::VectorXcd& alpha,
                      double tail_tolerance, std::size_t max_dimension, int padding) {
  const std::size_t M = system.grid().n_modes(), P = system.particle_dim(), F = system.fock_dim();
  const int n_max = system.truncation().n_max;
  const double N = system.n_particles();
  const Eigen::VectorXcd z = std::sqrt(N) * scaled_amplitudes(alpha, system.grid());
  const double zmax = max_abs_alpha(scaled_amplitudes(alpha, system.grid()), N);
  if (padding < 0) padding = 12 + static_cast<int>(std::ceil(zmax * zmax + 6.0 * zmax));
  const int n_ext = n_max + padding;
  const std::size_t levels = static_cast<std::size_t>(n_max + 1), ext = static_cast<std::size_t>(n_ext + 1);

  const double ext_dim = static_cast<double>(P * F / levels) * static_cast<double>(ext);
  if (ext_dim > static_cast<double>(max_dimension))
    throw ResourceError("beta_b_weyl: extended displacement space " + format_double(ext_dim) + " exceeds the budget");

  // The displacements of the other modes are unitary on their own factors, so
  // |a_m W^-1 Psi| only needs mode m displaced (and extended).
  WeylBetaB out;
  out.extended_cutoff = n_ext;
  const double norm_sq = state.amplitudes.squaredNorm();
  double number = 0.0;
  for (std::size_t m = 0; m < M; ++m) {
    const Eigen::MatrixXcd D = displacement_block(z(static_cast<Eigen::Index>(m)), n_max, n_ext, n_ext + 40);
    const std::size_t inner = system.fock().stride(m);
    const std::size_t outer = P * F / (levels * inner);
    double mass = 0.0;
    Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> block(ext, inner);
    for (std::size_t o = 0; o < outer; ++o) {
      Eigen::Map<const Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> in(
          state.amplitudes.data() + o * levels * inner, static_cast<Eigen::Index>(levels),
          static_cast<Eigen::Index>(inner));
      block.noalias() = D * in;
      for (std::size_t n = 0; n < ext; ++n) {
        const double w = block.row(static_cast<Eigen::Index>(n)).squaredNorm();
        number += static_cast<double>(n) * w;
        mass += w;
      }
    }
    out.tail_mass = std::max(out.tail_mass, std::abs(norm_sq - mass));
  }
  out.value = number / N;
  if (out.tail_mass > tail_tolerance)
    throw TruncationError("beta_b_weyl: displacement tail " + format_double(out.tail_mass) + " above tolerance");
  return out;
}

double beta_c(const ManyBodyState& state, const PauliFierzSystem& system, const EffectiveState& effective,
              const MsContext& ctx) {
  const double E = ms_energy(effective, ctx);
  Eigen::VectorXcd Hpsi(state.amplitudes.size());
  system.apply_hamiltonian(state.amplitudes, Hpsi);
  return (Hpsi / static_cast<double>(system.n_particles()) - E * state.amplitudes).squaredNorm();
}

double trace_distance(const Eigen::MatrixXcd& rho, const Eigen::MatrixXcd& sigma) {
  if (rho.rows() != rho.cols() || rho.rows() != sigma.rows() || sigma.rows() != sigma.cols())
    throw std::invalid_argument("trace_distance: shape mismatch");
  const Eigen::MatrixXcd diff = rho - sigma;
  const double scale = std::max({1.0, rho.norm(), sigma.norm()});
  if ((rho - rho.adjoint()).norm() > 1e-12 * scale || (sigma - sigma.adjoint()).norm() > 1e-12 * scale)
    throw std::invalid_argument("trace_distance: input is not Hermitian");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(0.5 * (diff + diff.adjoint()), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().cwiseAbs().sum();
}

BetaReport beta_report(const ManyBodyState& state, const PauliFierzSystem& system, const EffectiveState& effective,
                       const MsContext& ctx) {
  const auto& grid = system.grid();
  BetaReport r;
  r.time = state.time;
  const Eigen::VectorXcd c = scaled_orbital(effective.phi, grid);
  const Eigen::VectorXcd at = scaled_amplitudes(effective.alpha, grid);
  const Eigen::MatrixXcd gamma = reduced_density_particle(state, system);
  r.beta_a = std::max(0.0, 1.0 - c.dot(gamma * c).real());
  r.trace_dist_particle = trace_distance(gamma, c * c.adjoint());
  r.trace_dist_photon = trace_distance(reduced_density_photon(state, system), at * at.adjoint());
  r.beta_b = beta_b(state, system, effective.alpha);

  const double N = system.n_particles();
  Eigen::VectorXcd Hpsi(state.amplitudes.size());
  system.apply_hamiltonian(state.amplitudes, Hpsi);
  r.energy_effective = ms_energy(effective, ctx);
  r.energy_many_body = state.amplitudes.dot(Hpsi).real() / N;
  r.beta_c = (Hpsi / N - r.energy_effective * state.amplitudes).squaredNorm();

  r.photon_number = photon_number_moment(state, system, 1.0);
  r.photon_number_root = photon_number_moment(state, system, 0.5);
  r.source_norm =
      current_source_norm(effective.phi, reconstruct_A(effective.alpha, grid, ctx.kappa), *ctx.kappa, grid);
  r.parseval_residual = parseval_beta_b_check(state, system, effective.alpha).residual;
  return r;
}

double beta_b_integrand(const Eigen::VectorXcd& psi, const PauliFierzSystem& system, const EffectiveState& effective,
                        const MsContext& ctx) {
  const auto& grid = system.grid();
  const std::size_t F = system.fock_dim();
  const double invSqrtN = 1.0 / std::sqrt(static_cast<double>(system.n_particles()));
  const Eigen::VectorXcd at = scaled_amplitudes(effective.alpha, grid);
  const VectorField A = reconstruct_A(effective.alpha, grid, ctx.kappa);
  const Eigen::VectorXcd s = current_drive(compute_current(effective.phi, A, grid), *ctx.kappa, grid);
  const auto X = fock_view(psi, F);
  Eigen::VectorXcd d(psi.size());
  double total = 0.0;
  for (std::size_t m = 0; m < grid.n_modes(); ++m) {
    const auto mi = static_cast<Eigen::Index>(m);
    d = -at(mi) * psi;
    add_annihilation(system.fock(), m, X, fock_view(d, F), invSqrtN);
    const Eigen::VectorXcd f =
        invSqrtN * system.field_force(m, psi) + std::sqrt(grid.retained_modes[m].measure_weight) * s(mi) * psi;
    total += 2.0 * d.dot(f).imag();
  }
  return total;
}

double beta_a_integrand(const Eigen::VectorXcd& psi, const PauliFierzSystem& system, const EffectiveState& effective,
                        const MsContext& ctx) {
  const auto& grid = system.grid();
  const std::size_t S = grid.n_sites(), F = system.fock_dim();
  const int dim = grid.dim;
  const double N = system.n_particles();
  const double invN = 1.0 / N, invSqrtN = 1.0 / std::sqrt(N);
  const Eigen::VectorXcd c = scaled_orbital(effective.phi, grid);
  const VectorField A = reconstruct_A(effective.alpha, grid, ctx.kappa);
  const Eigen::VectorXd V = mean_field_potential(effective.phi, grid, *ctx.potential);

  std::vector<Eigen::VectorXcd> zeta(S);
  for (std::size_t x = 0; x < S; ++x) zeta[x] = system.annihilate_particle(x, psi);
  Eigen::VectorXcd xi = Eigen::VectorXcd::Zero(zeta[0].size());
  for (std::size_t x = 0; x < S; ++x) xi += std::conj(c(x)) * zeta[x];
  for (std::size_t x = 0; x < S; ++x) zeta[x] -= c(x) * xi;  // q applied on the site index

  // A''_i(y) zeta_y = (N^-1/2 A_i(y) - A_cl,i(y)) zeta_y
  auto field_shift = [&](int i, std::size_t y, const Eigen::VectorXcd& v) {
    Eigen::VectorXcd out = -A(y, i) * v;
    system.add_field(i, y, fock_view(v, F), fock_view(out, F), invSqrtN);
    return out;
  };

  Eigen::VectorXcd eta = Eigen::VectorXcd::Zero(xi.size());
  for (int i = 0; i < dim; ++i) {
    std::vector<Eigen::VectorXcd> shifted(S);
    for (std::size_t y = 0; y < S; ++y) shifted[y] = field_shift(i, y, zeta[y]);
    const auto& Pm = grid.momentum[i];
    for (std::size_t x = 0; x < S; ++x) {
      Eigen::VectorXcd Pzeta = Eigen::VectorXcd::Zero(xi.size());
      Eigen::VectorXcd Pshift = Eigen::VectorXcd::Zero(xi.size());
      for (std::size_t y = 0; y < S; ++y) {
        if (Pm(x, y) == Complex(0.0)) continue;
        Pzeta += Pm(x, y) * zeta[y];
        Pshift += Pm(x, y) * shifted[y];
      }
      eta -= std::conj(c(x)) * (field_shift(i, x, Pzeta) + Pshift);
    }
  }

  const auto& reduced = system.reduced_particles();
  for (std::size_t x = 0; x < S; ++x) {
    // (N^-1 A(x)^2 - A_cl(x)^2 - V(x)) zeta_x
    Eigen::VectorXcd local = -(A.row(x).squaredNorm() + V(x)) * zeta[x];
    Eigen::VectorXcd u(zeta[x].size());
    for (int i = 0; i < dim; ++i) {
      u.setZero();
      system.add_field(i, x, fock_view(zeta[x], F), fock_view(u, F));
      system.add_field(i, x, fock_view(u, F), fock_view(local, F), invN);
    }
    // N^-1 sum_y v(x - y) n_y on the remaining N - 1 particles
    if (!ctx.potential->is_zero()) {
      auto L = fock_view(local, F);
      const auto Z = fock_view(zeta[x], F);
      for (std::size_t q = 0; q < reduced.size(); ++q) {
        double w = 0.0;
        for (std::size_t y = 0; y < S; ++y) w += ctx.potential->circulant(x, y) * reduced.occupation(q, y);
        if (w != 0.0) L.col(static_cast<Eigen::Index>(q)) += invN * w * Z.col(static_cast<Eigen::Index>(q));
      }
    }
    eta += std::conj(c(x)) * local;
  }
  return -2.0 * invN * xi.dot(eta).imag();
}

namespace {

DerivativeReport derivative_check(const std::vector<TrajectorySample>& samples,
                                  const std::function<double(const TrajectorySample&)>& beta,
                                  const std::function<double(const TrajectorySample&)>& integrand) {
  const std::size_t n = samples.size();
  if (n < 5) throw std::invalid_argument("derivative check: need at least five samples");
  const double h = samples[1].time - samples[0].time;
  if (!(h > 0)) throw std::invalid_argument("derivative check: samples must be increasing in time");
  for (std::size_t k = 1; k < n; ++k)
    if (std::abs(samples[k].time - samples[k - 1].time - h) > 1e-9 * h)
      throw std::invalid_argument("derivative check: samples must be equally spaced");
  std::vector<double> b(n);
  for (std::size_t k = 0; k < n; ++k) b[k] = beta(samples[k]);

  DerivativeReport r;
  r.spacing = h;
  double max_integrand = 0.0;
  for (std::size_t k = 1; k + 1 < n; ++k) {
    r.times.push_back(samples[k].time);
    const double cd = (b[k + 1] - b[k - 1]) / (2 * h);
    const double in = integrand(samples[k]);
    r.central_difference.push_back(cd);
    r.integrand.push_back(in);
    r.max_residual = std::max(r.max_residual, std::abs(cd - in));
    max_integrand = std::max(max_integrand, std::abs(in));
  }
  for (std::size_t k = 0; k + 3 < n; ++k)
    r.max_third_derivative =
        std::max(r.max_third_derivative, std::abs(b[k + 3] - 3 * b[k + 2] + 3 * b[k + 1] - b[k]) / (h * h * h));
  r.differencing_bound = h * h / 6.0 * r.max_third_derivative;
  r.max_relative_residual = max_integrand > 0 ? r.max_residual / max_integrand : r.max_residual;
  return r;
}

}  // namespace

DerivativeReport beta_b_derivative_check(const std::vector<TrajectorySample>& samples, const PauliFierzSystem& system,
                                         const MsContext& ctx) {
  ManyBodyState st;
  st.n_particles = system.n_particles();
  st.particle_dim = system.particle_dim();
  st.fock_dim = system.fock_dim();
  return derivative_check(
      samples,
      [&](const TrajectorySample& s) {
        st.amplitudes = s.psi;
        return beta_b(st, system, s.effective.alpha);
      },
      [&](const TrajectorySample& s) { return beta_b_integrand(s.psi, system, s.effective, ctx); });
}

DerivativeReport beta_a_derivative_check(const std::vector<TrajectorySample>& samples, const PauliFierzSystem& system,
                                         const MsContext& ctx) {
  ManyBodyState st;
  st.n_particles = system.n_particles();
  st.particle_dim = system.particle_dim();
  st.fock_dim = system.fock_dim();
  return derivative_check(
      samples,
      [&](const TrajectorySample& s) {
        st.amplitudes = s.psi;
        // unclamped, so differences stay smooth near zero
        const Eigen::VectorXcd c = scaled_orbital(s.effective.phi, system.grid());
        return 1.0 - c.dot(reduced_density_particle(st, system) * c).real();
      },
      [&](const TrajectorySample& s) { return beta_a_integrand(s.psi, system, s.effective, ctx); });
}

ParsevalCheck parseval_beta_b_check(const ManyBodyState& state, const PauliFierzSystem& system,
                                    const Eigen::VectorXcd& alpha) {
  const auto& grid = system.grid();
  const std::size_t M = grid.n_modes(), F = system.fock_dim();
  const double invSqrtN = 1.0 / std::sqrt(static_cast<double>(system.n_particles()));
  const Eigen::VectorXcd at = scaled_amplitudes(alpha, grid);
  const auto X = fock_view(state.amplitudes, F);
  // columns: d_m Psi
  Eigen::MatrixXcd D(state.amplitudes.size(), static_cast<Eigen::Index>(M));
  for (std::size_t m = 0; m < M; ++m) {
    Eigen::VectorXcd d = -at(static_cast<Eigen::Index>(m)) * state.amplitudes;
    add_annihilation(system.fock(), m, X, fock_view(d, F), invSqrtN);
    D.col(static_cast<Eigen::Index>(m)) = d;
  }
  ParsevalCheck out;
  Eigen::VectorXcd coef(static_cast<Eigen::Index>(M));
  for (std::size_t y = 0; y < grid.n_sites(); ++y)
    for (int i = 0; i < grid.dim; ++i) {
      for (std::size_t m = 0; m < M; ++m) {
        const auto& mode = grid.retained_modes[m];
        coef(static_cast<Eigen::Index>(m)) =
            kI / std::sqrt(2.0) * std::sqrt(mode.measure_weight) * mode.epsilon[i] * grid.phases(y, m);
      }
      out.lhs += grid.cell_volume * (D * coef).squaredNorm();
    }
  out.rhs = 0.5 * std::pow(2 * kPi, grid.dim) * beta_b(state, system, alpha);
  out.residual = std::abs(out.lhs - out.rhs) / (out.rhs + 1e-300);
  return out;
}

double auxiliary_field_residual(const Eigen::VectorXcd& psi, const PauliFierzSystem& system) {
  const auto& grid = system.grid();
  const auto& kappa = system.kappa();
  const std::size_t S = grid.n_sites(), M = grid.n_modes(), F = system.fock_dim();
  const double d = grid.dim;

  // eta(x - y) on the lattice from the distinct retained wave vectors
  Eigen::MatrixXcd eta = Eigen::MatrixXcd::Zero(S, S);
  for (std::size_t m = 0; m < M; ++m) {
    const auto& mode = grid.retained_modes[m];
    if (mode.lambda != 1) continue;
    const double F_eta = std::pow(2 * kPi, -0.5 * d) * std::pow(mode.k_norm, -0.5) * kappa.value(m);
    for (std::size_t x = 0; x < S; ++x)
      for (std::size_t y = 0; y < S; ++y) {
        Vec3 z;
        for (int i = 0; i < 3; ++i) z[i] = grid.site_positions[x][i] - grid.site_positions[y][i];
        eta(x, y) += std::pow(2 * kPi, -0.5 * d) * mode.measure_weight * F_eta * std::exp(kI * dot(mode.k, z));
      }
  }

  const auto X = fock_view(psi, F);
  double worst = 0.0;
  Eigen::VectorXcd lhs(psi.size()), rhs(psi.size());
  for (std::size_t x = 0; x < S; ++x)
    for (int i = 0; i < grid.dim; ++i) {
      lhs.setZero();
      system.add_field(i, x, X, fock_view(lhs, F));
      rhs.setZero();
      for (std::size_t m = 0; m < M; ++m) {
        const auto& mode = grid.retained_modes[m];
        Complex plus = 0.0, minus = 0.0;  // sum_y h^d eta(x - y) e^{+-iky}
        for (std::size_t y = 0; y < S; ++y) {
          plus += grid.cell_volume * eta(x, y) * grid.phases(y, m);
          minus += grid.cell_volume * eta(x, y) * std::conj(grid.phases(y, m));
        }
        const double amp = std::sqrt(mode.measure_weight) * mode.epsilon[i] / std::sqrt(2.0);
        // -i eta * F+ contributes (-i)(i) amp plus a_m, +i eta * F- contributes (i)(-i) amp minus a_m*
        add_annihilation(system.fock(), m, X, fock_view(rhs, F), amp * plus);
        add_creation(system.fock(), m, X, fock_view(rhs, F), amp * minus);
      }
      worst = std::max(worst, (lhs - rhs).norm() / psi.norm());
    }
  return worst;
}

double current_source_norm(const Eigen::VectorXcd& phi, const VectorField& A_smeared,
                           const ChargeDistribution& kappa, const ModelGrid& grid) {
  const Eigen::MatrixXcd Fj = fourier_current(compute_current(phi, A_smeared, grid), grid);
  double sum = 0.0;
  for (std::size_t m = 0; m < grid.n_modes(); ++m) {
    const auto& mode = grid.retained_modes[m];
    Complex proj = 0.0;
    for (int i = 0; i < grid.dim; ++i) proj += mode.epsilon[i] * Fj(static_cast<Eigen::Index>(m), i);
    sum += mode.measure_weight / mode.k_norm * kappa.value(m) * kappa.value(m) * std::norm(proj);
  }
  return std::sqrt(sum);
}

GronwallFit gronwall_envelope_check(const std::vector<double>& times, const std::vector<double>& beta,
                                    double n_particles) {
  if (times.size() != beta.size() || times.size() < 2)
    throw std::invalid_argument("gronwall_envelope_check: need matching series of length >= 2");
  const double floor = 1.0 / n_particles;
  const double y0 = std::log(beta[0] + floor);
  GronwallFit fit;
  for (std::size_t k = 1; k < times.size(); ++k) {
    const double dt = times[k] - times[0];
    if (dt <= 0) continue;
    fit.rate = std::max(fit.rate, (std::log(beta[k] + floor) - y0) / dt);
  }
  fit.dominated = std::isfinite(fit.rate);
  for (std::size_t k = 0; k < times.size(); ++k)
    if (beta[k] + floor > (beta[0] + floor) * std::exp(fit.rate * (times[k] - times[0])) * (1 + 1e-12))
      fit.dominated = false;

  const double n = static_cast<double>(times.size());
  double st = 0, sy = 0, stt = 0, sty = 0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double y = std::log(beta[k] + floor);
    st += times[k];
    sy += y;
    stt += times[k] * times[k];
    sty += times[k] * y;
  }
  const double denom = n * stt - st * st;
  if (denom > 0) {
    fit.slope = (n * sty - st * sy) / denom;
    const double intercept = (sy - fit.slope * st) / n;
    double sse = 0;
    for (std::size_t k = 0; k < times.size(); ++k) {
      const double r = std::log(beta[k] + floor) - intercept - fit.slope * times[k];
      sse += r * r;
    }
    if (n > 2) fit.slope_uncertainty = std::sqrt(sse / (n - 2) * n / denom);
  }
  return fit;
}

SqrtEnvelopeFit sqrt_envelope_fit(const std::vector<double>& times, const std::vector<double>& growth) {
  if (times.size() != growth.size() || times.empty())
    throw std::invalid_argument("sqrt_envelope_fit: need matching non-empty series");
  double num = 0, den = 0, t_max = 0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    num += growth[k] * std::sqrt(times[k]);
    den += times[k];
    t_max = std::max(t_max, times[k]);
  }
  SqrtEnvelopeFit fit;
  fit.coefficient = den > 0 ? num / den : 0.0;
  double sse = 0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double r = growth[k] - fit.coefficient * std::sqrt(times[k]);
    sse += r * r;
  }
  fit.rms_residual = std::sqrt(sse / static_cast<double>(times.size()));
  fit.amplitude = fit.coefficient * std::sqrt(t_max);
  fit.accepted = fit.coefficient >= 0 && (fit.rms_residual < 0.1 * fit.amplitude || fit.rms_residual == 0.0);
  return fit;
}

}  // namespace mslab

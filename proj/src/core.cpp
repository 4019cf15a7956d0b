#include "mslab/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <tuple>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace mslab {

namespace {

// Lattice momentum integer for fft position n of L points: 0..L/2-1, -L/2..-1.
int fft_integer(int n, int L) { return n < (L + 1) / 2 ? n : n - L; }

bool is_nyquist(int integer, int L) { return L % 2 == 0 && integer == -L / 2; }

}  // namespace

std::size_t ModelGrid::displacement_index(std::size_t x, std::size_t y) const {
  const int L = sites_per_dim;
  std::size_t index = 0;
  for (int d = 0; d < dim; ++d) {
    int diff = ((site_index[x][d] - site_index[y][d]) % L + L) % L;
    index = index * static_cast<std::size_t>(L) + static_cast<std::size_t>(diff);
  }
  return index;
}

double ModelGrid::max_kinetic_eigenvalue() const {
  double best = 0.0;
  for (const auto& p : lattice_momenta) best = std::max(best, dot(p, p));
  return best;
}

std::pair<Vec3, Vec3> polarization_basis(const Vec3& k) {
  const double kn = norm(k);
  if (kn == 0.0) throw std::invalid_argument("polarization_basis: k = 0 has no transverse plane");
  if (k[0] == 0.0 && k[1] == 0.0) return {Vec3{1.0, 0.0, 0.0}, Vec3{0.0, 1.0, 0.0}};
  Vec3 e1 = cross(k, Vec3{0.0, 0.0, 1.0});
  const double n1 = norm(e1);
  for (double& c : e1) c /= n1;
  const Vec3 khat{k[0] / kn, k[1] / kn, k[2] / kn};
  Vec3 e2 = cross(khat, e1);
  const double n2 = norm(e2);
  for (double& c : e2) c /= n2;
  return {e1, e2};
}

ModelGrid build_grid(const DiscretizationConfig& config) {
  if (config.dim != 1 && config.dim != 3) throw std::invalid_argument("build_grid: dim must be 1 or 3");
  if (config.sites_per_dim < 2) throw std::invalid_argument("build_grid: sites_per_dim must be >= 2");
  if (!(config.box_length > 0.0)) throw std::invalid_argument("build_grid: box_length must be positive");

  ModelGrid grid;
  grid.dim = config.dim;
  grid.sites_per_dim = config.sites_per_dim;
  grid.box_length = config.box_length;
  grid.k_max = config.k_max;
  grid.spacing = config.box_length / config.sites_per_dim;
  grid.cell_volume = std::pow(grid.spacing, grid.dim);
  grid.dual_lattice_spacing = 2.0 * kPi / config.box_length;

  const int L = config.sites_per_dim;
  const int D = config.dim;
  const std::size_t S = static_cast<std::size_t>(std::pow(L, D));

  // Sites in row-major multi-index order.
  for (std::size_t s = 0; s < S; ++s) {
    std::array<int, 3> idx{0, 0, 0};
    std::size_t rest = s;
    for (int d = D - 1; d >= 0; --d) {
      idx[d] = static_cast<int>(rest % L);
      rest /= L;
    }
    Vec3 x{0.0, 0.0, 0.0};
    for (int d = 0; d < D; ++d) x[d] = grid.spacing * idx[d];
    grid.site_index.push_back(idx);
    grid.site_positions.push_back(x);
  }

  // Retained modes: nonzero dual-lattice k with |k| <= k_max, lexicographic in (k, lambda).
  const double dk = grid.dual_lattice_spacing;
  const int n_range = static_cast<int>(std::floor(config.k_max / dk + 1e-9));
  if (n_range < 1) throw std::invalid_argument("build_grid: k_max below the smallest nonzero dual-lattice momentum");
  const double k_max_sq = config.k_max * config.k_max * (1.0 + 1e-12);
  std::vector<std::array<int, 3>> ks;
  const int ny = D == 3 ? n_range : 0;
  for (int a = -n_range; a <= n_range; ++a)
    for (int b = -ny; b <= ny; ++b)
      for (int c = -ny; c <= ny; ++c) {
        if (a == 0 && b == 0 && c == 0) continue;
        const double ksq = dk * dk * static_cast<double>(a * a + b * b + c * c);
        if (ksq <= k_max_sq) ks.push_back({a, b, c});
      }
  if (ks.empty()) throw std::invalid_argument("build_grid: empty mode set");

  const double weight = std::pow(dk, D);
  for (const auto& n : ks) {
    const Vec3 k{dk * n[0], dk * n[1], dk * n[2]};
    if (D == 1) {
      ModeSlot slot;
      slot.k_index = n;
      slot.k = k;
      slot.k_norm = std::abs(k[0]);
      slot.lambda = 1;
      slot.epsilon = {1.0, 0.0, 0.0};
      slot.measure_weight = weight;
      grid.retained_modes.push_back(slot);
    } else {
      const auto [e1, e2] = polarization_basis(k);
      for (int lambda = 1; lambda <= 2; ++lambda) {
        ModeSlot slot;
        slot.k_index = n;
        slot.k = k;
        slot.k_norm = norm(k);
        slot.lambda = lambda;
        slot.epsilon = lambda == 1 ? e1 : e2;
        slot.measure_weight = weight;
        grid.retained_modes.push_back(slot);
      }
    }
  }

  // Spectral operators. U(n, x) = exp(-i p_n . x) / sqrt(S) is unitary.
  grid.lattice_momenta.resize(S);
  std::vector<std::array<bool, 3>> nyquist(S, {false, false, false});
  for (std::size_t n = 0; n < S; ++n) {
    Vec3 p{0.0, 0.0, 0.0};
    for (int d = 0; d < D; ++d) {
      const int integer = fft_integer(grid.site_index[n][d], L);
      p[d] = dk * integer;
      nyquist[n][d] = is_nyquist(integer, L);
    }
    grid.lattice_momenta[n] = p;
  }
  Eigen::MatrixXcd U(S, S);
  for (std::size_t n = 0; n < S; ++n)
    for (std::size_t x = 0; x < S; ++x)
      U(n, x) = std::exp(-kI * dot(grid.lattice_momenta[n], grid.site_positions[x])) / std::sqrt(double(S));
  Eigen::VectorXd lap(S);
  for (std::size_t n = 0; n < S; ++n) lap(n) = dot(grid.lattice_momenta[n], grid.lattice_momenta[n]);
  grid.kinetic = U.adjoint() * lap.asDiagonal() * U;
  for (int d = 0; d < 3; ++d) {
    if (d >= D) {
      grid.momentum[d] = Eigen::MatrixXcd::Zero(S, S);
      continue;
    }
    Eigen::VectorXd pd(S);
    for (std::size_t n = 0; n < S; ++n) pd(n) = nyquist[n][d] ? 0.0 : grid.lattice_momenta[n][d];
    grid.momentum[d] = U.adjoint() * pd.asDiagonal() * U;
  }
  // Symmetrize away rounding so Hermiticity is exact.
  grid.kinetic = 0.5 * (grid.kinetic + grid.kinetic.adjoint()).eval();
  for (auto& P : grid.momentum) P = 0.5 * (P + P.adjoint()).eval();

  grid.phases.resize(S, grid.n_modes());
  for (std::size_t x = 0; x < S; ++x)
    for (std::size_t m = 0; m < grid.n_modes(); ++m)
      grid.phases(x, m) = std::exp(kI * dot(grid.retained_modes[m].k, grid.site_positions[x]));
  return grid;
}

double dawson(double y) {
  if (y == 0.0) return 0.0;
  const double sign = y < 0 ? -1.0 : 1.0;
  const double a = std::abs(y);
  // Integrand exp(t^2 - a^2) lies in (0, 1]: no cancellation.
  auto f = [a](double t) { return std::exp((t - a) * (t + a)); };
  const int panels = std::max(1, static_cast<int>(std::ceil(2.0 * a)));
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double lo = a * p / panels;
    const double hi = a * (p + 1) / panels;
    total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, lo, hi, 0, 0);
  }
  return sign * total;
}

ChargeDistribution charge_preset(ChargeKind kind, const ChargeParams& params, const ModelGrid& grid) {
  ChargeDistribution out;
  out.kind = kind;
  const std::size_t M = grid.n_modes();
  out.fourier_values.assign(M, 0.0);
  const double norm_factor = std::pow(2.0 * kPi, -0.5 * grid.dim);

  switch (kind) {
    case ChargeKind::none:
      out.total_charge = 0.0;
      break;
    case ChargeKind::gaussian:
      if (!(params.sigma > 0.0)) throw std::invalid_argument("charge_preset: gaussian sigma must be > 0");
      out.total_charge = params.charge;
      for (std::size_t m = 0; m < M; ++m) {
        const double k2 = grid.retained_modes[m].k_norm * grid.retained_modes[m].k_norm;
        out.fourier_values[m] = params.charge * norm_factor * std::exp(-0.5 * params.sigma * params.sigma * k2);
      }
      break;
    case ChargeKind::sharp_cutoff:
      if (!(params.cutoff > 0.0)) throw std::invalid_argument("charge_preset: sharp_cutoff Lambda must be > 0");
      out.total_charge = params.charge;
      for (std::size_t m = 0; m < M; ++m)
        out.fourier_values[m] = grid.retained_modes[m].k_norm <= params.cutoff ? params.charge * norm_factor : 0.0;
      break;
    case ChargeKind::dipole: {
      // kappa = sign(x_1) exp(-x^2/2) / (2 pi)^{3/2} has the odd, purely
      // imaginary transform -i f(k). The retained-mode relabelling a -> i a
      // maps the coupling onto the real form factor f(k) stored here.
      out.total_charge = 0.0;
      for (std::size_t m = 0; m < M; ++m) {
        const Vec3& k = grid.retained_modes[m].k;
        if (grid.dim == 3) {
          const double transverse = std::exp(-0.5 * (k[1] * k[1] + k[2] * k[2]));
          out.fourier_values[m] = 2.0 * std::sqrt(2.0) * std::pow(2.0 * kPi, -2.0) * transverse * dawson(k[0] / std::sqrt(2.0));
        } else {
          // 1D analogue: kappa = sign(x) exp(-x^2/2) / sqrt(2 pi).
          out.fourier_values[m] = 2.0 * std::sqrt(2.0) / (2.0 * kPi) * dawson(k[0] / std::sqrt(2.0));
        }
      }
      break;
    }
    case ChargeKind::custom:
      if (params.custom_values.size() != M)
        throw std::invalid_argument("charge_preset: custom values must match the number of retained modes");
      out.fourier_values = params.custom_values;
      out.total_charge = params.charge;
      break;
  }

  for (std::size_t m = 0; m < M; ++m) {
    const double k = grid.retained_modes[m].k_norm;
    const double w = grid.retained_modes[m].measure_weight;
    const double F = out.fourier_values[m];
    out.admissibility_norm_sq += w * (1.0 / (k * k) + k) * F * F;
    const double c = 1.0 / std::sqrt(k) + 1.0 / k;
    out.coupling_norm_sq += w * c * c * F * F;
  }
  return out;
}

std::string to_string(ChargeKind kind) {
  switch (kind) {
    case ChargeKind::none: return "none";
    case ChargeKind::gaussian: return "gaussian";
    case ChargeKind::sharp_cutoff: return "sharp_cutoff";
    case ChargeKind::dipole: return "dipole";
    case ChargeKind::custom: return "custom";
  }
  return "?";
}

ChargeKind charge_kind_from_string(const std::string& name) {
  for (auto k : {ChargeKind::none, ChargeKind::gaussian, ChargeKind::sharp_cutoff, ChargeKind::dipole, ChargeKind::custom})
    if (to_string(k) == name) return k;
  throw std::invalid_argument("unknown charge kind '" + name + "'");
}

bool PairPotential::is_zero() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; });
}

PairPotential potential_preset(PotentialKind kind, const PotentialParams& params, const ModelGrid& grid) {
  PairPotential out;
  out.kind = kind;
  const std::size_t S = grid.n_sites();
  out.values.assign(S, 0.0);
  const int L = grid.sites_per_dim;

  // Minimum-image distance of displacement label s.
  auto distance = [&](std::size_t s) {
    double r2 = 0.0;
    for (int d = 0; d < grid.dim; ++d) {
      int n = grid.site_index[s][d];
      if (n > L / 2) n -= L;
      const double dx = grid.spacing * n;
      r2 += dx * dx;
    }
    return std::sqrt(r2);
  };

  switch (kind) {
    case PotentialKind::zero:
      break;
    case PotentialKind::softened_coulomb:
      if (!(params.softening > 0.0)) throw std::invalid_argument("potential_preset: softening must be > 0");
      for (std::size_t s = 0; s < S; ++s) {
        const double r = distance(s);
        out.values[s] = params.charge * params.charge / std::sqrt(r * r + params.softening * params.softening);
      }
      break;
    case PotentialKind::gaussian_well:
      if (!(params.width > 0.0)) throw std::invalid_argument("potential_preset: width must be > 0");
      if (params.strength < 0.0) throw std::invalid_argument("potential_preset: strength must be non-negative");
      for (std::size_t s = 0; s < S; ++s) {
        const double r = distance(s);
        out.values[s] = params.strength * std::exp(-r * r / (2.0 * params.width * params.width));
      }
      break;
    case PotentialKind::custom:
      if (params.custom_values.size() != S)
        throw std::invalid_argument("potential_preset: custom values must have one entry per lattice displacement");
      out.values = params.custom_values;
      break;
  }

  for (std::size_t s = 0; s < S; ++s) {
    if (out.values[s] < 0.0) throw std::invalid_argument("potential_preset: pair potential must be non-negative");
    // Evenness: v(-x) = v(x).
    std::array<int, 3> neg{0, 0, 0};
    std::size_t neg_index = 0;
    for (int d = 0; d < grid.dim; ++d) {
      neg[d] = (L - grid.site_index[s][d]) % L;
      neg_index = neg_index * L + neg[d];
    }
    if (out.values[s] != out.values[neg_index]) throw std::invalid_argument("potential_preset: pair potential must be even");
  }

  out.circulant.resize(S, S);
  for (std::size_t x = 0; x < S; ++x)
    for (std::size_t y = 0; y < S; ++y) out.circulant(x, y) = out.values[grid.displacement_index(x, y)];
  return out;
}

std::string to_string(PotentialKind kind) {
  switch (kind) {
    case PotentialKind::zero: return "zero";
    case PotentialKind::softened_coulomb: return "softened_coulomb";
    case PotentialKind::gaussian_well: return "gaussian_well";
    case PotentialKind::custom: return "custom";
  }
  return "?";
}

PotentialKind potential_kind_from_string(const std::string& name) {
  for (auto k : {PotentialKind::zero, PotentialKind::softened_coulomb, PotentialKind::gaussian_well, PotentialKind::custom})
    if (to_string(k) == name) return k;
  throw std::invalid_argument("unknown potential kind '" + name + "'");
}

CouplingTable build_coupling_table(const ModelGrid& grid, const ChargeDistribution& kappa) {
  CouplingTable table;
  table.dim = grid.dim;
  const std::size_t S = grid.n_sites();
  const std::size_t M = grid.n_modes();
  for (int i = 0; i < 3; ++i) table.g[i] = Eigen::MatrixXcd::Zero(S, M);
  for (std::size_t m = 0; m < M; ++m) {
    const auto& mode = grid.retained_modes[m];
    const double amp = kappa.fourier_values[m] / std::sqrt(2.0 * mode.k_norm);
    for (std::size_t x = 0; x < S; ++x) {
      const Complex phase = std::conj(grid.phases(x, m));
      for (int i = 0; i < grid.dim; ++i) table.g[i](x, m) = amp * mode.epsilon[i] * phase;
    }
  }
  return table;
}

double weighted_alpha_norm(const Eigen::VectorXcd& alpha, const ModelGrid& grid, double m) {
  if (static_cast<std::size_t>(alpha.size()) != grid.n_modes())
    throw std::invalid_argument("weighted_alpha_norm: alpha must be defined on every retained mode");
  double total = 0.0;
  for (std::size_t i = 0; i < grid.n_modes(); ++i) {
    const auto& mode = grid.retained_modes[i];
    total += mode.measure_weight * std::pow(1.0 + mode.k_norm * mode.k_norm, m) * std::norm(alpha(i));
  }
  return std::sqrt(total);
}

std::string format_double(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

void write_mode_table_csv(std::ostream& out, const ModelGrid& grid, const ChargeDistribution& kappa) {
  out << "kx,ky,kz,lambda,eps_x,eps_y,eps_z,Fkappa,weight\n";
  for (std::size_t m = 0; m < grid.n_modes(); ++m) {
    const auto& s = grid.retained_modes[m];
    out << format_double(s.k[0]) << ',' << format_double(s.k[1]) << ',' << format_double(s.k[2]) << ',' << s.lambda << ','
        << format_double(s.epsilon[0]) << ',' << format_double(s.epsilon[1]) << ',' << format_double(s.epsilon[2]) << ','
        << format_double(kappa.fourier_values[m]) << ',' << format_double(s.measure_weight) << '\n';
  }
}

}  // namespace mslab

#include "mslab/pauli_fierz.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "mslab/binary_io.hpp"

namespace mslab {

namespace {

// Y += c X Qt, one column update per stored entry of Qt.
void add_times_sparse(const Eigen::Ref<const Eigen::MatrixXcd>& X, const SparseMatrixC& Qt,
                      Eigen::Ref<Eigen::MatrixXcd> Y, Complex c) {
  const Eigen::Index F = X.rows();
  for (Eigen::Index k = 0; k < Qt.outerSize(); ++k)
    for (SparseMatrixC::InnerIterator it(Qt, k); it; ++it) {
      // plain loop: the column-expression version does not vectorize through Ref
      const Complex s = c * it.value();
      const double sr = s.real(), si = s.imag();
      const double* x = reinterpret_cast<const double*>(X.data() + it.row() * X.outerStride());
      double* y = reinterpret_cast<double*>(Y.data() + it.col() * Y.outerStride());
      for (Eigen::Index f = 0; f < F; ++f) {
        const double xr = x[2 * f], xi = x[2 * f + 1];
        y[2 * f] += sr * xr - si * xi;
        y[2 * f + 1] += sr * xi + si * xr;
      }
    }
}

constexpr std::size_t kDimensionLimit = std::size_t{1} << 62;

void enumerate(int remaining, std::size_t site, std::size_t n_sites, std::vector<int>& current, std::vector<int>& out) {
  if (site + 1 == n_sites) {
    current[site] = remaining;
    out.insert(out.end(), current.begin(), current.end());
    return;
  }
  for (int n = remaining; n >= 0; --n) {
    current[site] = n;
    enumerate(remaining - n, site + 1, n_sites, current, out);
  }
}

}  // namespace

std::size_t FockTruncation::dimension() const {
  double d = std::pow(static_cast<double>(n_max + 1), static_cast<double>(n_modes));
  if (d >= static_cast<double>(kDimensionLimit)) return 0;
  std::size_t result = 1;
  for (std::size_t m = 0; m < n_modes; ++m) result *= static_cast<std::size_t>(n_max + 1);
  return result;
}

std::size_t ParticleBasis::count(int n_particles, std::size_t n_sites) {
  // C(N + S - 1, N) built up multiplicatively, exact at every step
  long double c = 1;
  for (int i = 1; i <= n_particles; ++i) {
    c = c * static_cast<long double>(n_sites - 1 + static_cast<std::size_t>(i)) / i;
    if (c >= static_cast<long double>(kDimensionLimit)) return 0;
  }
  return static_cast<std::size_t>(std::llround(static_cast<double>(c)));
}

ParticleBasis::ParticleBasis(int n_particles, std::size_t n_sites) : n_particles_(n_particles), n_sites_(n_sites) {
  if (n_particles < 0 || n_sites == 0) throw std::invalid_argument("particle basis: need N >= 0 and at least one site");
  std::vector<int> current(n_sites, 0);
  enumerate(n_particles, 0, n_sites, current, occupations_);
  size_ = occupations_.size() / n_sites;
  for (std::size_t i = 0; i < size_; ++i) {
    auto occ = occupations(i);
    lookup_.emplace(std::vector<int>(occ.begin(), occ.end()), i);
  }
}

std::size_t ParticleBasis::index_of(std::span<const int> occ) const {
  auto it = lookup_.find(std::vector<int>(occ.begin(), occ.end()));
  if (it == lookup_.end()) throw std::out_of_range("particle basis: configuration not in sector");
  return it->second;
}

FockBasis::FockBasis(const FockTruncation& truncation) : truncation_(truncation) {
  if (truncation.n_max < 1) throw std::invalid_argument("fock truncation: n_max must be >= 1");
  size_ = truncation.dimension();
  if (size_ == 0) throw ResourceError("fock truncation: dimension overflows");
  strides_.assign(truncation.n_modes, 1);
  for (std::size_t m = truncation.n_modes; m-- > 1;) strides_[m - 1] = strides_[m] * (truncation.n_max + 1);
  total_.resize(static_cast<Eigen::Index>(size_));
  for (std::size_t f = 0; f < size_; ++f) {
    int n = 0;
    for (std::size_t m = 0; m < truncation.n_modes; ++m) n += occupation(f, m);
    total_(static_cast<Eigen::Index>(f)) = n;
  }
}

namespace {

// Y += c * sqrt(weight(n)) X shifted by one occupation of `mode`. The index is
// f = (outer * (n_max + 1) + n) * stride + inner, so each (outer, n) pair is a
// contiguous run of `stride` entries.
void ladder(const FockBasis& fock, std::size_t mode, const Eigen::Ref<const Eigen::MatrixXcd>& X,
            Eigen::Ref<Eigen::MatrixXcd> Y, Complex c, bool raise) {
  const std::size_t s = fock.stride(mode), levels = static_cast<std::size_t>(fock.n_max()) + 1;
  const std::size_t outer = fock.size() / (s * levels);
  for (Eigen::Index p = 0; p < X.cols(); ++p) {
    const double* in = reinterpret_cast<const double*>(X.col(p).data());
    double* out = reinterpret_cast<double*>(Y.col(p).data());
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t n = raise ? 0 : 1; n < (raise ? levels - 1 : levels); ++n) {
        const Complex k = c * std::sqrt(static_cast<double>(raise ? n + 1 : n));
        const double kr = k.real(), ki = k.imag();
        const std::size_t from = (o * levels + n) * s, to = raise ? from + s : from - s;
        const double* x = in + 2 * from;
        double* y = out + 2 * to;
        for (std::size_t i = 0; i < s; ++i) {
          const double xr = x[2 * i], xi = x[2 * i + 1];
          y[2 * i] += kr * xr - ki * xi;
          y[2 * i + 1] += kr * xi + ki * xr;
        }
      }
  }
}

}  // namespace

void add_annihilation(const FockBasis& fock, std::size_t mode, const Eigen::Ref<const Eigen::MatrixXcd>& X,
                      Eigen::Ref<Eigen::MatrixXcd> Y, Complex c) {
  ladder(fock, mode, X, Y, c, false);
}

void add_creation(const FockBasis& fock, std::size_t mode, const Eigen::Ref<const Eigen::MatrixXcd>& X,
                  Eigen::Ref<Eigen::MatrixXcd> Y, Complex c) {
  ladder(fock, mode, X, Y, c, true);
}

// Validates N and the memory budget before any basis is enumerated.
static int checked_sector(int n_particles, const ModelGrid& grid, const FockTruncation& truncation,
                          std::size_t max_dimension) {
  if (n_particles < 1) throw std::invalid_argument("pauli-fierz: N must be >= 1");
  const double P = static_cast<double>(ParticleBasis::count(n_particles, grid.n_sites()));
  const double F = static_cast<double>(truncation.dimension());
  if (P == 0 || F == 0 || P * F > static_cast<double>(max_dimension))
    throw ResourceError("pauli-fierz: dimension " + format_double(P == 0 || F == 0 ? INFINITY : P * F) +
                        " exceeds the budget " + std::to_string(max_dimension));
  return n_particles;
}

PauliFierzSystem::PauliFierzSystem(const ModelGrid& grid, const ChargeDistribution& kappa, const PairPotential& v,
                                   int n_particles, const FockTruncation& truncation, std::size_t max_dimension)
    : grid_(&grid),
      kappa_(&kappa),
      potential_(&v),
      n_particles_(n_particles),
      truncation_(truncation),
      particles_(checked_sector(n_particles, grid, truncation, max_dimension), grid.n_sites()),
      reduced_(n_particles - 1, grid.n_sites()),
      fock_(truncation) {
  if (truncation.n_modes != grid.n_modes()) throw std::invalid_argument("pauli-fierz: truncation mode count mismatch");
  const std::size_t S = grid.n_sites(), M = grid.n_modes(), P = particles_.size();
  const double invN = 1.0 / n_particles;

  const auto table = build_coupling_table(grid, kappa);
  for (int i = 0; i < 3; ++i) {
    g_[i] = Eigen::MatrixXcd::Zero(S, M);
    if (i >= grid.dim) continue;
    for (std::size_t m = 0; m < M; ++m)
      g_[i].col(m) = std::sqrt(grid.retained_modes[m].measure_weight) * table.g[i].col(m);
  }

  occupation_.assign(S, Eigen::VectorXd::Zero(P));
  for (std::size_t p = 0; p < P; ++p)
    for (std::size_t x = 0; x < S; ++x) occupation_[x](p) = particles_.occupation(p, x);

  particle_diagonal_ = Eigen::VectorXd::Zero(P);
  if (!v.is_zero()) {
    for (std::size_t p = 0; p < P; ++p) {
      double e = 0.0;
      for (std::size_t x = 0; x < S; ++x) {
        const int nx = particles_.occupation(p, x);
        if (nx == 0) continue;
        for (std::size_t y = 0; y < S; ++y) e += 0.5 * v.circulant(x, y) * nx * particles_.occupation(p, y);
        e -= 0.5 * v.circulant(x, x) * nx;
      }
      particle_diagonal_(p) = invN * e;
    }
  }

  field_diagonal_ = Eigen::VectorXd::Zero(fock_.size());
  for (std::size_t f = 0; f < fock_.size(); ++f) {
    double e = 0.0;
    for (std::size_t m = 0; m < M; ++m) e += grid.retained_modes[m].k_norm * fock_.occupation(f, m);
    field_diagonal_(f) = e;
  }

  kinetic_t_ = SparseMatrixC(one_body(grid.kinetic).transpose());
  coupling_.resize(M);
  coupling_t_.resize(M);
  coupling_h_t_.resize(M);
  for (std::size_t m = 0; m < M; ++m) {
    Eigen::MatrixXcd B = Eigen::MatrixXcd::Zero(S, S);
    for (int i = 0; i < grid.dim; ++i)
      for (std::size_t y = 0; y < S; ++y)
        for (std::size_t x = 0; x < S; ++x)
          B(x, y) += grid.momentum[i](x, y) * (std::conj(g_[i](x, m)) + std::conj(g_[i](y, m)));
    coupling_[m] = B;
    coupling_t_[m] = SparseMatrixC(one_body(B).transpose());
    coupling_h_t_[m] = SparseMatrixC(one_body(B.adjoint()).transpose());
  }

  annihilation_table_.assign(S, {});
  std::vector<int> occ(S);
  for (std::size_t p = 0; p < P; ++p) {
    auto src = particles_.occupations(p);
    for (std::size_t x = 0; x < S; ++x) {
      if (src[x] == 0) continue;
      occ.assign(src.begin(), src.end());
      occ[x] -= 1;
      annihilation_table_[x].push_back({p, reduced_.index_of(occ), std::sqrt(static_cast<double>(src[x]))});
    }
  }
}

SparseMatrixC PauliFierzSystem::one_body(const Eigen::MatrixXcd& Q) const {
  const std::size_t S = particles_.n_sites(), P = particles_.size();
  std::vector<Eigen::Triplet<Complex>> triplets;
  triplets.reserve(P * S * S);
  std::vector<int> occ(S);
  for (std::size_t p = 0; p < P; ++p) {
    auto src = particles_.occupations(p);
    for (std::size_t y = 0; y < S; ++y) {
      if (src[y] == 0) continue;
      for (std::size_t x = 0; x < S; ++x) {
        const Complex q = Q(x, y);
        if (q == Complex(0.0)) continue;
        if (x == y) {
          triplets.emplace_back(p, p, q * static_cast<double>(src[y]));
          continue;
        }
        occ.assign(src.begin(), src.end());
        occ[y] -= 1;
        occ[x] += 1;
        const double c = std::sqrt(static_cast<double>(src[y]) * occ[x]);
        triplets.emplace_back(particles_.index_of(occ), p, q * c);
      }
    }
  }
  SparseMatrixC out(static_cast<Eigen::Index>(P), static_cast<Eigen::Index>(P));
  out.setFromTriplets(triplets.begin(), triplets.end());
  out.prune(Complex(0.0), 0.0);
  return out;
}

void PauliFierzSystem::add_field(int component, std::size_t site, const Eigen::Ref<const Eigen::MatrixXcd>& X,
                                 Eigen::Ref<Eigen::MatrixXcd> Y, Complex c) const {
  const auto& g = g_[component];
  for (std::size_t m = 0; m < fock_.n_modes(); ++m) {
    const Complex gm = g(site, m);
    if (gm == Complex(0.0)) continue;
    add_annihilation(fock_, m, X, Y, c * std::conj(gm));
    add_creation(fock_, m, X, Y, c * gm);
  }
}

Eigen::VectorXcd PauliFierzSystem::annihilate_particle(std::size_t site, const Eigen::VectorXcd& psi) const {
  const std::size_t F = fock_.size();
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(reduced_.size() * F));
  for (const auto& hop : annihilation_table_[site])
    out.segment(hop.to * F, F) += hop.coefficient * psi.segment(hop.from * F, F);
  return out;
}

void PauliFierzSystem::apply_hamiltonian(const Eigen::VectorXcd& in, Eigen::VectorXcd& out) const {
  const std::size_t F = fock_.size(), S = grid_->n_sites();
  const double invN = 1.0 / n_particles_;
  const double invSqrtN = 1.0 / std::sqrt(static_cast<double>(n_particles_));
  out.setZero(in.size());
  auto X = fock_view(in, F);
  auto Y = fock_view(out, F);

  add_times_sparse(X, kinetic_t_, Y, 1.0);
  Y += X * particle_diagonal_.asDiagonal();
  Y += field_diagonal_.asDiagonal() * X;

  Eigen::MatrixXcd Z(X.rows(), X.cols());
  for (std::size_t m = 0; m < fock_.n_modes(); ++m) {
    Z.setZero();
    add_annihilation(fock_, m, X, Z);
    add_times_sparse(Z, coupling_t_[m], Y, -invSqrtN);
    Z.setZero();
    add_creation(fock_, m, X, Z);
    add_times_sparse(Z, coupling_h_t_[m], Y, -invSqrtN);
  }

  // N^-1 sum_x n_x (x) A(x).A(x), only columns with n_x > 0 contribute
  Eigen::VectorXcd u(F), w(F);
  for (std::size_t x = 0; x < S; ++x) {
    const auto& n = occupation_[x];
    for (Eigen::Index p = 0; p < X.cols(); ++p) {
      if (n(p) == 0.0) continue;
      for (int i = 0; i < grid_->dim; ++i) {
        u.setZero();
        add_field(i, x, X.col(p), u);
        add_field(i, x, u, Y.col(p), invN * n(p));
      }
    }
  }
}

Eigen::VectorXcd PauliFierzSystem::field_force(std::size_t mode, const Eigen::VectorXcd& psi) const {
  const std::size_t F = fock_.size(), S = grid_->n_sites();
  const double invN = 1.0 / n_particles_;
  const double invSqrtN = 1.0 / std::sqrt(static_cast<double>(n_particles_));
  Eigen::VectorXd pi(F);
  for (std::size_t f = 0; f < F; ++f) pi(f) = fock_.occupation(f, mode) < fock_.n_max() ? 1.0 : -fock_.n_max();

  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(psi.size());
  auto X = fock_view(psi, F);
  auto Y = fock_view(out, F);
  const Eigen::MatrixXcd PiX = pi.asDiagonal() * X;
  add_times_sparse(PiX, coupling_h_t_[mode], Y, -invSqrtN);

  Eigen::VectorXcd u(F);
  for (std::size_t x = 0; x < S; ++x) {
    const auto& n = occupation_[x];
    for (int i = 0; i < grid_->dim; ++i) {
      const Complex gx = g_[i](x, mode);
      if (gx == Complex(0.0)) continue;
      for (Eigen::Index p = 0; p < X.cols(); ++p) {
        if (n(p) == 0.0) continue;
        const Complex c = invN * n(p) * gx;
        add_field(i, x, PiX.col(p), Y.col(p), c);
        u.setZero();
        add_field(i, x, X.col(p), u);
        Y.col(p) += c * pi.cwiseProduct(u);
      }
    }
  }
  return out;
}

OperatorHandle PauliFierzSystem::hamiltonian() const {
  OperatorHandle op;
  op.name = "H_N";
  op.dimension = dimension();
  op.apply = [this](const Eigen::VectorXcd& in, Eigen::VectorXcd& out) { apply_hamiltonian(in, out); };
  op.verify_hermitian(0x5eed);
  return op;
}

OperatorHandle PauliFierzSystem::field_energy() const {
  OperatorHandle op;
  op.name = "H_f";
  op.dimension = dimension();
  op.apply = [this](const Eigen::VectorXcd& in, Eigen::VectorXcd& out) {
    out.resize(in.size());
    fock_view(out, fock_.size()) = field_diagonal_.asDiagonal() * fock_view(in, fock_.size());
  };
  op.hermitian = true;
  return op;
}

OperatorHandle PauliFierzSystem::photon_number() const {
  OperatorHandle op;
  op.name = "Number";
  op.dimension = dimension();
  op.apply = [this](const Eigen::VectorXcd& in, Eigen::VectorXcd& out) {
    out.resize(in.size());
    fock_view(out, fock_.size()) = fock_.total_occupation().asDiagonal() * fock_view(in, fock_.size());
  };
  op.hermitian = true;
  return op;
}

OperatorHandle PauliFierzSystem::annihilation(std::size_t mode) const {
  OperatorHandle op;
  op.name = "a";
  op.dimension = dimension();
  op.apply = [this, mode](const Eigen::VectorXcd& in, Eigen::VectorXcd& out) {
    out.setZero(in.size());
    add_annihilation(fock_, mode, fock_view(in, fock_.size()), fock_view(out, fock_.size()));
  };
  return op;
}

OperatorHandle PauliFierzSystem::creation(std::size_t mode) const {
  OperatorHandle op;
  op.name = "a*";
  op.dimension = dimension();
  op.apply = [this, mode](const Eigen::VectorXcd& in, Eigen::VectorXcd& out) {
    out.setZero(in.size());
    add_creation(fock_, mode, fock_view(in, fock_.size()), fock_view(out, fock_.size()));
  };
  return op;
}

OperatorHandle PauliFierzSystem::field(int component, std::size_t site) const {
  OperatorHandle op;
  op.name = "A";
  op.dimension = dimension();
  op.apply = [this, component, site](const Eigen::VectorXcd& in, Eigen::VectorXcd& out) {
    out.setZero(in.size());
    add_field(component, site, fock_view(in, fock_.size()), fock_view(out, fock_.size()));
  };
  op.hermitian = true;
  return op;
}

double poisson_tail(double z_abs_sq, int n_max) {
  if (z_abs_sq == 0.0) return 0.0;
  // term_n = exp(-x) x^n / n!, accumulated in log space from n = n_max + 1
  double tail = 0.0;
  double log_term = -z_abs_sq + (n_max + 1) * std::log(z_abs_sq) - std::lgamma(n_max + 2.0);
  for (int n = n_max + 1; n < n_max + 10000; ++n) {
    const double term = std::exp(log_term);
    tail += term;
    if (n > z_abs_sq && term < 1e-18 * tail) break;
    log_term += std::log(z_abs_sq) - std::log(n + 1.0);
  }
  return tail;
}

CoherentState coherent_state(const Eigen::VectorXcd& alpha, int n_particles, const ModelGrid& grid,
                             const FockTruncation& truncation, double tail_tolerance) {
  const std::size_t M = grid.n_modes();
  if (static_cast<std::size_t>(alpha.size()) != M) throw std::invalid_argument("coherent_state: alpha size mismatch");
  const int n_max = truncation.n_max;
  CoherentState out;
  double kept = 1.0;
  std::vector<Eigen::VectorXcd> factors;
  for (std::size_t m = 0; m < M; ++m) {
    const Complex z = std::sqrt(n_particles * grid.retained_modes[m].measure_weight) * alpha(m);
    const double tail = poisson_tail(std::norm(z), n_max);
    out.mode_tails.push_back(tail);
    kept *= 1.0 - tail;
    Eigen::VectorXcd c(n_max + 1);
    c(0) = std::exp(-0.5 * std::norm(z));
    for (int n = 1; n <= n_max; ++n) c(n) = c(n - 1) * z / std::sqrt(static_cast<double>(n));
    factors.push_back(c / c.norm());
  }
  out.tail_mass = 1.0 - kept;
  if (out.tail_mass > tail_tolerance)
    throw TruncationError("coherent state: tail mass " + format_double(out.tail_mass) + " exceeds tolerance " +
                          format_double(tail_tolerance) + "; raise n_max");
  FockBasis fock(truncation);
  out.vector.resize(static_cast<Eigen::Index>(fock.size()));
  for (std::size_t f = 0; f < fock.size(); ++f) {
    Complex amp = 1.0;
    for (std::size_t m = 0; m < M; ++m) amp *= factors[m](fock.occupation(f, m));
    out.vector(static_cast<Eigen::Index>(f)) = amp;
  }
  return out;
}

Eigen::VectorXcd product_particle_vector(const Eigen::VectorXcd& phi, const ParticleBasis& basis,
                                         const ModelGrid& grid) {
  const double scale = std::sqrt(grid.cell_volume);
  const std::size_t S = basis.n_sites();
  Eigen::VectorXcd out(static_cast<Eigen::Index>(basis.size()));
  const double log_n_factorial = std::lgamma(basis.n_particles() + 1.0);
  for (std::size_t p = 0; p < basis.size(); ++p) {
    double log_multinomial = log_n_factorial;
    Complex amp = 1.0;
    for (std::size_t x = 0; x < S; ++x) {
      const int n = basis.occupation(p, x);
      log_multinomial -= std::lgamma(n + 1.0);
      amp *= std::pow(scale * phi(static_cast<Eigen::Index>(x)), n);
    }
    out(static_cast<Eigen::Index>(p)) = std::exp(0.5 * log_multinomial) * amp;
  }
  return out;
}

ManyBodyState tensor_state(const Eigen::VectorXcd& particle, const Eigen::VectorXcd& fock,
                           const PauliFierzSystem& system) {
  if (static_cast<std::size_t>(particle.size()) != system.particle_dim() ||
      static_cast<std::size_t>(fock.size()) != system.fock_dim())
    throw std::invalid_argument("tensor_state: factor sizes do not match the system");
  ManyBodyState s;
  s.n_particles = system.n_particles();
  s.particle_dim = system.particle_dim();
  s.fock_dim = system.fock_dim();
  s.amplitudes.resize(static_cast<Eigen::Index>(system.dimension()));
  fock_view(s.amplitudes, s.fock_dim) = fock * particle.transpose();
  return s;
}

ManyBodyState product_initial_state(const Eigen::VectorXcd& phi, const Eigen::VectorXcd& alpha,
                                    const PauliFierzSystem& system, double tail_tolerance) {
  const auto particle = product_particle_vector(phi, system.particles(), system.grid());
  const auto coherent =
      coherent_state(alpha, system.n_particles(), system.grid(), system.truncation(), tail_tolerance);
  return tensor_state(particle, coherent.vector, system);
}

double photon_number_moment(const ManyBodyState& state, const PauliFierzSystem& system, double power) {
  const auto X = fock_view(state.amplitudes, system.fock_dim());
  const double mean = (system.fock().total_occupation().asDiagonal() * X.cwiseAbs2()).sum();
  if (power == 0.5) return std::sqrt(mean);
  if (power == 1.0) return mean;
  throw std::invalid_argument("photon_number_moment: power must be 0.5 or 1");
}

Eigen::MatrixXcd reduced_density_particle(const ManyBodyState& state, const PauliFierzSystem& system) {
  const std::size_t S = system.grid().n_sites();
  std::vector<Eigen::VectorXcd> chi(S);
  for (std::size_t x = 0; x < S; ++x) chi[x] = system.annihilate_particle(x, state.amplitudes);
  Eigen::MatrixXcd gamma(S, S);
  for (std::size_t x = 0; x < S; ++x)
    for (std::size_t y = 0; y <= x; ++y) {
      gamma(x, y) = chi[y].dot(chi[x]) / static_cast<double>(system.n_particles());
      gamma(y, x) = std::conj(gamma(x, y));
    }
  return gamma;
}

Eigen::MatrixXcd reduced_density_photon(const ManyBodyState& state, const PauliFierzSystem& system) {
  const std::size_t M = system.grid().n_modes(), F = system.fock_dim();
  const auto X = fock_view(state.amplitudes, F);
  std::vector<Eigen::MatrixXcd> ax(M, Eigen::MatrixXcd::Zero(X.rows(), X.cols()));
  for (std::size_t m = 0; m < M; ++m) add_annihilation(system.fock(), m, X, ax[m]);
  Eigen::MatrixXcd gamma(M, M);
  for (std::size_t m = 0; m < M; ++m)
    for (std::size_t n = 0; n <= m; ++n) {
      const Complex value = (ax[n].conjugate().cwiseProduct(ax[m])).sum() / static_cast<double>(system.n_particles());
      gamma(m, n) = value;
      gamma(n, m) = std::conj(value);
    }
  return gamma;
}

Complex expectation(const OperatorHandle& op, const Eigen::VectorXcd& psi) { return psi.dot(op(psi)); }

void write_pf_snapshot(std::ostream& out, const ManyBodyState& state, const PauliFierzSystem& system) {
  binary::put_u64(out, static_cast<std::uint64_t>(system.n_particles()));
  binary::put_u64(out, system.grid().n_sites());
  binary::put_u64(out, system.grid().n_modes());
  binary::put_u64(out, static_cast<std::uint64_t>(system.truncation().n_max));
  for (const auto& z : state.amplitudes) binary::put_complex(out, z);
}

ManyBodyState read_pf_snapshot(std::istream& in, const PauliFierzSystem& system) {
  const auto n = binary::get_u64(in);
  const auto sites = binary::get_u64(in);
  const auto modes = binary::get_u64(in);
  const auto n_max = binary::get_u64(in);
  if (n != static_cast<std::uint64_t>(system.n_particles()) || sites != system.grid().n_sites() ||
      modes != system.grid().n_modes() || n_max != static_cast<std::uint64_t>(system.truncation().n_max))
    throw std::runtime_error("pf snapshot: header does not match the system");
  ManyBodyState s;
  s.n_particles = system.n_particles();
  s.particle_dim = system.particle_dim();
  s.fock_dim = system.fock_dim();
  s.amplitudes.resize(static_cast<Eigen::Index>(system.dimension()));
  for (auto& z : s.amplitudes) z = binary::get_complex(in);
  return s;
}

}  // namespace mslab

#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <unsupported/Eigen/KroneckerProduct>

#include "mslab/krylov.hpp"
#include "mslab/ms_solver.hpp"
#include "mslab/pauli_fierz.hpp"

using namespace mslab;

namespace {

struct Model {
  ModelGrid grid;
  ChargeDistribution kappa;
  PairPotential v;
};

Model model_1d(int sites, double k_max, double charge, bool with_potential) {
  Model s;
  s.grid = build_grid({1, sites, 2 * kPi, k_max});
  ChargeParams cp;
  cp.sigma = 0.5;
  cp.charge = charge;
  s.kappa = charge_preset(charge == 0 ? ChargeKind::none : ChargeKind::gaussian, cp, s.grid);
  PotentialParams vp;
  vp.charge = 1.0;
  vp.softening = 0.7;
  s.v = potential_preset(with_potential ? PotentialKind::softened_coulomb : PotentialKind::zero, vp, s.grid);
  return s;
}

FockTruncation trunc(const ModelGrid& grid, int n_max) { return {n_max, grid.n_modes()}; }

// Dense single-mode ladder matrix on 0..n_max.
Eigen::MatrixXcd ladder(int n_max) {
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(n_max + 1, n_max + 1);
  for (int n = 1; n <= n_max; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

// a_m on the full Fock space, mode 0 most significant.
Eigen::MatrixXcd fock_ladder(std::size_t mode, std::size_t n_modes, int n_max) {
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Identity(1, 1);
  for (std::size_t m = 0; m < n_modes; ++m) {
    const Eigen::MatrixXcd factor = m == mode ? ladder(n_max) : Eigen::MatrixXcd::Identity(n_max + 1, n_max + 1);
    out = Eigen::kroneckerProduct(out, factor).eval();
  }
  return out;
}

// First-quantized Hamiltonian for N = 1 or 2 on (sites^N) x Fock, built
// directly from Kronecker products with the coupling table of core.
Eigen::MatrixXcd first_quantized_hamiltonian(const Model& s, int N, int n_max) {
  const auto& grid = s.grid;
  const std::size_t S = grid.n_sites(), M = grid.n_modes();
  const auto table = build_coupling_table(grid, s.kappa);
  const long F = std::lround(std::pow(n_max + 1, M));
  std::vector<Eigen::MatrixXcd> a(M);
  for (std::size_t m = 0; m < M; ++m) a[m] = fock_ladder(m, M, n_max);
  Eigen::MatrixXcd Hf = Eigen::MatrixXcd::Zero(F, F);
  for (std::size_t m = 0; m < M; ++m) Hf += grid.retained_modes[m].k_norm * a[m].adjoint() * a[m];
  // A(x) dense, 1D
  std::vector<Eigen::MatrixXcd> A(S, Eigen::MatrixXcd::Zero(F, F));
  for (std::size_t x = 0; x < S; ++x)
    for (std::size_t m = 0; m < M; ++m) {
      const Complex G = std::sqrt(grid.retained_modes[m].measure_weight) * table.g[0](x, m);
      A[x] += std::conj(G) * a[m] + G * a[m].adjoint();
    }
  const double invSqrtN = 1.0 / std::sqrt(double(N)), invN = 1.0 / N;
  // one-particle block operator h on sites x Fock
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(S * F, S * F);
  for (std::size_t x = 0; x < S; ++x)
    for (std::size_t y = 0; y < S; ++y) {
      Eigen::MatrixXcd block = grid.kinetic(x, y) * Eigen::MatrixXcd::Identity(F, F);
      block -= invSqrtN * grid.momentum[0](x, y) * (A[x] + A[y]);
      if (x == y) block += invN * A[x] * A[x];
      h.block(x * F, y * F, F, F) = block;
    }
  if (N == 1) return h + Eigen::kroneckerProduct(Eigen::MatrixXcd::Identity(S, S), Hf).eval();
  // N = 2: h acts on slot j; the photon factor is shared, so index is (x1, x2, f)
  const long D = S * S * F;
  Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(D, D);
  for (std::size_t x1 = 0; x1 < S; ++x1)
    for (std::size_t x2 = 0; x2 < S; ++x2)
      for (std::size_t y = 0; y < S; ++y) {
        H.block((x1 * S + x2) * F, (y * S + x2) * F, F, F) += h.block(x1 * F, y * F, F, F);
        H.block((x1 * S + x2) * F, (x1 * S + y) * F, F, F) += h.block(x2 * F, y * F, F, F);
      }
  for (std::size_t x1 = 0; x1 < S; ++x1)
    for (std::size_t x2 = 0; x2 < S; ++x2) {
      auto blk = H.block((x1 * S + x2) * F, (x1 * S + x2) * F, F, F);
      blk += Hf;
      blk += invN * s.v.circulant(x1, x2) * Eigen::MatrixXcd::Identity(F, F);
    }
  return H;
}

// Isometry from the N = 2 occupation basis (x Fock) into (sites^2) x Fock.
Eigen::MatrixXcd symmetric_embedding(const ParticleBasis& basis, std::size_t F) {
  const std::size_t S = basis.n_sites();
  Eigen::MatrixXcd J = Eigen::MatrixXcd::Zero(S * S * F, basis.size() * F);
  for (std::size_t p = 0; p < basis.size(); ++p) {
    std::vector<std::size_t> sites;
    for (std::size_t x = 0; x < S; ++x)
      for (int k = 0; k < basis.occupation(p, x); ++k) sites.push_back(x);
    const std::size_t x = sites[0], y = sites[1];
    for (std::size_t f = 0; f < F; ++f) {
      if (x == y) {
        J((x * S + x) * F + f, p * F + f) = 1.0;
      } else {
        J((x * S + y) * F + f, p * F + f) = 1.0 / std::sqrt(2.0);
        J((y * S + x) * F + f, p * F + f) = 1.0 / std::sqrt(2.0);
      }
    }
  }
  return J;
}

}  // namespace

TEST_CASE("bases") {
  SUBCASE("particle sector count and ordering") {
    ParticleBasis b(2, 3);
    CHECK(b.size() == 6);
    CHECK(ParticleBasis::count(2, 3) == 6);
    CHECK(ParticleBasis::count(8, 4) == 165);
    CHECK(b.occupation(0, 0) == 2);
    CHECK(b.occupation(5, 2) == 2);
    const std::vector<int> mid{1, 0, 1};
    CHECK(b.index_of(mid) == 2);
    const std::vector<int> bad{1, 1, 1};
    CHECK_THROWS_AS(b.index_of(bad), std::out_of_range);
  }
  SUBCASE("fock mixed radix") {
    FockBasis f({3, 2});
    CHECK(f.size() == 16);
    CHECK(f.stride(0) == 4);
    CHECK(f.occupation(7, 0) == 1);
    CHECK(f.occupation(7, 1) == 3);
    CHECK(f.total_occupation()(7) == 4);
    CHECK(FockTruncation{1, 70}.dimension() == 0);
  }
}

TEST_CASE("ladder operators") {
  const auto s = model_1d(4, 1.0, 0.0, false);
  PauliFierzSystem sys(s.grid, s.kappa, s.v, 1, trunc(s.grid, 3), 100000);
  const auto a0 = sys.annihilation(0), c0 = sys.creation(0), a1 = sys.annihilation(1);

  SUBCASE("a vacuum = 0") {
    const auto vac = tensor_state(Eigen::VectorXcd::Unit(4, 1), Eigen::VectorXcd::Unit(16, 0), sys);
    CHECK(a0(vac.amplitudes).norm() == 0.0);
    CHECK(a1(vac.amplitudes).norm() == 0.0);
  }
  SUBCASE("a* a counts") {
    for (std::size_t f = 0; f < 16; ++f) {
      const auto st = tensor_state(Eigen::VectorXcd::Unit(4, 2), Eigen::VectorXcd::Unit(16, f), sys);
      CHECK((c0(a0(st.amplitudes)) - sys.fock().occupation(f, 0) * st.amplitudes).norm() < 1e-15);
    }
  }
  SUBCASE("CCR on the protected subspace, a* is the adjoint of a") {
    Eigen::VectorXcd fock = random_unit_vector(16, 11);
    for (std::size_t f = 0; f < 16; ++f)
      if (sys.fock().occupation(f, 0) == 3 || sys.fock().occupation(f, 1) == 3) fock(f) = 0;
    const auto st = tensor_state(random_unit_vector(4, 12), fock, sys);
    const auto& psi = st.amplitudes;
    CHECK((a0(c0(psi)) - c0(a0(psi)) - psi).norm() <= 1e-12);
    CHECK((a1(c0(psi)) - c0(a1(psi))).norm() <= 1e-12);
    const auto u = random_unit_vector(sys.dimension(), 5), w = random_unit_vector(sys.dimension(), 6);
    CHECK(std::abs(u.dot(a0(w)) - c0(u).dot(w)) < 1e-15);
  }
}

TEST_CASE("field operators") {
  const auto s = model_1d(4, 2.0, 3.0, false);
  PauliFierzSystem sys(s.grid, s.kappa, s.v, 1, trunc(s.grid, 2), 100000);
  const auto table = build_coupling_table(s.grid, s.kappa);
  const auto vac = tensor_state(Eigen::VectorXcd::Unit(4, 0), Eigen::VectorXcd::Unit(sys.fock_dim(), 0), sys);
  for (std::size_t x = 0; x < 4; ++x) {
    const auto A = sys.field(0, x);
    CHECK(std::abs(expectation(A, vac.amplitudes)) == 0.0);
    // <0|A A|0> = sum_m w |G_x(m)|^2 by one use of [a, a*] = 1
    double expected = 0;
    for (std::size_t m = 0; m < s.grid.n_modes(); ++m)
      expected += s.grid.retained_modes[m].measure_weight * std::norm(table.g[0](x, m));
    CHECK(A(vac.amplitudes).squaredNorm() == doctest::Approx(expected).epsilon(1e-14));
  }
  SUBCASE("H_f and Number on single-photon states") {
    for (std::size_t m = 0; m < s.grid.n_modes(); ++m) {
      Eigen::VectorXcd fock = Eigen::VectorXcd::Zero(sys.fock_dim());
      fock(sys.fock().stride(m)) = 1.0;
      const auto st = tensor_state(Eigen::VectorXcd::Unit(4, 0), fock, sys);
      CHECK((sys.field_energy()(st.amplitudes) - s.grid.retained_modes[m].k_norm * st.amplitudes).norm() < 1e-15);
      CHECK((sys.photon_number()(st.amplitudes) - st.amplitudes).norm() == 0.0);
    }
  }
}

TEST_CASE("hamiltonian") {
  SUBCASE("decoupled N = 1: spectrum is |p|^2 + sum |k| n") {
    const auto s = model_1d(4, 1.0, 0.0, false);
    PauliFierzSystem sys(s.grid, s.kappa, s.v, 1, trunc(s.grid, 2), 100000);
    const auto H = sys.hamiltonian();
    CHECK(H.hermitian);
    DensePropagator dense(dense_matrix(H));
    std::vector<double> expected;
    for (const auto& p : s.grid.lattice_momenta)
      for (int n0 = 0; n0 <= 2; ++n0)
        for (int n1 = 0; n1 <= 2; ++n1) expected.push_back(p[0] * p[0] + n0 + n1);
    std::sort(expected.begin(), expected.end());
    for (std::size_t i = 0; i < expected.size(); ++i) CHECK(dense.eigenvalues()(i) == doctest::Approx(expected[i]));
  }
  SUBCASE("N = 1 coupled, 3 sites, n_max = 1: matches the first-quantized matrix") {
    const auto s = model_1d(3, 1.0, 3.0, true);
    PauliFierzSystem sys(s.grid, s.kappa, s.v, 1, trunc(s.grid, 1), 100000);
    const Eigen::MatrixXcd H = dense_matrix(sys.hamiltonian());
    const Eigen::MatrixXcd ref = first_quantized_hamiltonian(s, 1, 1);
    CHECK((H - ref).norm() < 1e-13);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> e1(H), e2(ref);
    CHECK((e1.eigenvalues() - e2.eigenvalues()).norm() < 1e-12);
  }
  SUBCASE("N = 2 coupled: symmetric compression of the first-quantized matrix") {
    const auto s = model_1d(3, 1.0, 3.0, true);
    PauliFierzSystem sys(s.grid, s.kappa, s.v, 2, trunc(s.grid, 2), 100000);
    const Eigen::MatrixXcd H = dense_matrix(sys.hamiltonian());
    const Eigen::MatrixXcd J = symmetric_embedding(sys.particles(), sys.fock_dim());
    const Eigen::MatrixXcd ref = first_quantized_hamiltonian(s, 2, 2);
    CHECK((J.adjoint() * J - Eigen::MatrixXcd::Identity(J.cols(), J.cols())).norm() < 1e-14);
    CHECK((H - J.adjoint() * ref * J).norm() < 1e-12);
    // the symmetric subspace is invariant under the first-quantized H
    CHECK((ref * J - J * (J.adjoint() * ref * J)).norm() < 1e-12);
  }
  SUBCASE("real expectation values for random states") {
    const auto s = model_1d(4, 1.0, 3.0, true);
    PauliFierzSystem sys(s.grid, s.kappa, s.v, 3, trunc(s.grid, 3), 100000);
    const auto H = sys.hamiltonian();
    for (int r = 0; r < 100; ++r) {
      const auto psi = random_unit_vector(sys.dimension(), 1000 + r);
      CHECK(std::abs(expectation(H, psi).imag()) <= 1e-12);
    }
    CHECK(H.hermiticity_defect(77) <= 1e-12);
  }
  SUBCASE("memory guard") {
    const auto s = model_1d(4, 1.0, 3.0, true);
    CHECK_THROWS_AS(PauliFierzSystem(s.grid, s.kappa, s.v, 8, trunc(s.grid, 12), 10000), ResourceError);
  }
}

TEST_CASE("coherent states") {
  const auto s = model_1d(4, 1.0, 0.0, false);
  SUBCASE("alpha = 0 gives the vacuum") {
    const auto c = coherent_state(Eigen::VectorXcd::Zero(2), 3, s.grid, trunc(s.grid, 4), 1e-10);
    CHECK(c.vector(0) == Complex(1.0));
    CHECK(c.vector.norm() == doctest::Approx(1.0));
    CHECK(c.tail_mass == 0.0);
  }
  SUBCASE("one mode with |z|^2 = 0.5") {
    // weight is 1 here, so z = sqrt(N) alpha
    Eigen::VectorXcd alpha = Eigen::VectorXcd::Zero(2);
    alpha(1) = std::sqrt(0.5) * std::exp(kI * 0.3);
    for (int n_max : {8, 10}) {
      PauliFierzSystem sys(s.grid, s.kappa, s.v, 1, trunc(s.grid, n_max), 100000);
      const auto st = product_initial_state(plane_wave(s.grid, {0, 0, 0}), alpha, sys, 1e-6);
      // truncated, renormalized Poisson mean
      double num = 0, den = 0, p = std::exp(-0.5);
      for (int n = 0; n <= n_max; ++n) {
        num += n * p;
        den += p;
        p *= 0.5 / (n + 1);
      }
      const double mean = photon_number_moment(st, sys, 1.0);
      CHECK(mean == doctest::Approx(num / den).epsilon(1e-14));
      CHECK(poisson_tail(0.5, n_max) == doctest::Approx(1 - den).epsilon(1e-6));
      MESSAGE("n_max " << n_max << ": <Number> - 0.5 = " << mean - 0.5);
      if (n_max == 10) CHECK(std::abs(mean - 0.5) <= 1e-8);
      CHECK(photon_number_moment(st, sys, 0.5) == doctest::Approx(std::sqrt(mean)));
    }
  }
  SUBCASE("shifting property <a_m> = sqrt(N w) alpha_m") {
    Eigen::VectorXcd alpha(2);
    alpha << Complex(0.2, -0.1), Complex(-0.15, 0.3);
    const int N = 4;
    PauliFierzSystem sys(s.grid, s.kappa, s.v, N, trunc(s.grid, 14), 1000000);
    const auto st = product_initial_state(plane_wave(s.grid, {1, 0, 0}), alpha, sys, 1e-10);
    for (std::size_t m = 0; m < 2; ++m) {
      const Complex z = std::sqrt(double(N)) * alpha(m);
      CHECK(std::abs(expectation(sys.annihilation(m), st.amplitudes) - z) <= 1e-10);
    }
  }
  SUBCASE("tail above tolerance") {
    Eigen::VectorXcd alpha = Eigen::VectorXcd::Constant(2, 2.0);
    CHECK_THROWS_AS(coherent_state(alpha, 4, s.grid, trunc(s.grid, 3), 1e-10), TruncationError);
  }
}

TEST_CASE("product state energy: <H>/N = E_M + c/N") {
  const auto s = model_1d(4, 1.0, 3.0, true);
  EffectiveState eff;
  eff.phi = gaussian_packet(s.grid, {2.0, 0, 0}, 0.9, {1.0, 0, 0});
  eff.alpha = Eigen::VectorXcd(2);
  eff.alpha << Complex(0.2, 0.1), Complex(-0.1, 0.15);
  const double E = ms_energy(eff, {&s.grid, &s.kappa, &s.v});
  std::vector<double> e;
  for (int N : {2, 4, 8}) {
    PauliFierzSystem sys(s.grid, s.kappa, s.v, N, trunc(s.grid, 14), 1000000);
    const auto st = product_initial_state(eff.phi, eff.alpha, sys, 1e-12);
    e.push_back(expectation(sys.hamiltonian(), st.amplitudes).real() / N);
  }
  CHECK((e[0] - E) / (e[1] - E) == doctest::Approx(2.0).epsilon(1e-8));
  CHECK((e[1] - E) / (e[2] - E) == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(2 * e[2] - e[1] == doctest::Approx(E).epsilon(1e-10));
}

TEST_CASE("evolve") {
  const auto s = model_1d(4, 1.0, 3.0, true);
  PauliFierzSystem sys(s.grid, s.kappa, s.v, 2, trunc(s.grid, 3), 100000);
  const auto H = sys.hamiltonian();
  const Eigen::MatrixXcd Hd = dense_matrix(H);
  DensePropagator dense(Hd);
  KrylovOptions opt;
  opt.tolerance = 1e-12;

  SUBCASE("eigenvector picks up a phase") {
    const Eigen::VectorXcd u = dense.eigenvectors().col(7);
    const double lambda = dense.eigenvalues()(7);
    const auto out = evolve(u, H, 0.8, opt);
    CHECK((out - std::exp(-kI * lambda * 0.8) * u).norm() <= 1e-11);
  }
  SUBCASE("matches the dense exponential, norm and energy preserved") {
    const auto psi = random_unit_vector(sys.dimension(), 99);
    EvolveStats stats;
    const auto out = evolve(psi, H, 1.5, opt, &stats);
    CHECK((out - dense.apply(psi, 1.5)).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(std::abs(out.norm() - 1.0) <= 1e-10);
    CHECK(std::abs(expectation(H, out).real() - expectation(H, psi).real()) <= 1e-9 * std::abs(expectation(H, psi)));
    CHECK(stats.substeps >= 1);
    const auto back = evolve(out, H, -1.5, opt);
    CHECK((back - psi).norm() <= 1e-9);
  }
  SUBCASE("non-Hermitian input is rejected") {
    CHECK_THROWS_AS(evolve(random_unit_vector(sys.dimension(), 1), sys.annihilation(0), 1.0, opt),
                    std::invalid_argument);
  }
}

TEST_CASE("reduced densities") {
  const auto s = model_1d(4, 1.0, 3.0, true);
  SUBCASE("product state gives |phi><phi|") {
    PauliFierzSystem sys(s.grid, s.kappa, s.v, 3, trunc(s.grid, 8), 100000);
    const auto phi = gaussian_packet(s.grid, {1.0, 0, 0}, 0.8, {1.0, 0, 0});
    Eigen::VectorXcd alpha(2);
    alpha << Complex(0.2, 0.1), Complex(-0.1, 0.15);
    const auto st = product_initial_state(phi, alpha, sys, 1e-10);
    const Eigen::VectorXcd c = std::sqrt(s.grid.cell_volume) * phi;
    CHECK((reduced_density_particle(st, sys) - c * c.adjoint()).norm() < 1e-13);
    const Eigen::VectorXcd a = alpha;  // weights are 1
    CHECK((reduced_density_photon(st, sys) - a * a.adjoint()).norm() < 1e-9);
  }
  SUBCASE("symmetrized pair of orthogonal orbitals") {
    PauliFierzSystem sys(s.grid, s.kappa, s.v, 2, trunc(s.grid, 1), 100000);
    Eigen::VectorXcd phi = random_unit_vector(4, 3), psi = random_unit_vector(4, 4);
    psi -= phi * phi.dot(psi);
    psi.normalize();
    // (phi x psi + psi x phi) / sqrt(2), mapped into the occupation basis
    Eigen::VectorXcd T(16);
    for (int x = 0; x < 4; ++x)
      for (int y = 0; y < 4; ++y) T(4 * x + y) = (phi(x) * psi(y) + psi(x) * phi(y)) / std::sqrt(2.0);
    const Eigen::MatrixXcd J = symmetric_embedding(sys.particles(), 1);
    const Eigen::VectorXcd particle = J.adjoint() * T;
    CHECK(particle.norm() == doctest::Approx(1.0));
    const auto st = tensor_state(particle, Eigen::VectorXcd::Unit(4, 0), sys);
    const Eigen::MatrixXcd expected = 0.5 * (phi * phi.adjoint() + psi * psi.adjoint());
    CHECK((reduced_density_particle(st, sys) - expected).norm() < 1e-14);
    CHECK(reduced_density_photon(st, sys).norm() == 0.0);
  }
  SUBCASE("random states: trace, positivity, photon trace identity") {
    PauliFierzSystem sys(s.grid, s.kappa, s.v, 3, trunc(s.grid, 3), 100000);
    for (int r = 0; r < 10; ++r) {
      ManyBodyState st;
      st.n_particles = 3;
      st.particle_dim = sys.particle_dim();
      st.fock_dim = sys.fock_dim();
      st.amplitudes = random_unit_vector(sys.dimension(), 500 + r);
      const auto g = reduced_density_particle(st, sys);
      CHECK(std::abs(g.trace() - 1.0) <= 1e-12);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(g);
      CHECK(eig.eigenvalues().minCoeff() >= -1e-12);
      const auto gp = reduced_density_photon(st, sys);
      CHECK((gp - gp.adjoint()).norm() == 0.0);
      CHECK(std::abs(gp.trace().real() - photon_number_moment(st, sys, 1.0) / 3) <= 1e-12);
    }
  }
}

TEST_CASE("pf snapshot layout") {
  const auto s = model_1d(4, 1.0, 3.0, true);
  PauliFierzSystem sys(s.grid, s.kappa, s.v, 2, trunc(s.grid, 2), 100000);
  ManyBodyState st;
  st.n_particles = 2;
  st.particle_dim = sys.particle_dim();
  st.fock_dim = sys.fock_dim();
  st.amplitudes = random_unit_vector(sys.dimension(), 8);
  std::stringstream buf;
  write_pf_snapshot(buf, st, sys);
  CHECK(buf.str().size() == 32 + sys.dimension() * 16);
  CHECK(static_cast<unsigned char>(buf.str()[0]) == 2);
  CHECK(static_cast<unsigned char>(buf.str()[24]) == 2);
  CHECK((read_pf_snapshot(buf, sys).amplitudes - st.amplitudes).norm() == 0.0);
}

#include "doctest.h"

#include <cmath>
#include <sstream>

#include "mslab/ms_solver.hpp"

using namespace mslab;

namespace {

struct Scenario {
  ModelGrid grid;
  ChargeDistribution kappa;
  PairPotential v;
  MsContext ctx() const { return {&grid, &kappa, &v}; }
};

Scenario coupled_1d() {
  Scenario s;
  s.grid = build_grid({1, 8, 2 * kPi, 2.0});
  ChargeParams cp;
  cp.sigma = 0.5;
  cp.charge = 3.0;
  s.kappa = charge_preset(ChargeKind::gaussian, cp, s.grid);
  PotentialParams vp;
  vp.charge = 1.0;
  vp.softening = 0.7;
  s.v = potential_preset(PotentialKind::softened_coulomb, vp, s.grid);
  return s;
}

Scenario free_1d(int sites = 8) {
  Scenario s;
  s.grid = build_grid({1, sites, 2 * kPi, 2.0});
  s.kappa = charge_preset(ChargeKind::none, {}, s.grid);
  s.v = potential_preset(PotentialKind::zero, {}, s.grid);
  return s;
}

EffectiveState initial_1d(const ModelGrid& grid) {
  EffectiveState st;
  st.phi = gaussian_packet(grid, {2.0, 0, 0}, 0.9, {1.0, 0, 0});
  st.alpha = Eigen::VectorXcd::Zero(grid.n_modes());
  st.alpha(0) = Complex(0.2, 0.1);
  st.alpha(2) = Complex(-0.3, 0.25);
  st.alpha(3) = Complex(0.05, 0.0);
  return st;
}

// phi -> conj(phi), alpha(k) -> -conj(alpha(-k)) in the scalarized 1D model:
// the field A flips sign, which is the time-reversal of the effective flow.
EffectiveState time_reversed(const EffectiveState& s, const ModelGrid& grid) {
  EffectiveState r = s;
  r.phi = s.phi.conjugate();
  const std::size_t M = grid.n_modes();
  for (std::size_t m = 0; m < M; ++m) r.alpha(m) = -std::conj(s.alpha(M - 1 - m));
  return r;
}

}  // namespace

TEST_CASE("reconstruct_A") {
  const auto sc = free_1d();
  const auto& grid = sc.grid;
  SUBCASE("zero amplitudes") {
    CHECK(reconstruct_A(Eigen::VectorXcd::Zero(grid.n_modes()), grid).norm() == 0.0);
  }
  SUBCASE("one +-k pair with alpha(-k) = conj(alpha(k))") {
    // modes: -2, -1, 1, 2. Pair k = 1 (index 2) and k = -1 (index 1).
    const Complex c(0.4, -0.7);
    Eigen::VectorXcd alpha = Eigen::VectorXcd::Zero(4);
    alpha(2) = c;
    alpha(1) = std::conj(c);
    const auto A = reconstruct_A(alpha, grid);
    // Each of the two slots contributes coef (e^{ikx} alpha + c.c.) = 2 coef Re(c e^{ix}).
    const double coef = 1.0 * std::pow(2 * kPi, -0.5) / std::sqrt(2.0);
    for (std::size_t x = 0; x < grid.n_sites(); ++x) {
      const double xx = grid.site_positions[x][0];
      CHECK(A(x, 0) == doctest::Approx(4.0 * coef * (c * std::exp(kI * xx)).real()).epsilon(1e-14));
    }
  }
  SUBCASE("relabelling alpha(k) -> conj(alpha(-k)) leaves A unchanged") {
    Eigen::VectorXcd alpha(4);
    alpha << Complex(0.1, 0.2), Complex(-0.3, 0.05), Complex(0.7, -0.1), Complex(0.0, 0.4);
    Eigen::VectorXcd flipped(4);
    for (int m = 0; m < 4; ++m) flipped(m) = std::conj(alpha(3 - m));
    CHECK((reconstruct_A(alpha, grid) - reconstruct_A(flipped, grid)).norm() < 1e-15);
  }
  SUBCASE("3D: field is transverse and the smeared form carries F (2pi)^{3/2}") {
    const auto g3 = build_grid({3, 4, 2 * kPi, 1.5});
    Eigen::VectorXcd alpha(g3.n_modes());
    for (Eigen::Index m = 0; m < alpha.size(); ++m) alpha(m) = Complex(std::sin(1.3 * m), std::cos(0.7 * m));
    CHECK(divergence_residual(alpha, g3) <= 1e-12 * alpha.norm());
    ChargeParams cp;
    cp.custom_values.assign(g3.n_modes(), std::pow(2 * kPi, -1.5));
    const auto flat = charge_preset(ChargeKind::custom, cp, g3);
    CHECK((reconstruct_A(alpha, g3, &flat) - reconstruct_A(alpha, g3)).norm() < 1e-13);
  }
}

TEST_CASE("compute_current") {
  const auto sc = free_1d();
  const auto& grid = sc.grid;
  const VectorField A0 = VectorField::Zero(grid.n_sites(), 1);

  SUBCASE("real phi without field carries no current") {
    Eigen::VectorXcd phi = gaussian_packet(grid, {3.0, 0, 0}, 0.8, {0, 0, 0}).real().cast<Complex>();
    CHECK(compute_current(phi, A0, grid).norm() < 1e-14);
  }
  SUBCASE("plane wave: j = 2 p / V") {
    const auto phi = plane_wave(grid, {2.0, 0, 0});
    const auto j = compute_current(phi, A0, grid);
    for (std::size_t x = 0; x < grid.n_sites(); ++x) CHECK(j(x, 0) == doctest::Approx(2 * 2.0 / grid.volume()));
  }
  SUBCASE("total current equals twice the momentum expectation") {
    Eigen::VectorXcd phi(grid.n_sites());
    for (std::size_t x = 0; x < grid.n_sites(); ++x) phi(x) = Complex(std::cos(0.3 + x), std::sin(1.7 * x * x));
    phi = normalized(phi, grid);
    const auto j = compute_current(phi, A0, grid);
    // Independent evaluation: explicit DFT, sum_p p |phi_hat(p)|^2 with the Nyquist term dropped.
    const int L = 8;
    double momentum = 0.0;
    for (int n = 0; n < L; ++n) {
      const int integer = n < L / 2 ? n : n - L;
      if (integer == -L / 2) continue;
      Complex c = 0;
      for (int x = 0; x < L; ++x) c += std::exp(-kI * double(integer) * grid.site_positions[x][0]) * phi(x);
      momentum += integer * std::norm(c) / L;
    }
    momentum *= grid.cell_volume;
    CHECK(grid.cell_volume * j.col(0).sum() == doctest::Approx(2.0 * momentum).epsilon(1e-12));
  }
}

TEST_CASE("alpha_source") {
  const auto sc = coupled_1d();
  const auto& grid = sc.grid;
  Eigen::VectorXcd alpha(grid.n_modes());
  alpha << Complex(0.1, 0.2), Complex(-0.3, 0.05), Complex(0.7, -0.1), Complex(0.0, 0.4);

  SUBCASE("no current: free rotation") {
    const auto src = alpha_source(VectorField::Zero(grid.n_sites(), 1), alpha, sc.kappa, grid);
    for (std::size_t m = 0; m < grid.n_modes(); ++m)
      CHECK(std::abs(src(m) - grid.retained_modes[m].k_norm * alpha(m)) < 1e-15);
  }
  SUBCASE("constant current only feeds k = 0, which is not retained") {
    const auto src = alpha_source(VectorField::Constant(grid.n_sites(), 1, 0.37), Eigen::VectorXcd::Zero(4), sc.kappa, grid);
    CHECK(src.norm() < 1e-14);
  }
  SUBCASE("central difference of the integrated alpha matches the right-hand side") {
    const auto ctx = sc.ctx();
    EffectiveState s0 = initial_1d(grid);
    double previous = 0;
    for (double dt : {4e-3, 2e-3, 1e-3}) {
      const auto s1 = step(s0, dt, ctx);
      const auto s2 = step(s1, dt, ctx);
      const Eigen::VectorXcd central = (s2.alpha - s0.alpha) / (2 * dt);
      const Eigen::VectorXcd rhs = -kI * alpha_source(compute_current(s1.phi, reconstruct_A(s1.alpha, grid, &sc.kappa), grid),
                                                      s1.alpha, sc.kappa, grid);
      const double residual = (central - rhs).norm();
      // central differencing error is (dt^2 / 6) |alpha'''|, and |alpha'''| stays below ~100 here
      CHECK(residual < 100.0 / 6.0 * dt * dt);
      if (previous > 0) CHECK(previous / residual == doctest::Approx(4.0).epsilon(0.1));
      previous = residual;
    }
  }
}

TEST_CASE("ms_rhs") {
  SUBCASE("decoupled: free Schroedinger and free rotation") {
    const auto sc = free_1d();
    EffectiveState s = initial_1d(sc.grid);
    const auto d = ms_rhs(s, sc.ctx());
    CHECK((d.dphi - (-kI * (sc.grid.kinetic * s.phi))).norm() < 1e-13);
    for (std::size_t m = 0; m < sc.grid.n_modes(); ++m)
      CHECK(std::abs(d.dalpha(m) + kI * sc.grid.retained_modes[m].k_norm * s.alpha(m)) < 1e-15);
  }
  SUBCASE("uniform phi, no field: stationary") {
    const auto sc = free_1d();
    EffectiveState s;
    s.phi = plane_wave(sc.grid, {0, 0, 0});
    s.alpha = Eigen::VectorXcd::Zero(sc.grid.n_modes());
    CHECK(ms_rhs(s, sc.ctx()).dphi.norm() < 1e-14);
  }
  SUBCASE("self-consistent ground state evolves by a pure phase") {
    auto sc = coupled_1d();
    sc.kappa = charge_preset(ChargeKind::none, {}, sc.grid);
    EffectiveState s;
    s.phi = ground_state_iterate(gaussian_packet(sc.grid, {1.0, 0, 0}, 1.0, {0, 0, 0}), sc.grid, sc.v);
    s.alpha = Eigen::VectorXcd::Zero(sc.grid.n_modes());
    const auto d = ms_rhs(s, sc.ctx());
    const Complex mu = kI * s.phi.dot(d.dphi) / s.phi.squaredNorm();
    const Eigen::VectorXcd orthogonal = d.dphi - s.phi * (s.phi.dot(d.dphi) / s.phi.squaredNorm());
    CHECK(l2_norm(orthogonal, sc.grid) <= 1e-8);
    CHECK(std::abs(mu.imag()) < 1e-12);
  }
}

TEST_CASE("step") {
  SUBCASE("free plane wave and free field") {
    const auto sc = free_1d();
    EffectiveState s;
    s.phi = plane_wave(sc.grid, {1.0, 0, 0});
    s.alpha = Eigen::VectorXcd::Constant(sc.grid.n_modes(), Complex(0.3, -0.2));
    const auto initial = s;
    const double dt = 1e-3;
    s = integrate(s, dt, 1000, 0, sc.ctx());
    CHECK((s.phi - std::exp(-kI * 1.0) * initial.phi).norm() < 1e-11);
    for (std::size_t m = 0; m < sc.grid.n_modes(); ++m) {
      const Complex exact = std::exp(-kI * sc.grid.retained_modes[m].k_norm * s.time) * initial.alpha(m);
      CHECK(std::abs(s.alpha(m) - exact) < 1e-12);
    }
  }
  SUBCASE("fourth order: halving dt reduces the error about 16x") {
    const auto sc = coupled_1d();
    const auto ctx = sc.ctx();
    const auto s0 = initial_1d(sc.grid);
    const auto reference = integrate(s0, 1e-3 / 8, 8000, 0, ctx);
    const auto coarse = integrate(s0, 2e-2, 50, 0, ctx);
    const auto fine = integrate(s0, 1e-2, 100, 0, ctx);
    const double e_coarse = (coarse.phi - reference.phi).norm() + (coarse.alpha - reference.alpha).norm();
    const double e_fine = (fine.phi - reference.phi).norm() + (fine.alpha - reference.alpha).norm();
    MESSAGE("Richardson ratio " << e_coarse / e_fine);
    CHECK(e_coarse / e_fine > 12.0);
    CHECK(e_coarse / e_fine < 20.0);
  }
  SUBCASE("time reversal returns to the initial state") {
    const auto sc = coupled_1d();
    const auto ctx = sc.ctx();
    const auto s0 = initial_1d(sc.grid);
    double previous = 0;
    for (double dt : {2e-2, 1e-2}) {
      auto forward = integrate(s0, dt, 10, 0, ctx);
      auto back = integrate(time_reversed(forward, sc.grid), dt, 10, 0, ctx);
      const auto restored = time_reversed(back, sc.grid);
      const double err = (restored.phi - s0.phi).norm() + (restored.alpha - s0.alpha).norm();
      CHECK(err < 1e-4 * std::pow(dt / 2e-2, 4));
      if (previous > 0) CHECK(previous / err > 12.0);
      previous = err;
    }
  }
  SUBCASE("invalid step sizes") {
    const auto sc = coupled_1d();
    const auto s0 = initial_1d(sc.grid);
    CHECK_THROWS_AS(step(s0, 0.0, sc.ctx()), std::invalid_argument);
    CHECK_THROWS_AS(step(s0, 10.0, sc.ctx()), StabilityError);
  }
}

TEST_CASE("ms_energy") {
  SUBCASE("plane wave") {
    const auto sc = free_1d();
    EffectiveState s;
    s.phi = plane_wave(sc.grid, {3.0, 0, 0});
    s.alpha = Eigen::VectorXcd::Zero(sc.grid.n_modes());
    CHECK(ms_energy(s, sc.ctx()) == doctest::Approx(9.0));
  }
  SUBCASE("field term weight |k| |c|^2") {
    const auto sc = free_1d();
    EffectiveState s;
    s.phi = plane_wave(sc.grid, {0, 0, 0});
    s.alpha = Eigen::VectorXcd::Zero(sc.grid.n_modes());
    s.alpha(2) = Complex(0.6, 0.8);
    CHECK(ms_energy(s, sc.ctx()) == doctest::Approx(1.0));
  }
  SUBCASE("conserved along a coupled trajectory") {
    const auto sc = coupled_1d();
    const auto ctx = sc.ctx();
    const auto s0 = initial_1d(sc.grid);
    const double e0 = ms_energy(s0, ctx);
    double worst_e = 0, worst_n = 0;
    integrate(s0, 1e-3, 1000, 10, ctx, [&](const EffectiveState& s) {
      worst_e = std::max(worst_e, std::abs(ms_energy(s, ctx) - e0) / std::abs(e0));
      worst_n = std::max(worst_n, std::abs(l2_norm(s.phi, sc.grid) - 1.0));
    });
    CHECK(worst_e <= 1e-6);
    CHECK(worst_n <= 1e-8);
  }
}

TEST_CASE("energy functional is the generator: d/dt E = 0 along the exact right-hand side") {
  // Directional derivative of E along (dphi, dalpha) by finite differences.
  const auto sc = coupled_1d();
  const auto ctx = sc.ctx();
  const auto s = initial_1d(sc.grid);
  const auto d = ms_rhs(s, ctx);
  const double eps = 1e-6;
  EffectiveState plus = s, minus = s;
  plus.phi += eps * d.dphi;
  plus.alpha += eps * d.dalpha;
  minus.phi -= eps * d.dphi;
  minus.alpha -= eps * d.dalpha;
  const double derivative = (ms_energy(plus, ctx) - ms_energy(minus, ctx)) / (2 * eps);
  CHECK(std::abs(derivative) < 1e-7);
}

TEST_CASE("snapshot layout") {
  const auto sc = coupled_1d();
  const auto s = initial_1d(sc.grid);
  std::stringstream buffer;
  write_ms_snapshot(buffer, s, sc.grid);
  const std::string bytes = buffer.str();
  CHECK(bytes.size() == 4 * 8 + (sc.grid.n_sites() + sc.grid.n_modes()) * 16);
  CHECK(static_cast<unsigned char>(bytes[0]) == 1);
  CHECK(static_cast<unsigned char>(bytes[8]) == 8);
  const auto back = read_ms_snapshot(buffer, sc.grid);
  CHECK((back.phi - s.phi).norm() == 0.0);
  CHECK((back.alpha - s.alpha).norm() == 0.0);
}

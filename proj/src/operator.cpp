#include "mslab/operator.hpp"

#include <algorithm>
#include <random>

namespace mslab {

Eigen::VectorXcd random_unit_vector(std::size_t dimension, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::VectorXcd v(dimension);
  for (auto& z : v) z = Complex(normal(rng), normal(rng));
  return v / v.norm();
}

double OperatorHandle::hermiticity_defect(std::uint64_t seed, int trials) const {
  double worst = 0.0;
  Eigen::VectorXcd Ou(dimension), Ov(dimension);
  for (int t = 0; t < trials; ++t) {
    const auto u = random_unit_vector(dimension, seed + 2 * t);
    const auto v = random_unit_vector(dimension, seed + 2 * t + 1);
    apply(u, Ou);
    apply(v, Ov);
    const double scale = std::max({1.0, Ou.norm(), Ov.norm()});
    worst = std::max(worst, std::abs(u.dot(Ov) - Ou.dot(v)) / scale);
  }
  return worst;
}

bool OperatorHandle::verify_hermitian(std::uint64_t seed, int trials) {
  hermitian = hermiticity_defect(seed, trials) <= 1e-12;
  return hermitian;
}

}  // namespace mslab

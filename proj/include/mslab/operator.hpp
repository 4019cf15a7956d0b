#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "mslab/types.hpp"

namespace mslab {

/// Type-erased linear operator on the truncated many-body space, applied
/// matrix-free. `apply(in, out)` overwrites out.
struct OperatorHandle {
  std::string name;
  std::size_t dimension = 0;
  bool hermitian = false;
  bool particle_symmetric = true;
  std::function<void(const Eigen::VectorXcd&, Eigen::VectorXcd&)> apply;

  Eigen::VectorXcd operator()(const Eigen::VectorXcd& in) const {
    Eigen::VectorXcd out(in.size());
    apply(in, out);
    return out;
  }

  /// Largest |<u, O v> - <O u, v>| over `trials` random unit pairs, scaled by
  /// max(1, |O u| |v|, |u| |O v|).
  double hermiticity_defect(std::uint64_t seed, int trials = 8) const;

  /// Sets `hermitian` iff the random-vector test passes at 1e-12.
  bool verify_hermitian(std::uint64_t seed, int trials = 8);
};

/// Gaussian random vector with unit norm, reproducible for a given seed.
Eigen::VectorXcd random_unit_vector(std::size_t dimension, std::uint64_t seed);

}  // namespace mslab

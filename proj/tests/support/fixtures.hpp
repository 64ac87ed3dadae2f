#pragma once

#include <memory>

#include "mblab/exp_family.hpp"
#include "mblab/rng.hpp"

namespace fixtures {

using mblab::Matrix;
using mblab::Vector;

inline Matrix mat2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

inline Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

/// The sticky two-state chain [[0.9, 0.1], [0.2, 0.8]].
inline Matrix sticky() { return mat2(0.9, 0.1, 0.2, 0.8); }

/// Rank-one generator: IID fair coin flips.
inline Matrix coin() { return mat2(0.5, 0.5, 0.5, 0.5); }

inline Vector bernoulli_rewards() { return vec({0.0, 1.0}); }

inline std::shared_ptr<const mblab::ExpFamily> family(const Matrix& p) {
  return std::make_shared<const mblab::ExpFamily>(mblab::StochasticMatrix(p),
                                                  mblab::RewardFunction(bernoulli_rewards()));
}

/// Random stochastic matrix; each off-diagonal entry is zero with
/// probability `sparsity`, diagonal entries are always positive.
inline Matrix random_stochastic(mblab::Rng& rng, int n, double sparsity = 0.0) {
  Matrix m(n, n);
  for (int x = 0; x < n; ++x) {
    for (int y = 0; y < n; ++y) {
      const bool zero = x != y && rng.uniform() < sparsity;
      m(x, y) = zero ? 0.0 : 0.05 + rng.uniform();
    }
    m.row(x) /= m.row(x).sum();
  }
  return m;
}

inline Vector random_rewards(mblab::Rng& rng, int n) {
  Vector f(n);
  for (int x = 0; x < n; ++x) f(x) = std::floor(rng.uniform() * 5.0) / 4.0;
  f(0) = 0.0;
  f(n - 1) = 1.0;
  return f;
}

}  // namespace fixtures

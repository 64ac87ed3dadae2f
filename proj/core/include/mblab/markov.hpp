#pragma once

#include <Eigen/Dense>
#include <vector>

#include "mblab/rng.hpp"

namespace mblab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Row-stochastic transition kernel on states {0, ..., n-1}, n >= 2.
/// Entries are nonnegative and every row sums to 1 within kRowSumTolerance.
class StochasticMatrix {
 public:
  static constexpr double kRowSumTolerance = 1e-12;

  /// Throws Error(kInvalidArgument) for n < 2 or a non-square input,
  /// Error(kNegativeEntry), or RowSumError naming the first bad row.
  explicit StochasticMatrix(Matrix entries);

  int size() const noexcept { return static_cast<int>(p_.rows()); }
  const Matrix& entries() const noexcept { return p_; }
  double operator()(int x, int y) const { return p_(x, y); }

  bool is_positive() const noexcept { return (p_.array() > 0.0).all(); }

 private:
  Matrix p_;
};

/// Per-state rewards f. Nonconstant, so the argmax set S_M and the argmin
/// set S_m are nonempty and disjoint.
class RewardFunction {
 public:
  explicit RewardFunction(Vector values);
  RewardFunction(std::initializer_list<double> values);

  int size() const noexcept { return static_cast<int>(values_.size()); }
  const Vector& values() const noexcept { return values_; }
  double operator()(int x) const { return values_(x); }

  double max() const noexcept { return max_; }
  double min() const noexcept { return min_; }
  const std::vector<int>& argmax_set() const noexcept { return argmax_; }
  const std::vector<int>& argmin_set() const noexcept { return argmin_; }

  /// The reflected rewards -f.
  RewardFunction negated() const { return RewardFunction(Vector(-values_)); }

 private:
  Vector values_;
  double max_ = 0.0;
  double min_ = 0.0;
  std::vector<int> argmax_;
  std::vector<int> argmin_;
};

/// Visited states x_0, ..., x_t.
struct Trajectory {
  std::vector<int> states;

  int steps() const noexcept { return static_cast<int>(states.size()) - 1; }

  /// N(x, y, 0, t): number of observed transitions x -> y.
  Matrix pair_counts(int n) const;
};

/// Perron-Frobenius eigenvalue with left eigenvector u (sum u = 1) and
/// right eigenvector v (sum u.v = 1).
struct PerronFrobeniusTriple {
  double rho = 0.0;
  Vector left;
  Vector right;
};

/// The four structural conditions a generator must meet together with f.
struct GeneratorReport {
  bool max_block_irreducible = false;  // P restricted to S_M irreducible
  bool enters_max_set = false;         // every x outside S_M has an edge into S_M
  bool min_block_irreducible = false;  // P restricted to S_m irreducible
  bool enters_min_set = false;         // every x outside S_m has an edge into S_m

  bool passed() const noexcept {
    return max_block_irreducible && enters_max_set && min_block_irreducible &&
           enters_min_set;
  }
};

/// Strong connectivity of the support graph {(x, y) : m(x, y) > 0}.
/// A 1x1 matrix counts as irreducible iff its entry is positive.
bool is_irreducible(const Matrix& m);
bool is_irreducible(const StochasticMatrix& p);

/// Throws Error(kNotIrreducible) if p is reducible.
GeneratorReport check_generator(const StochasticMatrix& p, const RewardFunction& f);

/// Unique stationary distribution, from a direct linear solve of
/// (P^T - I) pi = 0 with one equation replaced by sum(pi) = 1.
Vector stationary_distribution(const StochasticMatrix& p);

/// Perron-Frobenius triple of a nonnegative matrix that is either
/// irreducible or of the block form [[A, 0], [B, 0]] (up to a permutation)
/// with A irreducible and no zero row in B. In the block case u vanishes
/// outside A and v stays strictly positive.
///
/// Throws Error(kStructureUnsupported) for any other shape and
/// NoConvergenceError if the residual does not reach 1e-10 * rho.
PerronFrobeniusTriple perron_frobenius(const Matrix& m);

/// Draws the successor of `state` under p.
int next_state(const StochasticMatrix& p, int state, Rng& rng);

/// Draws an index from the probability vector q.
int sample_from(const Vector& q, Rng& rng);

/// Trajectory of length steps + 1 with x_0 ~ q.
Trajectory simulate(const StochasticMatrix& p, const Vector& q, int steps, Rng& rng);

/// Expected first return time to the (random) initial state,
/// R = sum_x q(x) / pi(x).
double mean_return_time(const StochasticMatrix& p, const Vector& q);

/// Throws Error(kInvalidArgument) unless q is a probability vector of size n.
void require_distribution(const Vector& q, int n, const char* what);

}  // namespace mblab

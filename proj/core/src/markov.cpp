#include "mblab/markov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mblab/error.hpp"

namespace mblab {

StochasticMatrix::StochasticMatrix(Matrix entries) : p_(std::move(entries)) {
  if (p_.rows() != p_.cols()) {
    throw Error(ErrorCode::kInvalidArgument, "transition matrix must be square");
  }
  if (p_.rows() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "transition matrix needs at least 2 states");
  }
  const int n = size();
  for (int x = 0; x < n; ++x) {
    for (int y = 0; y < n; ++y) {
      const double v = p_(x, y);
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::kInvalidArgument,
                    "non-finite transition probability at row " + std::to_string(x));
      }
      if (v < 0.0) {
        throw Error(ErrorCode::kNegativeEntry,
                    "negative transition probability at (" + std::to_string(x) + ", " +
                        std::to_string(y) + ")");
      }
    }
    const double deviation = p_.row(x).sum() - 1.0;
    if (std::abs(deviation) > kRowSumTolerance) throw RowSumError(x, deviation);
  }
}

RewardFunction::RewardFunction(Vector values) : values_(std::move(values)) {
  if (values_.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "reward function needs at least 2 states");
  }
  if (!values_.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "rewards must be finite");
  }
  max_ = values_.maxCoeff();
  min_ = values_.minCoeff();
  if (!(max_ > min_)) {
    throw Error(ErrorCode::kInvalidArgument, "reward function must be nonconstant");
  }
  for (int x = 0; x < size(); ++x) {
    if (values_(x) == max_) argmax_.push_back(x);
    if (values_(x) == min_) argmin_.push_back(x);
  }
}

RewardFunction::RewardFunction(std::initializer_list<double> values)
    : RewardFunction(Vector(Eigen::Map<const Vector>(values.begin(),
                                                     static_cast<Eigen::Index>(values.size())))) {}

Matrix Trajectory::pair_counts(int n) const {
  Matrix counts = Matrix::Zero(n, n);
  for (std::size_t s = 0; s + 1 < states.size(); ++s) counts(states[s], states[s + 1]) += 1.0;
  return counts;
}

namespace {

// Reachability from `start` along positive entries, restricted to `members`.
std::vector<char> reachable(const Matrix& m, int start, bool transpose) {
  const int n = static_cast<int>(m.rows());
  std::vector<char> seen(n, 0);
  std::vector<int> stack{start};
  seen[start] = 1;
  while (!stack.empty()) {
    const int x = stack.back();
    stack.pop_back();
    for (int y = 0; y < n; ++y) {
      const double w = transpose ? m(y, x) : m(x, y);
      if (w > 0.0 && !seen[y]) {
        seen[y] = 1;
        stack.push_back(y);
      }
    }
  }
  return seen;
}

Matrix submatrix(const Matrix& m, const std::vector<int>& idx) {
  const int k = static_cast<int>(idx.size());
  Matrix out(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) out(i, j) = m(idx[i], idx[j]);
  return out;
}

bool enters(const Matrix& m, const std::vector<int>& target) {
  const int n = static_cast<int>(m.rows());
  std::vector<char> in_target(n, 0);
  for (int y : target) in_target[y] = 1;
  for (int x = 0; x < n; ++x) {
    if (in_target[x]) continue;
    bool found = false;
    for (int y : target) found = found || m(x, y) > 0.0;
    if (!found) return false;
  }
  return true;
}

// Perron root and eigenvectors of an irreducible nonnegative block.
//
// Shifted inverse iteration: for a positive vector v the Collatz-Wielandt
// ratios (Av)_i / v_i bracket rho, and the upper end sigma >= rho is closer
// to rho than to any other eigenvalue, so (sigma I - A)^{-1} v stays
// positive and converges to the Perron vector.
Vector perron_vector(const Matrix& a, double& lo, double& hi) {
  const int k = static_cast<int>(a.rows());
  const double eps = std::numeric_limits<double>::epsilon();
  Vector v = Vector::Ones(k);
  Vector w(k);
  for (int it = 0; it < 200; ++it) {
    w.noalias() = a * v;
    lo = std::numeric_limits<double>::infinity();
    hi = 0.0;
    for (int i = 0; i < k; ++i) {
      const double r = w(i) / v(i);
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    if (hi - lo <= 8.0 * k * eps * hi) break;
    // hi bounds rho only up to rounding; nudge it so the shift stays above rho.
    Matrix shifted = -a;
    shifted.diagonal().array() += hi * (1.0 + 16.0 * k * eps);
    Vector x = shifted.partialPivLu().solve(v);
    if (!x.allFinite() || (x.array() <= 0.0).any()) break;
    v = x / x.maxCoeff();
  }
  return v;
}

PerronFrobeniusTriple irreducible_block(const Matrix& a) {
  const int k = static_cast<int>(a.rows());
  PerronFrobeniusTriple t;
  if (k == 1) {
    t.rho = a(0, 0);
    t.left = Vector::Ones(1);
    t.right = Vector::Ones(1);
    return t;
  }
  double lo_v = 0.0, hi_v = 0.0, lo_u = 0.0, hi_u = 0.0;
  Vector v = perron_vector(a, lo_v, hi_v);
  Vector u = perron_vector(a.transpose(), lo_u, hi_u);
  u /= u.sum();
  double rho = u.dot(a * v) / u.dot(v);
  rho = std::clamp(rho, std::max(lo_v, lo_u), std::min(hi_v, hi_u));
  t.rho = rho;
  t.left = std::move(u);
  t.right = std::move(v);
  return t;
}

}  // namespace

bool is_irreducible(const Matrix& m) {
  const int n = static_cast<int>(m.rows());
  if (n == 0) return false;
  if (n == 1) return m(0, 0) > 0.0;
  const auto fwd = reachable(m, 0, false);
  const auto bwd = reachable(m, 0, true);
  return std::all_of(fwd.begin(), fwd.end(), [](char c) { return c != 0; }) &&
         std::all_of(bwd.begin(), bwd.end(), [](char c) { return c != 0; });
}

bool is_irreducible(const StochasticMatrix& p) { return is_irreducible(p.entries()); }

GeneratorReport check_generator(const StochasticMatrix& p, const RewardFunction& f) {
  if (f.size() != p.size()) {
    throw Error(ErrorCode::kInvalidArgument, "reward vector length differs from state count");
  }
  if (!is_irreducible(p)) {
    throw Error(ErrorCode::kNotIrreducible, "generator matrix is not irreducible");
  }
  const Matrix& m = p.entries();
  GeneratorReport r;
  r.max_block_irreducible = is_irreducible(submatrix(m, f.argmax_set()));
  r.enters_max_set = enters(m, f.argmax_set());
  r.min_block_irreducible = is_irreducible(submatrix(m, f.argmin_set()));
  r.enters_min_set = enters(m, f.argmin_set());
  return r;
}

Vector stationary_distribution(const StochasticMatrix& p) {
  if (!is_irreducible(p)) {
    throw Error(ErrorCode::kNotIrreducible, "stationary distribution needs an irreducible chain");
  }
  const int n = p.size();
  Matrix system = p.entries().transpose() - Matrix::Identity(n, n);
  system.row(n - 1).setOnes();
  Vector rhs = Vector::Zero(n);
  rhs(n - 1) = 1.0;
  Vector pi = system.fullPivLu().solve(rhs);
  pi = pi.cwiseMax(0.0);
  return pi / pi.sum();
}

PerronFrobeniusTriple perron_frobenius(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw Error(ErrorCode::kInvalidArgument, "Perron-Frobenius needs a square matrix");
  }
  if (!m.allFinite() || (m.array() < 0.0).any()) {
    throw Error(ErrorCode::kInvalidArgument, "Perron-Frobenius needs a finite nonnegative matrix");
  }
  const int n = static_cast<int>(m.rows());

  std::vector<int> block;
  std::vector<int> rest;
  if (is_irreducible(m)) {
    for (int x = 0; x < n; ++x) block.push_back(x);
  } else {
    for (int y = 0; y < n; ++y) {
      (m.col(y).array() > 0.0).any() ? block.push_back(y) : rest.push_back(y);
    }
    const bool shaped = !block.empty() && !rest.empty() &&
                        is_irreducible(submatrix(m, block)) && enters(m, block);
    if (!shaped) {
      throw Error(ErrorCode::kStructureUnsupported,
                  "matrix is neither irreducible nor of the [[A,0],[B,0]] form");
    }
  }

  PerronFrobeniusTriple inner =
      irreducible_block(rest.empty() ? m : submatrix(m, block));
  if (!(inner.rho > 0.0)) {
    throw Error(ErrorCode::kStructureUnsupported, "Perron-Frobenius eigenvalue is zero");
  }

  PerronFrobeniusTriple t;
  t.rho = inner.rho;
  t.left = Vector::Zero(n);
  t.right = Vector::Zero(n);
  const int k = static_cast<int>(block.size());
  for (int i = 0; i < k; ++i) {
    t.left(block[i]) = inner.left(i);
    t.right(block[i]) = inner.right(i);
  }
  for (int x : rest) {
    double s = 0.0;
    for (int i = 0; i < k; ++i) s += m(x, block[i]) * inner.right(i);
    t.right(x) = s / t.rho;
  }
  t.left /= t.left.sum();
  t.right /= t.left.dot(t.right);

  const double scale = t.right.cwiseAbs().maxCoeff();
  const double res_v = (m * t.right - t.rho * t.right).cwiseAbs().maxCoeff() / scale;
  const double res_u =
      (m.transpose() * t.left - t.rho * t.left).cwiseAbs().maxCoeff() / t.left.maxCoeff();
  const double residual = std::max(res_v, res_u);
  if (!(residual <= 1e-10 * t.rho)) {
    throw NoConvergenceError("Perron-Frobenius iteration did not converge", residual);
  }
  return t;
}

namespace {

int sample_row(const double* probs, int n, int stride, double u) {
  double cumulative = 0.0;
  int last_positive = -1;
  for (int y = 0; y < n; ++y) {
    const double w = probs[static_cast<std::ptrdiff_t>(y) * stride];
    if (w <= 0.0) continue;
    cumulative += w;
    last_positive = y;
    if (u < cumulative) return y;
  }
  return last_positive;
}

}  // namespace

int next_state(const StochasticMatrix& p, int state, Rng& rng) {
  const Matrix& m = p.entries();
  // Column-major storage: row `state` has stride rows().
  return sample_row(m.data() + state, p.size(), static_cast<int>(m.rows()), rng.uniform());
}

int sample_from(const Vector& q, Rng& rng) {
  return sample_row(q.data(), static_cast<int>(q.size()), 1, rng.uniform());
}

void require_distribution(const Vector& q, int n, const char* what) {
  if (q.size() != n) {
    throw Error(ErrorCode::kInvalidArgument, std::string(what) + " has the wrong length");
  }
  if (!q.allFinite() || (q.array() < 0.0).any() || std::abs(q.sum() - 1.0) > 1e-12) {
    throw Error(ErrorCode::kInvalidArgument, std::string(what) + " is not a probability vector");
  }
}

Trajectory simulate(const StochasticMatrix& p, const Vector& q, int steps, Rng& rng) {
  require_distribution(q, p.size(), "initial distribution");
  if (steps < 0) throw Error(ErrorCode::kInvalidArgument, "steps must be nonnegative");
  Trajectory traj;
  traj.states.reserve(static_cast<std::size_t>(steps) + 1);
  int x = sample_from(q, rng);
  traj.states.push_back(x);
  for (int s = 0; s < steps; ++s) {
    x = next_state(p, x, rng);
    traj.states.push_back(x);
  }
  return traj;
}

double mean_return_time(const StochasticMatrix& p, const Vector& q) {
  require_distribution(q, p.size(), "initial distribution");
  const Vector pi = stationary_distribution(p);
  double r = 0.0;
  for (int x = 0; x < p.size(); ++x) {
    if (q(x) > 0.0) r += q(x) / pi(x);
  }
  return r;
}

}  // namespace mblab

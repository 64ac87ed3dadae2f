#include "mblab/concentration.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "mblab/error.hpp"

namespace mblab {

namespace {

constexpr long long kMaxCells = 10'000'000;

void require_steps(int n) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "n must be at least 1");
}

bool near_integer(double x, double& rounded) {
  rounded = std::round(x);
  return std::abs(x - rounded) <= 1e-9 * std::max(1.0, std::abs(x));
}

double bound_at(const ExpFamily& family, double theta, int n, double mu) {
  const ThetaPoint centre = family.evaluate(theta);
  const double kl = ExpFamily::divergence(family.point_from_mean(mu), centre);
  const double c = family.ratio_constant();
  return c * c * std::exp(-static_cast<double>(n) * kl);
}

}  // namespace

double log_mgf_n(const ExpFamily& family, double theta_member, double eta, int n,
                 const Vector& q) {
  require_steps(n);
  require_distribution(q, family.size(), "initial distribution");
  const FamilyMember m = family.member(theta_member);
  const RewardFunction& f = family.rewards();
  const double shift = eta > 0.0 ? f.max() : (eta < 0.0 ? f.min() : 0.0);
  Matrix tilted = m.kernel.entries();
  for (int y = 0; y < family.size(); ++y) tilted.col(y) *= std::exp(eta * (f(y) - shift));

  Eigen::RowVectorXd r = q.transpose();
  double log_total = 0.0;
  for (int k = 0; k < n; ++k) {
    r = r * tilted;
    const double s = r.sum();
    log_total += std::log(s) + eta * shift;
    r /= s;
  }
  return log_total / n;
}

double tail_bound(const ExpFamily& family, double theta, int n, double mu) {
  require_steps(n);
  const double centre = family.mean(theta);
  if (mu < centre || mu > family.max_reward()) {
    throw Error(ErrorCode::kMeanOutOfRange, "upper-tail level must lie in [mu(theta), M]");
  }
  return bound_at(family, theta, n, mu);
}

double tail_bound_lower(const ExpFamily& family, double theta, int n, double mu) {
  require_steps(n);
  const double centre = family.mean(theta);
  if (mu > centre || mu < family.min_reward()) {
    throw Error(ErrorCode::kMeanOutOfRange, "lower-tail level must lie in [m, mu(theta)]");
  }
  return bound_at(family, theta, n, mu);
}

int lattice_denominator(const Vector& values, int max_denominator) {
  for (int d = 1; d <= max_denominator; ++d) {
    bool ok = true;
    for (Eigen::Index i = 0; i < values.size() && ok; ++i) {
      double r = 0.0;
      ok = near_integer(values(i) * d, r);
    }
    if (ok) return d;
  }
  return 0;
}

double exact_tail(const ExpFamily& family, double theta, int n, double mu, const Vector& q,
                  Tail tail) {
  require_steps(n);
  require_distribution(q, family.size(), "initial distribution");
  const Vector& f = family.rewards().values();
  const int d = lattice_denominator(f);
  if (d == 0) {
    throw Error(ErrorCode::kRewardsNotLatticed, "rewards are not on a grid with denominator <= 1e4");
  }
  const int states = family.size();
  std::vector<long long> k(states);
  for (int x = 0; x < states; ++x) k[x] = std::llround(f(x) * d);
  const long long kmin = *std::min_element(k.begin(), k.end());
  const long long kmax = *std::max_element(k.begin(), k.end());
  const long long width = static_cast<long long>(n) * (kmax - kmin) + 1;
  if (width * states > kMaxCells) {
    throw Error(ErrorCode::kStateSpaceTooLarge, "exact tail lattice exceeds 1e7 cells");
  }

  // Event sum_i k(X_i) >= n mu d (upper) or <= n mu d (lower), on the grid.
  const double target = static_cast<double>(n) * mu * d;
  double rounded = 0.0;
  long long threshold = 0;
  if (near_integer(target, rounded)) {
    threshold = static_cast<long long>(rounded);
  } else {
    threshold = static_cast<long long>(tail == Tail::kUpper ? std::ceil(target) : std::floor(target));
  }
  threshold -= static_cast<long long>(n) * kmin;

  const Matrix kernel = family.member(theta).kernel.entries();
  std::vector<double> cur(static_cast<std::size_t>(states * width), 0.0);
  std::vector<double> next(cur.size());
  auto at = [width](int x, long long s) { return static_cast<std::size_t>(x * width + s); };
  for (int x = 0; x < states; ++x) cur[at(x, 0)] = q(x);
  for (int step = 0; step < n; ++step) {
    std::fill(next.begin(), next.end(), 0.0);
    const long long reach = static_cast<long long>(step) * (kmax - kmin);
    for (int x = 0; x < states; ++x) {
      for (long long s = 0; s <= reach; ++s) {
        const double mass = cur[at(x, s)];
        if (mass == 0.0) continue;
        for (int y = 0; y < states; ++y) {
          const double p = kernel(x, y);
          if (p > 0.0) next[at(y, s + k[y] - kmin)] += mass * p;
        }
      }
    }
    cur.swap(next);
  }
  double prob = 0.0;
  for (int x = 0; x < states; ++x) {
    for (long long s = 0; s < width; ++s) {
      const bool hit = tail == Tail::kUpper ? s >= threshold : s <= threshold;
      if (hit) prob += cur[at(x, s)];
    }
  }
  return std::min(prob, 1.0);
}

TailEstimate mc_tail(const ExpFamily& family, double theta, int n, double mu, int reps,
                     std::uint64_t seed) {
  return mc_tail(family, theta, n, mu, reps, seed, family.initial_distribution());
}

TailEstimate mc_tail(const ExpFamily& family, double theta, int n, double mu, int reps,
                     std::uint64_t seed, const Vector& q) {
  require_steps(n);
  if (reps < 1) throw Error(ErrorCode::kInvalidArgument, "reps must be at least 1");
  require_distribution(q, family.size(), "initial distribution");
  const FamilyMember m = family.member(theta);
  const Vector& f = family.rewards().values();
  const double level = static_cast<double>(n) * mu;
  const double slack = 1e-9 * std::max(1.0, std::abs(level));
  long long hits = 0;
  for (int i = 0; i < reps; ++i) {
    Rng rng(derive_seed(seed, "mc_tail", static_cast<std::uint64_t>(i)));
    int x = sample_from(q, rng);
    double sum = 0.0;
    for (int s = 0; s < n; ++s) {
      x = next_state(m.kernel, x, rng);
      sum += f(x);
    }
    if (sum >= level - slack) ++hits;
  }
  TailEstimate est;
  est.estimate = static_cast<double>(hits) / reps;
  est.std_error = std::sqrt(est.estimate * (1.0 - est.estimate) / reps);
  return est;
}

}  // namespace mblab

#pragma once

#include <cstdint>

#include "mblab/exp_family.hpp"

namespace mblab {

enum class Tail { kUpper, kLower };

/// (1/n) log E exp(eta (f(X_1) + ... + f(X_n))) for the chain driven by
/// P_{theta_member} started from q, computed exactly with n rescaled
/// vector-matrix products.
double log_mgf_n(const ExpFamily& family, double theta_member, double eta, int n,
                 const Vector& q);

/// C^2 exp(-n KL(mu || mu(theta))) bounding Pr(f(X_1)+...+f(X_n) >= n mu)
/// for mu in [mu(theta), M]. The raw value is returned, it may exceed 1.
double tail_bound(const ExpFamily& family, double theta, int n, double mu);

/// Lower-tail counterpart for Pr(sum <= n mu), mu in [m, mu(theta)].
double tail_bound_lower(const ExpFamily& family, double theta, int n, double mu);

/// Exact Pr(f(X_1)+...+f(X_n) >= n mu) (or <= for the lower tail) under
/// P_theta with X_0 ~ q, by dynamic programming over (state, integer sum).
///
/// Rewards must sit on a common grid k/d with d <= 10^4; the threshold is
/// compared exactly on that grid. Throws Error(kRewardsNotLatticed) or
/// Error(kStateSpaceTooLarge) beyond 10^7 DP cells.
double exact_tail(const ExpFamily& family, double theta, int n, double mu, const Vector& q,
                  Tail tail = Tail::kUpper);

struct TailEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

/// Monte-Carlo frequency of the upper-tail event over `reps` trajectories
/// started from the family's initial distribution. Replication i draws from
/// the stream derive_seed(seed, "mc_tail", i).
TailEstimate mc_tail(const ExpFamily& family, double theta, int n, double mu, int reps,
                     std::uint64_t seed);
TailEstimate mc_tail(const ExpFamily& family, double theta, int n, double mu, int reps,
                     std::uint64_t seed, const Vector& q);

/// Smallest d <= max_denominator with every f(x) * d an integer (within
/// 1e-9), or 0 if there is none.
int lattice_denominator(const Vector& values, int max_denominator = 10000);

}  // namespace mblab

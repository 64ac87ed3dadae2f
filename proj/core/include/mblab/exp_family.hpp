#pragma once

#include <memory>
#include <optional>

#include "mblab/markov.hpp"

namespace mblab {

/// Scalar summary of the family at one canonical parameter.
///
/// The log-PF eigenvalue is kept split as A(theta) = theta * shift + log_rho_scaled,
/// with shift = M for theta > 0, m for theta < 0 and 0 at theta = 0, so that
/// theta * mean - A(theta) stays accurate for large |theta|. At theta = +/-inf
/// the point describes the limit member: mean = M (resp. m) and dual equals
/// -log rho(Pbar_{+/-inf}).
struct ThetaPoint {
  double theta = 0.0;
  double shift = 0.0;
  double log_rho_scaled = 0.0;
  double mean = 0.0;
  double dual = 0.0;  // theta * mean - A(theta)

  double log_pf() const noexcept { return theta * shift + log_rho_scaled; }
};

/// Snapshot of the stochastic member P_theta.
struct FamilyMember {
  double theta = 0.0;
  double rho = 1.0;     // exp(log_pf); may overflow to +inf for very large theta
  double log_pf = 0.0;  // A(theta)
  Vector left;          // u_theta
  Vector right;         // v_theta
  StochasticMatrix kernel;
  Vector stationary;    // pi_theta = u_theta .* v_theta
  double mean = 0.0;    // mu(theta) = pi_theta . f
};

/// Limit of P_theta as theta -> +inf (sign = +1) or -inf (sign = -1).
struct LimitMember {
  int sign = 1;
  double rho_bar = 0.0;  // rho(Pbar_{+/-inf})
  StochasticMatrix kernel;
  Vector left;
  Vector right;
};

/// One-parameter exponential family of Markov chains generated by (P, f).
///
/// Construction checks the four generator conditions and computes the
/// eigenvector-ratio constant C(P, f). For a strictly positive P the constant
/// is max_{x,y,z} P(y,z)/P(x,z); otherwise it is the largest ratio
/// max v_theta / min v_theta over |theta| in {0, 0.25, ..., 64} and the two
/// limit eigenvectors, inflated by kRatioSafetyFactor and flagged approximate.
///
/// Immutable apart from a synchronised member cache; safe to share.
class ExpFamily {
 public:
  static constexpr double kRatioSafetyFactor = 1.05;

  ExpFamily(StochasticMatrix generator, RewardFunction rewards);
  ExpFamily(StochasticMatrix generator, RewardFunction rewards, Vector initial);

  const StochasticMatrix& generator() const noexcept { return p_; }
  const RewardFunction& rewards() const noexcept { return f_; }
  const Vector& initial_distribution() const noexcept { return q_; }
  int size() const noexcept { return p_.size(); }
  double max_reward() const noexcept { return f_.max(); }
  double min_reward() const noexcept { return f_.min(); }

  double ratio_constant() const noexcept { return c_; }
  bool ratio_constant_is_exact() const noexcept { return c_exact_; }

  /// P(x, y) * exp(theta * f(y)). Throws Error(kOverflow) when
  /// |theta| * max|f| > 600; use evaluate() / member() for such theta.
  Matrix tilted(double theta) const;

  /// Tilt rescaled by exp(-theta * shift) (entries never overflow).
  Matrix tilted_scaled(double theta, double& shift) const;

  ThetaPoint evaluate(double theta) const;
  FamilyMember member(double theta) const;
  double log_pf(double theta) const { return evaluate(theta).log_pf(); }
  double mean(double theta) const { return evaluate(theta).mean; }

  /// Inverse of the mean map on the open interval (m, M); Error(kMeanOutOfRange)
  /// outside it.
  double theta_from_mean(double mu) const;

  /// ThetaPoint whose mean is mu; mu in [m, M], boundaries map to +/-inf.
  ThetaPoint point_from_mean(double mu) const;

  /// Sum_{x,y} pi_1(x) P_1(x,y) log(P_1(x,y) / P_2(x,y)).
  double kl_rate_def(double theta1, double theta2) const;
  /// theta1 * mu(theta1) - A(theta1) - (theta2 * mu(theta1) - A(theta2));
  /// theta1 may be +/-inf.
  double kl_rate_theta(double theta1, double theta2) const;
  /// Divergence rate between the members with means mu1 in [m, M] and
  /// mu2 in (m, M).
  double kl_rate_mean(double mu1, double mu2) const;
  /// sup_theta {theta * mu - A(theta)} for mu in [m, M].
  double conjugate(double mu) const;

  /// KL rate between two evaluated points; `from` may be a limit point.
  static double divergence(const ThetaPoint& from, const ThetaPoint& to) noexcept;

  const LimitMember& limit_member(int sign) const { return sign > 0 ? upper_ : lower_; }

  /// The family generated by (P_theta, f) with the same initial distribution.
  ExpFamily regenerated(double theta) const;

 private:
  struct MemberCache;

  LimitMember build_limit(int sign) const;
  void compute_ratio_constant();
  void require_mean(double mu, bool allow_boundary) const;

  StochasticMatrix p_;
  RewardFunction f_;
  Vector q_;
  LimitMember upper_;
  LimitMember lower_;
  double c_ = 1.0;
  bool c_exact_ = true;
  std::shared_ptr<MemberCache> cache_;
};

}  // namespace mblab

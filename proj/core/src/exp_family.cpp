#include "mblab/exp_family.hpp"

#include <algorithm>
#include <bit>
#include <boost/math/tools/toms748_solve.hpp>
#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <unordered_map>

#include "mblab/error.hpp"

namespace mblab {

struct ExpFamily::MemberCache {
  static constexpr std::size_t kCapacity = 4096;
  std::mutex mutex;
  std::unordered_map<std::uint64_t, std::shared_ptr<const FamilyMember>> entries;
};

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vector uniform(int n) { return Vector::Constant(n, 1.0 / n); }

// Rows of x -> a(x, y) v(y), normalised to sum to one.
Matrix doob_transform(const Matrix& a, const Vector& v) {
  Matrix k = a * v.asDiagonal();
  for (int x = 0; x < k.rows(); ++x) k.row(x) /= k.row(x).sum();
  return k;
}

double max_entry_ratio(const Matrix& p) {
  double c = 1.0;
  const int n = static_cast<int>(p.rows());
  for (int z = 0; z < n; ++z) {
    const double hi = p.col(z).maxCoeff();
    const double lo = p.col(z).minCoeff();
    c = std::max(c, hi / lo);
  }
  return c;
}

double vector_ratio(const Vector& v) { return v.maxCoeff() / v.minCoeff(); }

}  // namespace

ExpFamily::ExpFamily(StochasticMatrix generator, RewardFunction rewards)
    : ExpFamily(generator, std::move(rewards), uniform(generator.size())) {}

ExpFamily::ExpFamily(StochasticMatrix generator, RewardFunction rewards, Vector initial)
    : p_(std::move(generator)),
      f_(std::move(rewards)),
      q_(std::move(initial)),
      upper_(build_limit(+1)),
      lower_(build_limit(-1)),
      cache_(std::make_shared<MemberCache>()) {
  compute_ratio_constant();
}

LimitMember ExpFamily::build_limit(int sign) const {
  const GeneratorReport report = check_generator(p_, f_);
  if (!report.passed()) {
    throw Error(ErrorCode::kGeneratorConditions,
                "generator violates the extreme-reward conditions (S_M/S_m block "
                "irreducibility or entry edges)");
  }
  require_distribution(q_, p_.size(), "initial distribution");
  if ((q_.array() <= 0.0).any()) {
    throw Error(ErrorCode::kInvalidArgument, "family initial distribution must be positive");
  }
  const auto& keep = sign > 0 ? f_.argmax_set() : f_.argmin_set();
  Matrix bar = Matrix::Zero(size(), size());
  for (int y : keep) bar.col(y) = p_.entries().col(y);
  PerronFrobeniusTriple t = perron_frobenius(bar);
  return LimitMember{sign, t.rho, StochasticMatrix(doob_transform(bar, t.right)),
                     std::move(t.left), std::move(t.right)};
}

void ExpFamily::compute_ratio_constant() {
  if (p_.is_positive()) {
    c_ = max_entry_ratio(p_.entries());
    c_exact_ = true;
    return;
  }
  double c = std::max(vector_ratio(upper_.right), vector_ratio(lower_.right));
  for (double mag : {0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0}) {
    for (double s : {1.0, -1.0}) {
      double shift = 0.0;
      const PerronFrobeniusTriple t = perron_frobenius(tilted_scaled(s * mag, shift));
      c = std::max(c, vector_ratio(t.right));
    }
  }
  c_ = kRatioSafetyFactor * c;
  c_exact_ = false;
}

Matrix ExpFamily::tilted(double theta) const {
  const double fmax = std::max(std::abs(f_.max()), std::abs(f_.min()));
  if (std::abs(theta) * fmax > 600.0) {
    throw Error(ErrorCode::kOverflow, "tilted matrix would overflow; use the rescaled form");
  }
  Matrix t = p_.entries();
  for (int y = 0; y < size(); ++y) t.col(y) *= std::exp(theta * f_(y));
  return t;
}

Matrix ExpFamily::tilted_scaled(double theta, double& shift) const {
  shift = theta > 0.0 ? f_.max() : (theta < 0.0 ? f_.min() : 0.0);
  Matrix t = p_.entries();
  if (theta == 0.0) return t;
  for (int y = 0; y < size(); ++y) t.col(y) *= std::exp(theta * (f_(y) - shift));
  return t;
}

ThetaPoint ExpFamily::evaluate(double theta) const {
  if (std::isnan(theta)) throw Error(ErrorCode::kInvalidArgument, "theta is NaN");
  ThetaPoint pt;
  pt.theta = theta;
  if (std::isinf(theta)) {
    const LimitMember& lim = limit_member(theta > 0 ? +1 : -1);
    pt.shift = theta > 0 ? f_.max() : f_.min();
    pt.log_rho_scaled = std::log(lim.rho_bar);
    pt.mean = pt.shift;
    pt.dual = -pt.log_rho_scaled;
    return pt;
  }
  const PerronFrobeniusTriple t = perron_frobenius(tilted_scaled(theta, pt.shift));
  pt.log_rho_scaled = std::log(t.rho);
  const Vector pi = t.left.cwiseProduct(t.right);
  pt.mean = pi.dot(f_.values()) / pi.sum();
  pt.dual = theta * (pt.mean - pt.shift) - pt.log_rho_scaled;
  return pt;
}

FamilyMember ExpFamily::member(double theta) const {
  if (!std::isfinite(theta)) {
    throw Error(ErrorCode::kInvalidArgument, "member() needs a finite theta; see limit_member()");
  }
  const auto key = std::bit_cast<std::uint64_t>(theta);
  {
    std::lock_guard lock(cache_->mutex);
    auto it = cache_->entries.find(key);
    if (it != cache_->entries.end()) return *it->second;
  }
  double shift = 0.0;
  const Matrix scaled = tilted_scaled(theta, shift);
  PerronFrobeniusTriple t = perron_frobenius(scaled);
  Vector pi = t.left.cwiseProduct(t.right);
  pi /= pi.sum();
  const double log_pf = theta * shift + std::log(t.rho);
  StochasticMatrix kernel(theta == 0.0 ? p_.entries() : doob_transform(scaled, t.right));
  auto m = std::make_shared<const FamilyMember>(FamilyMember{
      theta, std::exp(log_pf), log_pf, std::move(t.left), std::move(t.right), std::move(kernel),
      pi, pi.dot(f_.values())});
  std::lock_guard lock(cache_->mutex);
  if (cache_->entries.size() >= MemberCache::kCapacity) cache_->entries.clear();
  cache_->entries.insert_or_assign(key, m);
  return *m;
}

void ExpFamily::require_mean(double mu, bool allow_boundary) const {
  const bool ok = allow_boundary ? (mu >= f_.min() && mu <= f_.max())
                                 : (mu > f_.min() && mu < f_.max());
  if (!ok) {
    throw Error(ErrorCode::kMeanOutOfRange,
                "mean " + std::to_string(mu) + " outside " + (allow_boundary ? "[" : "(") +
                    std::to_string(f_.min()) + ", " + std::to_string(f_.max()) +
                    (allow_boundary ? "]" : ")"));
  }
}

double ExpFamily::theta_from_mean(double mu) const {
  require_mean(mu, false);
  return point_from_mean(mu).theta;
}

ThetaPoint ExpFamily::point_from_mean(double mu) const {
  require_mean(mu, true);
  if (mu == f_.max()) return evaluate(kInf);
  if (mu == f_.min()) return evaluate(-kInf);

  constexpr double kMeanTolerance = 1e-13;
  ThetaPoint best = evaluate(0.0);
  double best_gap = std::abs(best.mean - mu);
  if (best_gap <= kMeanTolerance) return best;

  auto gap = [&](double theta) {
    const ThetaPoint pt = evaluate(theta);
    const double g = pt.mean - mu;
    if (std::abs(g) < best_gap) {
      best = pt;
      best_gap = std::abs(g);
    }
    return std::abs(g) <= kMeanTolerance ? 0.0 : g;
  };

  // Bracket: [0, bound] above the stationary mean, [-bound, 0] below.
  const double direction = mu > best.mean ? 1.0 : -1.0;
  const double fmax = std::max(std::abs(f_.max()), std::abs(f_.min()));
  const double cap = 700.0 / fmax;
  double inner = 0.0;
  double g_inner = best.mean - mu;
  double bound = 1.0;
  double g_outer = gap(direction * bound);
  while (g_outer != 0.0 && (g_outer > 0.0) != (direction > 0.0)) {
    if (bound >= cap) {
      throw NoConvergenceError("mean too close to the reward boundary to invert", best_gap);
    }
    inner = bound;
    g_inner = g_outer;
    bound = std::min(2.0 * bound, cap);
    g_outer = gap(direction * bound);
  }
  if (g_outer == 0.0) return best;

  double lo = direction * inner, hi = direction * bound;
  double g_lo = g_inner, g_hi = g_outer;
  if (lo > hi) {
    std::swap(lo, hi);
    std::swap(g_lo, g_hi);
  }
  std::uintmax_t max_iter = 200;
  auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-15 * (1.0 + std::abs(a)); };
  boost::math::tools::toms748_solve(gap, lo, hi, g_lo, g_hi, tol, max_iter);
  if (best_gap > 1e-10) {
    throw NoConvergenceError("mean inversion did not converge", best_gap);
  }
  return best;
}

double ExpFamily::divergence(const ThetaPoint& from, const ThetaPoint& to) noexcept {
  if (from.theta == to.theta) return 0.0;
  const double d = from.dual - to.theta * (from.mean - to.shift) + to.log_rho_scaled;
  return std::max(d, 0.0);
}

double ExpFamily::kl_rate_def(double theta1, double theta2) const {
  if (theta1 == theta2) return 0.0;
  const FamilyMember a = member(theta1);
  const FamilyMember b = member(theta2);
  double kl = 0.0;
  for (int x = 0; x < size(); ++x) {
    for (int y = 0; y < size(); ++y) {
      const double p1 = a.kernel(x, y);
      if (p1 <= 0.0) continue;
      const double p2 = b.kernel(x, y);
      if (p2 <= 0.0) return kInf;
      kl += a.stationary(x) * p1 * std::log(p1 / p2);
    }
  }
  return kl;
}

double ExpFamily::kl_rate_theta(double theta1, double theta2) const {
  if (!std::isfinite(theta2)) {
    throw Error(ErrorCode::kInvalidArgument, "second canonical parameter must be finite");
  }
  return divergence(evaluate(theta1), evaluate(theta2));
}

double ExpFamily::kl_rate_mean(double mu1, double mu2) const {
  require_mean(mu2, false);
  require_mean(mu1, true);
  if (mu1 == mu2) return 0.0;
  return divergence(point_from_mean(mu1), point_from_mean(mu2));
}

double ExpFamily::conjugate(double mu) const { return point_from_mean(mu).dual; }

ExpFamily ExpFamily::regenerated(double theta) const {
  return ExpFamily(member(theta).kernel, f_, q_);
}

}  // namespace mblab

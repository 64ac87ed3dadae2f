#include "mblab/bandit.hpp"

#include <algorithm>
#include <boost/math/tools/toms748_solve.hpp>
#include <cmath>
#include <limits>
#include <numeric>

#include "mblab/error.hpp"

namespace mblab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kClampFraction = 1e-9;

bool theta_tolerance(double a, double b) {
  return std::abs(b - a) <= 1e-15 * (1.0 + std::abs(a) + std::abs(b));
}

// Inner crossing solves only need to resolve the outer level y; 1e-12 keeps
// the weights accurate to ~1e-10 at a third of the cost.
bool crossing_tolerance(double a, double b) {
  return std::abs(b - a) <= 1e-12 * (1.0 + std::abs(a) + std::abs(b));
}

// Sample-mean -> ThetaPoint, recomputed only when an arm's mean moves.
class MeanPoints {
 public:
  MeanPoints(const ExpFamily& family, int arms)
      : family_(family), keys_(arms, std::numeric_limits<double>::quiet_NaN()), points_(arms) {}

  const ThetaPoint& get(int a, double mean) {
    if (!(keys_[a] == mean)) {
      points_[a] = family_.point_from_mean(mean);
      keys_[a] = mean;
    }
    return points_[a];
  }

 private:
  const ExpFamily& family_;
  std::vector<double> keys_;
  std::vector<ThetaPoint> points_;
};

// Z for arm a with the larger mean, from cached points.
double z_ordered(const ExpFamily& family, const RunState& state, int a, int b,
                 const ThetaPoint& pa, const ThetaPoint& pb) {
  const double na = static_cast<double>(state.transitions(a));
  const double nb = static_cast<double>(state.transitions(b));
  if (state.mean(a) == state.mean(b)) return 0.0;
  const double pooled = (state.sum(a) + state.sum(b)) / (na + nb);
  const ThetaPoint pm = family.point_from_mean(pooled);
  return na * ExpFamily::divergence(pa, pm) + nb * ExpFamily::divergence(pb, pm);
}

double z_cached(const ExpFamily& family, const RunState& state, int a, int b, MeanPoints& pts) {
  if (state.transitions(a) < 1 || state.transitions(b) < 1) {
    throw Error(ErrorCode::kInsufficientSamples, "Z statistic needs N_a, N_b >= 1");
  }
  if (state.mean(a) < state.mean(b)) {
    return -z_ordered(family, state, b, a, pts.get(b, state.mean(b)), pts.get(a, state.mean(a)));
  }
  return z_ordered(family, state, a, b, pts.get(a, state.mean(a)), pts.get(b, state.mean(b)));
}

struct StopCheck {
  std::optional<int> winner;
  int leader = 0;
  double min_z = 0.0;
};

StopCheck check_stop(const ExpFamily& family, const RunState& state, double level,
                     MeanPoints& pts, bool full) {
  StopCheck out;
  const int k = state.arms();
  out.leader = decide(state);
  out.min_z = kInf;
  for (int b = 0; b < k; ++b) {
    if (b == out.leader) continue;
    const double z = z_cached(family, state, out.leader, b, pts);
    out.min_z = std::min(out.min_z, z);
    if (!full && !(out.min_z > level)) return out;
  }
  if (out.min_z > level) out.winner = out.leader;
  return out;
}

// Two arms: the optimal crossing mean m equalises KL(mu1 || m) and KL(mu2 || m).
OptimalAllocation solve_two(const ExpFamily& family, const ThetaPoint& best,
                            const ThetaPoint& other) {
  auto h = [&](double theta) {
    const ThetaPoint m = family.evaluate(theta);
    return ExpFamily::divergence(best, m) - ExpFamily::divergence(other, m);
  };
  double lo = other.theta, hi = best.theta;
  std::uintmax_t iters = 200;
  const auto r = boost::math::tools::toms748_solve(h, lo, hi, ExpFamily::divergence(best, other),
                                                   -ExpFamily::divergence(other, best),
                                                   theta_tolerance, iters);
  const ThetaPoint m = family.evaluate(0.5 * (r.first + r.second));
  const double x = (best.mean - m.mean) / (m.mean - other.mean);
  OptimalAllocation out;
  out.weights = {1.0 / (1.0 + x), x / (1.0 + x)};
  out.value = out.weights[0] * ExpFamily::divergence(best, m) +
              out.weights[1] * ExpFamily::divergence(other, m);
  out.characteristic_time = 1.0 / out.value;
  return out;
}

// g_b(theta_m) = KL(mu* || m) + x(m) KL(mu_b || m), x(m) = (mu* - m) / (m - mu_b).
double crossing_cost(const ThetaPoint& best, const ThetaPoint& other, const ThetaPoint& m,
                     double& x) {
  x = (best.mean - m.mean) / (m.mean - other.mean);
  return ExpFamily::divergence(best, m) + x * ExpFamily::divergence(other, m);
}

// Crossing point for challenger b at level y in (0, KL(mu* || mu_b)).
ThetaPoint crossing_for_level(const ExpFamily& family, const ThetaPoint& best,
                              const ThetaPoint& other, double y) {
  auto g = [&](double theta) {
    if (theta <= other.theta) return ExpFamily::divergence(best, other) - y;
    if (theta >= best.theta) return -y;
    double x = 0.0;
    return crossing_cost(best, other, family.evaluate(theta), x) - y;
  };
  double lo = other.theta, hi = best.theta;
  std::uintmax_t iters = 200;
  const auto r = boost::math::tools::toms748_solve(g, lo, hi, g(lo), g(hi), crossing_tolerance, iters);
  return family.evaluate(0.5 * (r.first + r.second));
}

OptimalAllocation solve_many(const ExpFamily& family, std::span<const ThetaPoint> pts, int best) {
  const int k = static_cast<int>(pts.size());
  double y_max = kInf;
  for (int b = 0; b < k; ++b) {
    if (b != best) y_max = std::min(y_max, ExpFamily::divergence(pts[best], pts[b]));
  }
  auto ratio_sum = [&](double y) {
    double s = 0.0;
    for (int b = 0; b < k; ++b) {
      if (b == best) continue;
      const ThetaPoint m = crossing_for_level(family, pts[best], pts[b], y);
      s += ExpFamily::divergence(pts[best], m) / ExpFamily::divergence(pts[b], m);
    }
    return s - 1.0;
  };
  double lo = 0.0, hi = y_max * (1.0 - 1e-9);
  double f_hi = ratio_sum(hi);
  while (!(f_hi > 0.0) || !std::isfinite(f_hi)) {
    // F is increasing and unbounded near y_max; back off if the probe is not usable.
    if (!std::isfinite(f_hi)) {
      hi = 0.5 * (lo + hi);
      f_hi = ratio_sum(hi);
      continue;
    }
    break;
  }
  double y = hi;
  if (f_hi > 0.0) {
    std::uintmax_t iters = 200;
    auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-12 * std::max(a, b); };
    const auto r = boost::math::tools::toms748_solve(ratio_sum, lo, hi, -1.0, f_hi, tol, iters);
    y = 0.5 * (r.first + r.second);
  }
  OptimalAllocation out;
  out.weights.assign(k, 0.0);
  out.weights[best] = 1.0;
  double total = 1.0;
  for (int b = 0; b < k; ++b) {
    if (b == best) continue;
    const ThetaPoint m = crossing_for_level(family, pts[best], pts[b], y);
    double x = 0.0;
    crossing_cost(pts[best], pts[b], m, x);
    out.weights[b] = x;
    total += x;
  }
  for (double& w : out.weights) w /= total;
  std::vector<double> means(k);
  for (int a = 0; a < k; ++a) means[a] = pts[a].mean;
  out.value = allocation_value(family, means, out.weights);
  out.characteristic_time = 1.0 / out.value;
  return out;
}

OptimalAllocation optimal_from_points(const ExpFamily& family, std::span<const ThetaPoint> pts) {
  const int k = static_cast<int>(pts.size());
  int best = 0;
  for (int a = 1; a < k; ++a) {
    if (pts[a].mean > pts[best].mean) best = a;
  }
  for (int a = 0; a < k; ++a) {
    if (a != best && pts[a].mean == pts[best].mean) {
      throw Error(ErrorCode::kNoUniqueBest, "optimal weights need a unique best mean");
    }
  }
  OptimalAllocation out;
  if (k == 2) {
    const int other = 1 - best;
    out = solve_two(family, pts[best], pts[other]);
    if (best == 1) std::swap(out.weights[0], out.weights[1]);
  } else {
    out = solve_many(family, pts, best);
  }
  out.best_arm = best;
  return out;
}

}  // namespace

BanditInstance::BanditInstance(std::shared_ptr<const ExpFamily> family, std::vector<double> thetas)
    : family_(std::move(family)), thetas_(std::move(thetas)) {
  if (!family_) throw Error(ErrorCode::kInvalidArgument, "bandit instance needs a family");
  if (thetas_.size() < 2) throw Error(ErrorCode::kInvalidArgument, "bandit needs at least 2 arms");
  for (double th : thetas_) {
    if (!std::isfinite(th)) throw Error(ErrorCode::kInvalidArgument, "arm parameters must be finite");
    means_.push_back(family_->mean(th));
  }
  best_ = static_cast<int>(std::max_element(means_.begin(), means_.end()) - means_.begin());
  for (int a = 0; a < arms(); ++a) {
    if (a != best_ && means_[a] == means_[best_]) {
      throw Error(ErrorCode::kNoUniqueBest, "more than one arm attains the best mean");
    }
  }
}

BanditInstance BanditInstance::from_means(std::shared_ptr<const ExpFamily> family,
                                          std::span<const double> means) {
  std::vector<double> thetas;
  for (double mu : means) thetas.push_back(family->theta_from_mean(mu));
  return BanditInstance(std::move(family), std::move(thetas));
}

StrategyParams::StrategyParams(double alpha_, double delta_, int arms_, double ratio_constant_)
    : alpha(alpha_), delta(delta_), arms(arms_), ratio_constant(ratio_constant_) {
  if (!(alpha > 1.0)) throw Error(ErrorCode::kInvalidArgument, "alpha must exceed 1");
  if (!(delta > 0.0 && delta < 1.0)) throw Error(ErrorCode::kInvalidArgument, "delta must lie in (0, 1)");
  if (arms < 2) throw Error(ErrorCode::kInvalidArgument, "need at least 2 arms");
  if (!(ratio_constant >= 1.0)) throw Error(ErrorCode::kInvalidArgument, "ratio constant must be >= 1");
  d = 2.0 * alpha * arms * ratio_constant * ratio_constant / (alpha - 1.0);
}

RunState::RunState(int arms, bool keep_trajectories)
    : transitions_(arms, 0),
      sums_(arms, 0.0),
      current_(arms, -1),
      started_(arms, 0),
      keep_(keep_trajectories),
      paths_(keep_trajectories ? arms : 0) {
  if (arms < 2) throw Error(ErrorCode::kInvalidArgument, "need at least 2 arms");
}

void RunState::start(int a, int state) {
  if (started_[a]) throw Error(ErrorCode::kInvalidArgument, "arm already started");
  started_[a] = 1;
  current_[a] = state;
  ++t_;
  if (keep_) paths_[a].push_back(state);
}

void RunState::observe(int a, int state, double reward) {
  if (!started_[a]) throw Error(ErrorCode::kInvalidArgument, "arm observed before its first sample");
  current_[a] = state;
  ++transitions_[a];
  sums_[a] += reward;
  ++t_;
  if (keep_) paths_[a].push_back(state);
}

double weighted_mean(double na, double mean_a, double nb, double mean_b) {
  return (na * mean_a + nb * mean_b) / (na + nb);
}

double z_statistic(const ExpFamily& family, const RunState& state, int a, int b) {
  MeanPoints pts(family, state.arms());
  return z_cached(family, state, a, b, pts);
}

double threshold(const StrategyParams& params, long long t) {
  return 2.0 * (std::log(params.d) + params.alpha * std::log(static_cast<double>(t)) -
                std::log(params.delta));
}

std::vector<int> forced_exploration_set(long long t, std::span<const long long> transitions) {
  const double level = std::sqrt(static_cast<double>(t)) - 0.5 * static_cast<double>(transitions.size());
  std::vector<int> u;
  for (std::size_t a = 0; a < transitions.size(); ++a) {
    if (static_cast<double>(transitions[a]) < level) u.push_back(static_cast<int>(a));
  }
  return u;
}

std::vector<int> forced_exploration_set(const RunState& state) {
  return forced_exploration_set(state.t(), state.transition_counts());
}

int choose_arm(long long t, std::span<const long long> transitions, std::span<const double> weights) {
  const std::vector<int> forced = forced_exploration_set(t, transitions);
  if (!forced.empty()) {
    int pick = forced.front();
    for (int a : forced) {
      if (transitions[a] < transitions[pick]) pick = a;
    }
    return pick;
  }
  if (weights.size() != transitions.size()) {
    throw Error(ErrorCode::kInvalidArgument, "one weight per arm required for tracking");
  }
  int pick = 0;
  double best = -kInf;
  for (std::size_t a = 0; a < transitions.size(); ++a) {
    const double gap = weights[a] - static_cast<double>(transitions[a]) / static_cast<double>(t);
    if (gap > best) {
      best = gap;
      pick = static_cast<int>(a);
    }
  }
  return pick;
}

int choose_arm(const RunState& state, std::span<const double> weights) {
  return choose_arm(state.t(), state.transition_counts(), weights);
}

std::optional<int> should_stop(const ExpFamily& family, const RunState& state,
                               const StrategyParams& params) {
  MeanPoints pts(family, state.arms());
  const double level = std::max(0.0, threshold(params, state.t()));
  return check_stop(family, state, level, pts, false).winner;
}

int decide(const RunState& state) {
  int best = 0;
  for (int a = 1; a < state.arms(); ++a) {
    if (state.mean(a) > state.mean(best)) best = a;
  }
  return best;
}

double jensen_shannon(const ExpFamily& family, double alpha_w, double mu1, double mu2) {
  if (!(alpha_w >= 0.0 && alpha_w <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "Jensen-Shannon weight must lie in [0, 1]");
  }
  const double lo = family.min_reward(), hi = family.max_reward();
  if (!(mu1 > lo && mu1 < hi && mu2 > lo && mu2 < hi)) {
    throw Error(ErrorCode::kMeanOutOfRange, "Jensen-Shannon means must lie in (m, M)");
  }
  if (alpha_w == 0.0 || alpha_w == 1.0 || mu1 == mu2) return 0.0;
  const double mid = alpha_w * mu1 + (1.0 - alpha_w) * mu2;
  const ThetaPoint pm = family.point_from_mean(mid);
  return alpha_w * ExpFamily::divergence(family.point_from_mean(mu1), pm) +
         (1.0 - alpha_w) * ExpFamily::divergence(family.point_from_mean(mu2), pm);
}

double allocation_value(const ExpFamily& family, std::span<const double> means,
                        std::span<const double> weights) {
  const int k = static_cast<int>(means.size());
  if (static_cast<int>(weights.size()) != k) {
    throw Error(ErrorCode::kInvalidArgument, "weights and means differ in length");
  }
  const int best = static_cast<int>(std::max_element(means.begin(), means.end()) - means.begin());
  double g = kInf;
  for (int b = 0; b < k; ++b) {
    if (b == best) continue;
    const double total = weights[best] + weights[b];
    const double pair =
        total > 0.0 ? total * jensen_shannon(family, weights[best] / total, means[best], means[b])
                    : 0.0;
    g = std::min(g, pair);
  }
  return g;
}

OptimalAllocation optimal_weights(const ExpFamily& family, std::span<const double> means) {
  if (means.size() < 2) throw Error(ErrorCode::kInvalidArgument, "need at least 2 means");
  std::vector<ThetaPoint> pts;
  for (double mu : means) {
    if (!(mu > family.min_reward() && mu < family.max_reward())) {
      throw Error(ErrorCode::kMeanOutOfRange, "optimal weights need means in (m, M)");
    }
    pts.push_back(family.point_from_mean(mu));
  }
  return optimal_from_points(family, pts);
}

double binary_kl(double p, double q) {
  auto term = [](double a, double b) { return a > 0.0 ? a * std::log(a / b) : 0.0; };
  return term(p, q) + term(1.0 - p, 1.0 - q);
}

double nonasymptotic_lower_bound(const BanditInstance& instance, const StrategyParams& params,
                                 std::span<const Vector> q_per_arm) {
  if (static_cast<int>(q_per_arm.size()) != instance.arms()) {
    throw Error(ErrorCode::kInvalidArgument, "need one initial distribution per arm");
  }
  const OptimalAllocation opt = optimal_weights(instance.family(), instance.means());
  double returns = 0.0;
  for (int a = 0; a < instance.arms(); ++a) {
    returns += mean_return_time(instance.family().member(instance.thetas()[a]).kernel, q_per_arm[a]);
  }
  const double bound =
      binary_kl(params.delta, 1.0 - params.delta) * opt.characteristic_time - returns;
  return std::max(bound, 0.0);
}

double log_likelihood_ratio(const ExpFamily& family, std::span<const Trajectory> trajectories,
                            std::span<const double> thetas, std::span<const double> lambdas,
                            std::span<const Vector> q_theta, std::span<const Vector> q_lambda) {
  const std::size_t k = trajectories.size();
  if (thetas.size() != k || lambdas.size() != k || q_theta.size() != k || q_lambda.size() != k) {
    throw Error(ErrorCode::kInvalidArgument, "per-arm inputs differ in length");
  }
  const int n = family.size();
  double llr = 0.0;
  for (std::size_t a = 0; a < k; ++a) {
    const auto& states = trajectories[a].states;
    if (states.empty()) continue;
    const double q1 = q_theta[a](states.front());
    const double q2 = q_lambda[a](states.front());
    if (!(q1 > 0.0 && q2 > 0.0)) {
      throw Error(ErrorCode::kSupportMismatch, "initial state impossible under a parametrisation");
    }
    llr += std::log(q1 / q2);
    if (states.size() < 2) continue;
    const Matrix counts = trajectories[a].pair_counts(n);
    const FamilyMember m1 = family.member(thetas[a]);
    const FamilyMember m2 = family.member(lambdas[a]);
    for (int x = 0; x < n; ++x) {
      for (int y = 0; y < n; ++y) {
        if (counts(x, y) == 0.0) continue;
        const double p1 = m1.kernel(x, y), p2 = m2.kernel(x, y);
        if (!(p1 > 0.0 && p2 > 0.0)) {
          throw Error(ErrorCode::kSupportMismatch, "observed transition has zero probability");
        }
        llr += counts(x, y) * std::log(p1 / p2);
      }
    }
  }
  return llr;
}

RunResult run(const BanditInstance& instance, const StrategyParams& params, std::uint64_t seed,
              const RunOptions& options) {
  const ExpFamily& family = instance.family();
  const int k = instance.arms();
  if (params.arms != k) throw Error(ErrorCode::kInvalidArgument, "params sized for a different K");

  std::vector<StochasticMatrix> kernels;
  std::vector<Rng> rngs;
  for (int a = 0; a < k; ++a) {
    kernels.push_back(family.member(instance.thetas()[a]).kernel);
    rngs.emplace_back(derive_seed(seed, "arm", static_cast<std::uint64_t>(a)));
  }
  const RewardFunction& f = family.rewards();
  const Vector& q = family.initial_distribution();

  RunState state(k);
  for (int a = 0; a < k; ++a) {
    state.start(a, sample_from(q, rngs[a]));
    const int x = next_state(kernels[a], state.current_state(a), rngs[a]);
    state.observe(a, x, f(x));
  }

  // Tracking runs on sample means clamped away from the reward boundary.
  const double span = family.max_reward() - family.min_reward();
  const double clamp_lo = family.min_reward() + kClampFraction * span;
  const double clamp_hi = family.max_reward() - kClampFraction * span;
  const ThetaPoint edge_lo = family.point_from_mean(clamp_lo);
  const ThetaPoint edge_hi = family.point_from_mean(clamp_hi);

  MeanPoints raw(family, k);
  std::vector<ThetaPoint> clamped(k);
  std::vector<double> weights(k);
  RunResult result;

  while (true) {
    const double level = std::max(0.0, threshold(params, state.t()));
    const StopCheck check = check_stop(family, state, level, raw, options.trace);
    if (check.winner) {
      result.tau = state.t();
      result.decision = *check.winner;
      break;
    }
    if (state.t() >= options.max_samples) {
      throw Error(ErrorCode::kTimeout,
                  "no stopping decision after " + std::to_string(state.t()) + " samples");
    }

    int arm = 0;
    const std::vector<int> forced = forced_exploration_set(state);
    if (!forced.empty()) {
      arm = choose_arm(state, weights);
    } else {
      double top = -kInf;
      int ties = 0;
      for (int a = 0; a < k; ++a) {
        const double mu = state.mean(a);
        if (mu <= clamp_lo) {
          clamped[a] = edge_lo;
        } else if (mu >= clamp_hi) {
          clamped[a] = edge_hi;
        } else {
          clamped[a] = raw.get(a, mu);
        }
        if (clamped[a].mean > top) {
          top = clamped[a].mean;
          ties = 1;
        } else if (clamped[a].mean == top) {
          ++ties;
        }
      }
      if (ties > 1) {
        std::fill(weights.begin(), weights.end(), 1.0 / k);
      } else {
        weights = optimal_from_points(family, clamped).weights;
      }
      arm = choose_arm(state, weights);
    }

    if (options.trace) {
      result.trace.push_back(TraceRow{state.t(), arm, check.leader, check.min_z, level});
    }
    const int x = next_state(kernels[arm], state.current_state(arm), rngs[arm]);
    state.observe(arm, x, f(x));
  }

  result.correct = result.decision == instance.best_arm();
  result.transitions.resize(k);
  for (int a = 0; a < k; ++a) result.transitions[a] = state.transitions(a);
  return result;
}

}  // namespace mblab

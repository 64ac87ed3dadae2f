#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "mblab/exp_family.hpp"

namespace mblab {

/// K >= 2 Markovian arms from one exponential family, with a unique best mean.
class BanditInstance {
 public:
  /// Throws Error(kNoUniqueBest) if the best mean is shared.
  BanditInstance(std::shared_ptr<const ExpFamily> family, std::vector<double> thetas);

  /// Arms given by their stationary means, each inverted with theta_from_mean.
  static BanditInstance from_means(std::shared_ptr<const ExpFamily> family,
                                   std::span<const double> means);

  const ExpFamily& family() const noexcept { return *family_; }
  std::shared_ptr<const ExpFamily> family_ptr() const noexcept { return family_; }
  int arms() const noexcept { return static_cast<int>(thetas_.size()); }
  const std::vector<double>& thetas() const noexcept { return thetas_; }
  const std::vector<double>& means() const noexcept { return means_; }
  int best_arm() const noexcept { return best_; }

 private:
  std::shared_ptr<const ExpFamily> family_;
  std::vector<double> thetas_;
  std::vector<double> means_;
  int best_ = 0;
};

/// Confidence parameters of the Chernoff stopping rule.
struct StrategyParams {
  /// Throws Error(kInvalidArgument) unless alpha > 1, 0 < delta < 1, arms >= 2
  /// and ratio_constant >= 1.
  StrategyParams(double alpha, double delta, int arms, double ratio_constant);

  double alpha;
  double delta;
  int arms;
  double ratio_constant;  // C
  double d;               // 2 alpha K C^2 / (alpha - 1)

  /// alpha above 2 is allowed but unusual; the CLI surfaces a warning.
  bool alpha_unusual() const noexcept { return alpha > 2.0; }
};

/// Live bookkeeping of a run. N_a counts transitions (samples of arm a minus
/// one) and the sample mean excludes each arm's very first observation.
class RunState {
 public:
  explicit RunState(int arms, bool keep_trajectories = false);

  int arms() const noexcept { return static_cast<int>(transitions_.size()); }
  long long t() const noexcept { return t_; }
  long long transitions(int a) const { return transitions_[a]; }
  const std::vector<long long>& transition_counts() const noexcept { return transitions_; }
  double sum(int a) const { return sums_[a]; }
  double mean(int a) const { return sums_[a] / static_cast<double>(transitions_[a]); }
  int current_state(int a) const { return current_[a]; }
  const std::vector<std::vector<int>>& trajectories() const noexcept { return paths_; }

  /// First observation of arm a (excluded from its sample mean).
  void start(int a, int state);
  /// A subsequent observation of arm a with reward `reward`.
  void observe(int a, int state, double reward);

 private:
  long long t_ = 0;
  std::vector<long long> transitions_;
  std::vector<double> sums_;
  std::vector<int> current_;
  std::vector<char> started_;
  bool keep_ = false;
  std::vector<std::vector<int>> paths_;
};

double weighted_mean(double na, double mean_a, double nb, double mean_b);

/// Z_{a,b}(t) = N_a KL(mu_a || mu_ab) + N_b KL(mu_b || mu_ab) when
/// mu_a >= mu_b, and -Z_{b,a}(t) otherwise. Throws
/// Error(kInsufficientSamples) when N_a or N_b is zero.
double z_statistic(const ExpFamily& family, const RunState& state, int a, int b);

/// beta(t) = 2 log(D t^alpha / delta).
double threshold(const StrategyParams& params, long long t);

/// U_t = {a : N_a(t) < sqrt(t) - K/2}, with K = transitions.size().
std::vector<int> forced_exploration_set(long long t, std::span<const long long> transitions);
std::vector<int> forced_exploration_set(const RunState& state);

/// Forced exploration (least-sampled arm of U_t) if U_t is nonempty,
/// otherwise direct tracking: argmax_a w_a - N_a / t. Ties go to the lowest
/// index.
int choose_arm(long long t, std::span<const long long> transitions, std::span<const double> weights);
int choose_arm(const RunState& state, std::span<const double> weights);

/// Arm a with Z_{a,b}(t) > max(0, beta(t)) for every b != a, if any.
std::optional<int> should_stop(const ExpFamily& family, const RunState& state,
                               const StrategyParams& params);

/// Arm with the largest sample mean (lowest index on ties).
int decide(const RunState& state);

/// I_alpha(mu1, mu2) = alpha KL(mu1 || m) + (1 - alpha) KL(mu2 || m) with
/// m = alpha mu1 + (1 - alpha) mu2; mu1, mu2 in (m, M).
double jensen_shannon(const ExpFamily& family, double alpha_w, double mu1, double mu2);

struct OptimalAllocation {
  std::vector<double> weights;       // w*
  double value = 0.0;                // G(w*) = 1 / T*
  double characteristic_time = 0.0;  // T*
  int best_arm = 0;
};

/// G(w) = min_{b != a*} (w_a* + w_b) I_{w_a* / (w_a* + w_b)}(mu_a*, mu_b).
double allocation_value(const ExpFamily& family, std::span<const double> means,
                        std::span<const double> weights);

/// Maximiser of G over the simplex. Means must lie in (m, M) with a unique
/// maximum, else Error(kMeanOutOfRange) / Error(kNoUniqueBest).
OptimalAllocation optimal_weights(const ExpFamily& family, std::span<const double> means);

/// p log(p/q) + (1-p) log((1-p)/(1-q)).
double binary_kl(double p, double q);

/// kl(delta, 1 - delta) T* - sum_a R_a, floored at 0, where R_a is the mean
/// return time of arm a's chain from q_per_arm[a].
double nonasymptotic_lower_bound(const BanditInstance& instance, const StrategyParams& params,
                                 std::span<const Vector> q_per_arm);

/// Log-likelihood ratio of per-arm trajectories under thetas versus lambdas.
/// Throws Error(kSupportMismatch) for an observation impossible under either.
double log_likelihood_ratio(const ExpFamily& family, std::span<const Trajectory> trajectories,
                            std::span<const double> thetas, std::span<const double> lambdas,
                            std::span<const Vector> q_theta, std::span<const Vector> q_lambda);

/// State at time t, just before the (t+1)-th sample is drawn.
struct TraceRow {
  long long t = 0;
  int arm = 0;        // arm sampled next
  int leader = 0;     // arm with the largest sample mean
  double min_z = 0;   // min_b Z_{leader,b}(t)
  double beta = 0;
};

struct RunOptions {
  bool trace = false;
  long long max_samples = 10'000'000;
};

struct RunResult {
  long long tau = 0;
  int decision = 0;
  bool correct = false;
  std::vector<long long> transitions;  // N_a(tau)
  std::vector<TraceRow> trace;
};

/// One replication of the (alpha, delta)-Track-and-Stop strategy. Arm a's
/// chain draws from the stream derive_seed(seed, "arm", a). Throws
/// Error(kTimeout) once max_samples samples are drawn without stopping.
RunResult run(const BanditInstance& instance, const StrategyParams& params, std::uint64_t seed,
              const RunOptions& options = {});

}  // namespace mblab

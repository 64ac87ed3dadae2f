#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "mblab/bandit.hpp"
#include "mblab/error.hpp"
#include "oracles.hpp"

namespace {

using namespace mblab;
using fixtures::vec;

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an mblab::Error";
  return ErrorCode::kInvalidArgument;
}

// A state with the given transition counts and sample means (two arms, all in state 0).
RunState state_with(std::vector<long long> counts, std::vector<double> means) {
  RunState s(static_cast<int>(counts.size()));
  for (std::size_t a = 0; a < counts.size(); ++a) {
    s.start(static_cast<int>(a), 0);
    for (long long i = 0; i < counts[a]; ++i) s.observe(static_cast<int>(a), 0, means[a]);
  }
  return s;
}

TEST(BanditInstance, FromMeansAndBestArm) {
  const auto fam = fixtures::family(fixtures::sticky());
  const std::vector<double> means{0.35, 0.6};
  const BanditInstance inst = BanditInstance::from_means(fam, means);
  EXPECT_EQ(inst.arms(), 2);
  EXPECT_EQ(inst.best_arm(), 1);
  EXPECT_NEAR(inst.means()[0], 0.35, 1e-12);
  EXPECT_EQ(code_of([&] { BanditInstance(fam, {0.3, 0.3}); }), ErrorCode::kNoUniqueBest);
  EXPECT_THROW(BanditInstance(fam, {0.3}), Error);
}

TEST(StrategyParams, ConstantAndValidation) {
  const StrategyParams p(2.0, 0.1, 2, 1.0);
  EXPECT_DOUBLE_EQ(p.d, 8.0);
  EXPECT_FALSE(p.alpha_unusual());
  EXPECT_TRUE(StrategyParams(2.5, 0.1, 2, 1.0).alpha_unusual());
  EXPECT_THROW(StrategyParams(1.0, 0.1, 2, 1.0), Error);
  EXPECT_THROW(StrategyParams(1.2, 1.0, 2, 1.0), Error);
  EXPECT_THROW(StrategyParams(1.2, 0.1, 1, 1.0), Error);
  EXPECT_THROW(StrategyParams(1.2, 0.1, 2, 0.5), Error);
}

TEST(RunState, CountsExcludeFirstSample) {
  RunState s(2, true);
  s.start(0, 1);
  s.start(1, 0);
  s.observe(0, 0, 0.0);
  s.observe(0, 1, 1.0);
  s.observe(1, 1, 1.0);
  EXPECT_EQ(s.t(), 5);
  EXPECT_EQ(s.transitions(0), 2);
  EXPECT_EQ(s.transitions(1), 1);
  EXPECT_DOUBLE_EQ(s.mean(0), 0.5);
  EXPECT_EQ(s.t(), s.transitions(0) + s.transitions(1) + 2);
  EXPECT_EQ(s.trajectories()[0], (std::vector<int>{1, 0, 1}));
  EXPECT_THROW(s.start(0, 0), Error);
}

TEST(WeightedMean, Examples) {
  EXPECT_DOUBLE_EQ(weighted_mean(1, 0.6, 1, 0.4), 0.5);
  EXPECT_DOUBLE_EQ(weighted_mean(3, 0.8, 1, 0.4), 0.7);
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const double a = rng.uniform(), b = rng.uniform();
    const double m = weighted_mean(1 + 10 * rng.uniform(), a, 1 + 10 * rng.uniform(), b);
    EXPECT_GE(m, std::min(a, b));
    EXPECT_LE(m, std::max(a, b));
  }
}

TEST(ZStatistic, CoinExampleAndSymmetry) {
  const auto fam = fixtures::family(fixtures::coin());
  const RunState s = state_with({1, 1}, {0.6, 0.4});
  const double expected = 2.0 * (0.5 * oracle::binary_kl(0.6, 0.5) + 0.5 * oracle::binary_kl(0.4, 0.5));
  EXPECT_NEAR(z_statistic(*fam, s, 0, 1), expected, 1e-12);
  EXPECT_NEAR(z_statistic(*fam, s, 0, 1), 0.0402711, 1e-7);
  EXPECT_EQ(z_statistic(*fam, s, 1, 0), -z_statistic(*fam, s, 0, 1));
  EXPECT_EQ(z_statistic(*fam, state_with({3, 5}, {0.4, 0.4}), 0, 1), 0.0);
}

TEST(ZStatistic, AntisymmetryAlongSimulatedRuns) {
  const auto fam = fixtures::family(fixtures::sticky());
  const StochasticMatrix p(fixtures::sticky());
  Rng rng(3);
  RunState s(3);
  for (int a = 0; a < 3; ++a) s.start(a, 0);
  std::vector<int> x(3, 0);
  for (int step = 0; step < 300; ++step) {
    const int a = step % 3;
    x[a] = next_state(p, x[a], rng);
    s.observe(a, x[a], x[a]);
    if (step < 3) continue;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) EXPECT_EQ(z_statistic(*fam, s, i, j), -z_statistic(*fam, s, j, i));
    }
  }
}

TEST(ZStatistic, NeedsOneTransitionPerArm) {
  const auto fam = fixtures::family(fixtures::coin());
  RunState s(2);
  s.start(0, 0);
  s.start(1, 0);
  s.observe(0, 1, 1.0);
  EXPECT_EQ(code_of([&] { z_statistic(*fam, s, 0, 1); }), ErrorCode::kInsufficientSamples);
}

TEST(Threshold, ClosedForm) {
  const StrategyParams p(2.0, 0.1, 2, 1.0);
  EXPECT_NEAR(threshold(p, 1), 2.0 * std::log(80.0), 1e-12);
  EXPECT_NEAR(threshold(p, 1), 8.7640532, 1e-7);
  for (long long t = 1; t < 1000; ++t) EXPECT_LT(threshold(p, t), threshold(p, t + 1));
}

TEST(ForcedExploration, Examples) {
  const std::vector<long long> lagging{1, 7}, balanced{2, 6}, large{100, 100};
  EXPECT_EQ(forced_exploration_set(9, lagging), (std::vector<int>{0}));
  EXPECT_TRUE(forced_exploration_set(9, balanced).empty());
  EXPECT_TRUE(forced_exploration_set(202, large).empty());
}

TEST(ChooseArm, ForcedThenTracking) {
  const std::vector<long long> lagging{1, 7};
  const std::vector<double> favour_second{0.0, 1.0};
  EXPECT_EQ(choose_arm(9, lagging, favour_second), 0);

  const std::vector<long long> half{50, 50};
  const std::vector<double> w{0.6, 0.4};
  EXPECT_EQ(choose_arm(100, half, w), 0);
  const std::vector<double> tie{0.5, 0.5};
  EXPECT_EQ(choose_arm(100, half, tie), 0);
  const std::vector<double> favour_third{0.2, 0.2, 0.6};
  const std::vector<long long> three{30, 30, 30};
  EXPECT_EQ(choose_arm(93, three, favour_third), 2);
}

TEST(ShouldStop, EqualMeansNeverStop) {
  const auto fam = fixtures::family(fixtures::coin());
  const StrategyParams p(1.2, 0.1, 2, 1.0);
  EXPECT_FALSE(should_stop(*fam, state_with({500, 500}, {0.5, 0.5}), p));
}

TEST(ShouldStop, LargeGapStopsOnTheLeader) {
  const auto fam = fixtures::family(fixtures::coin());
  const StrategyParams p(1.2, 0.1, 2, 1.0);
  const auto w = should_stop(*fam, state_with({5000, 5000}, {0.9, 0.1}), p);
  ASSERT_TRUE(w);
  EXPECT_EQ(*w, 0);
  EXPECT_FALSE(should_stop(*fam, state_with({1, 1}, {0.9, 0.1}), p));
}

TEST(ShouldStop, WinnerHasStrictlyLargestMean) {
  const auto fam = fixtures::family(fixtures::coin());
  const StrategyParams p(1.1, 0.5, 3, 1.0);
  Rng rng(12);
  int stops = 0;
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> means{0.05 + 0.9 * rng.uniform(), 0.05 + 0.9 * rng.uniform(),
                              0.05 + 0.9 * rng.uniform()};
    if (trial % 7 == 0) means[1] = means[0];
    const RunState s = state_with({400, 400, 400}, means);
    const auto w = should_stop(*fam, s, p);
    if (!w) continue;
    ++stops;
    EXPECT_EQ(*w, decide(s));
    for (int b = 0; b < 3; ++b) {
      if (b != *w) EXPECT_GT(s.mean(*w), s.mean(b));
    }
  }
  EXPECT_GT(stops, 0);
}

TEST(Decide, LargestSampleMean) {
  EXPECT_EQ(decide(state_with({1, 1, 1}, {0.7, 0.2, 0.4})), 0);
  EXPECT_EQ(decide(state_with({1, 1}, {0.3, 0.3})), 0);
}

TEST(JensenShannon, CoinExampleAndDegenerateCases) {
  const auto fam = fixtures::family(fixtures::coin());
  EXPECT_NEAR(jensen_shannon(*fam, 0.5, 0.6, 0.4), 0.0201355, 1e-7);
  EXPECT_EQ(jensen_shannon(*fam, 0.3, 0.4, 0.4), 0.0);
  EXPECT_EQ(jensen_shannon(*fam, 0.0, 0.6, 0.4), 0.0);
  EXPECT_EQ(jensen_shannon(*fam, 1.0, 0.6, 0.4), 0.0);
}

TEST(JensenShannon, EqualsVariationalMinimum) {
  const auto fam = fixtures::family(fixtures::sticky());
  const oracle::TwoStateFamily ref(fixtures::sticky(), fixtures::bernoulli_rewards());
  for (double a : {0.2, 0.5, 0.8}) {
    for (auto [m1, m2] : {std::pair{0.6, 0.35}, std::pair{0.9, 0.1}, std::pair{0.3, 0.5}}) {
      auto objective = [&](double lam) { return -(a * ref.kl_mean(m1, lam) + (1 - a) * ref.kl_mean(m2, lam)); };
      const double lam = oracle::golden_max(objective, std::min(m1, m2), std::max(m1, m2));
      EXPECT_NEAR(jensen_shannon(*fam, a, m1, m2), -objective(lam), 1e-8);
    }
  }
}

TEST(OptimalWeights, SymmetricCoinInstance) {
  const auto fam = fixtures::family(fixtures::coin());
  const std::vector<double> means{0.6, 0.4};
  const OptimalAllocation opt = optimal_weights(*fam, means);
  EXPECT_NEAR(opt.weights[0], 0.5, 1e-6);
  EXPECT_NEAR(opt.weights[1], 0.5, 1e-6);
  EXPECT_NEAR(opt.characteristic_time, 1.0 / oracle::binary_kl(0.6, 0.5), 1e-8);
  EXPECT_NEAR(opt.characteristic_time, 49.6635, 1e-3);
  EXPECT_EQ(opt.best_arm, 0);
}

TEST(OptimalWeights, MatchesGridSearch) {
  struct Case {
    fixtures::Matrix p;
    std::vector<double> means;
  };
  const std::vector<Case> cases{{fixtures::coin(), {0.6, 0.45, 0.4}},
                                {fixtures::sticky(), {0.6, 0.35}},
                                {fixtures::sticky(), {0.6, 0.45, 0.35}}};
  for (const auto& c : cases) {
    const auto fam = fixtures::family(c.p);
    const oracle::TwoStateFamily ref(c.p, fixtures::bernoulli_rewards());
    const OptimalAllocation opt = optimal_weights(*fam, c.means);
    std::vector<double> thetas;
    for (double mu : c.means) thetas.push_back(ref.theta_from_mean(mu));
    const auto g = [&](std::span<const double> w) { return ref.allocation_value(c.means, thetas, w); };
    const int k = static_cast<int>(c.means.size());
    const auto coarse = oracle::simplex_grid_search(g, k, 2e-3);
    EXPECT_NEAR(ref.allocation_value(c.means, opt.weights), coarse.value, 1e-5);
    EXPECT_GE(ref.allocation_value(c.means, opt.weights), coarse.value - 1e-12);
    const auto fine = k == 3 ? oracle::refine_grid_optimum(g, coarse, 1.5e-2, 1e-4) : coarse;
    for (std::size_t a = 0; a < c.means.size(); ++a) EXPECT_NEAR(opt.weights[a], fine.weights[a], 5e-3);
  }
}

TEST(OptimalWeights, SimplexAndMaximality) {
  const auto fam = fixtures::family(fixtures::sticky());
  const std::vector<double> means{0.5, 0.62, 0.3};
  const OptimalAllocation opt = optimal_weights(*fam, means);
  double sum = 0.0;
  for (double w : opt.weights) {
    EXPECT_GE(w, 0.0);
    sum += w;
  }
  EXPECT_NEAR(sum, 1.0, 1e-12);
  EXPECT_EQ(opt.best_arm, 1);
  EXPECT_NEAR(opt.value, allocation_value(*fam, means, opt.weights), 1e-15);
  Rng rng(31337);
  for (int i = 0; i < 10000; ++i) {
    std::vector<double> w{-std::log(1.0 - rng.uniform()), -std::log(1.0 - rng.uniform()),
                          -std::log(1.0 - rng.uniform())};
    const double s = w[0] + w[1] + w[2];
    for (double& x : w) x /= s;
    EXPECT_GE(opt.value, allocation_value(*fam, means, w) - 1e-12);
  }
}

TEST(OptimalWeights, TiedChallengersAreInterchangeable) {
  const auto fam = fixtures::family(fixtures::sticky());
  const std::vector<double> means{0.6, 0.4, 0.4};
  const OptimalAllocation opt = optimal_weights(*fam, means);
  EXPECT_NEAR(opt.weights[1], opt.weights[2], 1e-9);
  const std::vector<double> w{0.5, 0.3, 0.2}, swapped{0.5, 0.2, 0.3};
  EXPECT_EQ(allocation_value(*fam, means, w), allocation_value(*fam, means, swapped));
}

TEST(OptimalWeights, RejectsBadMeans) {
  const auto fam = fixtures::family(fixtures::sticky());
  const std::vector<double> tied{0.5, 0.5}, boundary{1.0, 0.5};
  EXPECT_EQ(code_of([&] { optimal_weights(*fam, tied); }), ErrorCode::kNoUniqueBest);
  EXPECT_EQ(code_of([&] { optimal_weights(*fam, boundary); }), ErrorCode::kMeanOutOfRange);
}

TEST(BinaryKl, Values) {
  EXPECT_NEAR(binary_kl(0.1, 0.9), 1.7577796, 1e-7);
  EXPECT_EQ(binary_kl(0.5, 0.5), 0.0);
  EXPECT_NEAR(binary_kl(0.0, 0.5), std::log(2.0), 1e-15);
}

TEST(LowerBound, CoinInstance) {
  const auto fam = fixtures::family(fixtures::coin());
  const BanditInstance inst = BanditInstance::from_means(fam, std::vector<double>{0.6, 0.4});
  const std::vector<Vector> q(2, vec({0.5, 0.5}));
  // IID arms: the stationary law is (1 - p, p), so R = 0.5 / (1 - p) + 0.5 / p.
  const double returns = 2.0 * (0.5 / 0.4 + 0.5 / 0.6);
  const double t_star = 1.0 / oracle::binary_kl(0.6, 0.5);
  EXPECT_NEAR(nonasymptotic_lower_bound(inst, StrategyParams(1.2, 0.1, 2, 1.0), q),
              oracle::binary_kl(0.1, 0.9) * t_star - returns, 1e-8);
  EXPECT_EQ(nonasymptotic_lower_bound(inst, StrategyParams(1.2, 0.5, 2, 1.0), q), 0.0);
}

TEST(LowerBound, GrowsLikeCharacteristicTimeLogInverseDelta) {
  const auto fam = fixtures::family(fixtures::sticky());
  const BanditInstance inst = BanditInstance::from_means(fam, std::vector<double>{0.6, 0.35});
  const std::vector<Vector> q(2, fam->initial_distribution());
  const double t_star = optimal_weights(*fam, inst.means()).characteristic_time;
  const double delta = 1e-6;
  const double ratio =
      nonasymptotic_lower_bound(inst, StrategyParams(1.2, delta, 2, 8.0), q) / std::log(1.0 / delta);
  EXPECT_NEAR(ratio / t_star, 1.0, 0.1);
}

TEST(LogLikelihoodRatio, IdenticalParametersAndSingleStep) {
  const auto fam = fixtures::family(fixtures::sticky());
  const std::vector<Trajectory> traj{{{0, 1, 1, 0}}, {{1, 0}}};
  const std::vector<double> thetas{0.5, -1.0}, lambdas{0.2, -1.0};
  const std::vector<Vector> q(2, vec({0.5, 0.5}));
  EXPECT_EQ(log_likelihood_ratio(*fam, traj, thetas, thetas, q, q), 0.0);

  const std::vector<Trajectory> one{{{0, 1}}};
  const std::vector<double> t1{0.5}, l1{0.2};
  const std::vector<Vector> q1(1, vec({0.5, 0.5}));
  EXPECT_NEAR(log_likelihood_ratio(*fam, one, t1, l1, q1, q1),
              std::log(fam->member(0.5).kernel(0, 1) / fam->member(0.2).kernel(0, 1)), 1e-14);
}

TEST(LogLikelihoodRatio, ImpossibleObservationThrows) {
  const auto fam = std::make_shared<ExpFamily>(
      StochasticMatrix(Matrix{{0.5, 0.5, 0.0}, {0.4, 0.3, 0.3}, {0.5, 0.5, 0.0}}),
      RewardFunction{0.0, 1.0, 0.5});
  const std::vector<Trajectory> traj{{{0, 2}}};
  const std::vector<double> t{0.0}, l{1.0};
  const std::vector<Vector> q(1, fam->initial_distribution());
  EXPECT_EQ(code_of([&] { log_likelihood_ratio(*fam, traj, t, l, q, q); }), ErrorCode::kSupportMismatch);
}

TEST(Run, DeterministicAndAboveInitialisationFloor) {
  const auto fam = fixtures::family(fixtures::sticky());
  const BanditInstance inst = BanditInstance::from_means(fam, std::vector<double>{0.8, 0.2});
  const StrategyParams params(1.2, 0.1, 2, fam->ratio_constant());
  const RunResult a = run(inst, params, 42);
  const RunResult b = run(inst, params, 42);
  EXPECT_EQ(a.tau, b.tau);
  EXPECT_EQ(a.decision, b.decision);
  EXPECT_EQ(a.transitions, b.transitions);
  EXPECT_GE(a.tau, 4);
  EXPECT_EQ(a.transitions[0] + a.transitions[1] + 2, a.tau);
  EXPECT_EQ(a.correct, a.decision == inst.best_arm());
}

TEST(Run, TraceRecordsEverySampledStep) {
  const auto fam = fixtures::family(fixtures::coin());
  const BanditInstance inst = BanditInstance::from_means(fam, std::vector<double>{0.9, 0.1});
  const StrategyParams params(1.2, 0.1, 2, 1.0);
  RunOptions opt;
  opt.trace = true;
  const RunResult r = run(inst, params, 7, opt);
  ASSERT_EQ(static_cast<long long>(r.trace.size()), r.tau - 4);
  for (std::size_t i = 0; i < r.trace.size(); ++i) {
    EXPECT_EQ(r.trace[i].t, static_cast<long long>(i) + 4);
    EXPECT_EQ(r.trace[i].beta, std::max(0.0, threshold(params, r.trace[i].t)));
    EXPECT_LE(r.trace[i].min_z, r.trace[i].beta);
  }
}

TEST(Run, SampleCapRaisesTimeout) {
  const auto fam = fixtures::family(fixtures::sticky());
  const BanditInstance inst = BanditInstance::from_means(fam, std::vector<double>{0.6, 0.35});
  RunOptions opt;
  opt.max_samples = 50;
  EXPECT_EQ(code_of([&] { run(inst, StrategyParams(1.2, 0.1, 2, 8.0), 1, opt); }), ErrorCode::kTimeout);
}

}  // namespace

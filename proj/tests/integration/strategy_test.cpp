#include <gtest/gtest.h>

#include <cmath>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "mblab/bandit.hpp"
#include "mblab/error.hpp"
#include "mblab/experiment.hpp"
#include "mblab/rng.hpp"
#include "oracles.hpp"

namespace {

using namespace mblab;

std::string sticky_config(const std::string& means, double delta, int reps, std::uint64_t seed) {
  return R"({"mode": "run", "generator": [[0.9, 0.1], [0.2, 0.8]], "rewards": [0, 1], "alpha": 1.2,)"
         R"( "means": )" + means + R"(, "delta": )" + format_double(delta) +
         R"(, "replications": )" + std::to_string(reps) + R"(, "seed": )" + std::to_string(seed) + "}";
}

// Average of N_a(tau) / tau over replications, against the oracle w*.
std::vector<double> mean_frequencies(const std::vector<double>& means, double delta, int reps) {
  const auto fam = fixtures::family(fixtures::sticky());
  const int k = static_cast<int>(means.size());
  const BanditInstance inst = BanditInstance::from_means(fam, means);
  const StrategyParams params(1.2, delta, k, fam->ratio_constant());
  std::vector<double> freq(k, 0.0);
  for (int i = 0; i < reps; ++i) {
    const RunResult r = run(inst, params, derive_seed(99, "tracking", i));
    for (int a = 0; a < k; ++a) {
      freq[a] += static_cast<double>(r.transitions[a]) / static_cast<double>(r.tau) / reps;
    }
  }
  return freq;
}

TEST(Tracking, FrequenciesApproachOptimalWeights) {
  const std::vector<double> means{0.9, 0.4};
  const OptimalAllocation opt = optimal_weights(*fixtures::family(fixtures::sticky()), means);
  ASSERT_GT(opt.weights[0], 0.55);  // away from the uniform allocation
  const auto freq = mean_frequencies(means, 1e-3, 100);
  for (int a = 0; a < 2; ++a) EXPECT_NEAR(freq[a], opt.weights[a], 0.05) << "arm " << a;
}

TEST(Tracking, ThreeArmFrequenciesApproachOptimalWeights) {
  const std::vector<double> means{0.9, 0.5, 0.2};
  const OptimalAllocation opt = optimal_weights(*fixtures::family(fixtures::sticky()), means);
  const auto freq = mean_frequencies(means, 1e-2, 20);
  for (int a = 0; a < 3; ++a) EXPECT_NEAR(freq[a], opt.weights[a], 0.05) << "arm " << a;
}

class DeltaCorrectness : public ::testing::TestWithParam<double> {};

TEST_P(DeltaCorrectness, ErrorRateWithinDeltaAndAboveLowerBound) {
  const double delta = GetParam();
  const int reps = 300;
  const auto config = parse_config(sticky_config("[0.8, 0.2]", delta, reps, 4242));
  const BatchResult batch = run_batch(config);

  ASSERT_EQ(batch.report.timeouts, 0);
  EXPECT_LE(batch.report.error_rate, delta);
  // One-sided exact test of "error probability <= delta" at level 0.01.
  EXPECT_GT(oracle::binomial_upper_tail(reps, batch.report.errors, delta), 0.01);
  EXPECT_GE(batch.report.mean_tau, batch.report.lower_bound);
  for (const auto& rec : batch.records) EXPECT_GE(rec.tau, 4);
}

INSTANTIATE_TEST_SUITE_P(Deltas, DeltaCorrectness, ::testing::Values(0.1, 0.05));

// Drive the state with an arbitrary sampling rule and check every stopping event.
TEST(Stopping, WinnerHasStrictMaximumMeanAndZIsAntisymmetric) {
  const auto fam = fixtures::family(fixtures::coin());
  const BanditInstance inst = BanditInstance::from_means(fam, std::vector<double>{0.9, 0.3, 0.1});
  const StrategyParams params(1.2, 0.5, 3, fam->ratio_constant());
  int events = 0;
  for (int rep = 0; rep < 6; ++rep) {
    Rng pick(derive_seed(5, "pick", rep));
    std::vector<Rng> rngs;
    std::vector<StochasticMatrix> kernels;
    RunState state(3);
    for (int a = 0; a < 3; ++a) {
      rngs.emplace_back(derive_seed(5, "arm", rep * 3 + a));
      kernels.push_back(fam->member(inst.thetas()[a]).kernel);
      state.start(a, sample_from(fam->initial_distribution(), rngs[a]));
      const int x = next_state(kernels[a], state.current_state(a), rngs[a]);
      state.observe(a, x, fam->rewards()(x));
    }
    for (int step = 0; step < 600; ++step) {
      const int a = static_cast<int>(pick.uniform() * 3.0);
      const int x = next_state(kernels[a], state.current_state(a), rngs[a]);
      state.observe(a, x, fam->rewards()(x));
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
          if (i != j) ASSERT_EQ(z_statistic(*fam, state, i, j), -z_statistic(*fam, state, j, i));
        }
      }
      if (const auto winner = should_stop(*fam, state, params)) {
        ++events;
        EXPECT_EQ(*winner, decide(state));
        for (int b = 0; b < 3; ++b) {
          if (b != *winner) EXPECT_GT(state.mean(*winner), state.mean(b));
        }
      }
    }
  }
  EXPECT_GT(events, 0);
}

TEST(Run, FixedSeedIsReproducible) {
  const auto fam = fixtures::family(fixtures::sticky());
  const BanditInstance inst = BanditInstance::from_means(fam, std::vector<double>{0.7, 0.4});
  const StrategyParams params(1.2, 0.1, 2, fam->ratio_constant());
  const RunOptions opts{.trace = true};
  const RunResult a = run(inst, params, 31337, opts);
  const RunResult b = run(inst, params, 31337, opts);
  EXPECT_EQ(a.tau, b.tau);
  EXPECT_EQ(a.decision, b.decision);
  EXPECT_EQ(a.transitions, b.transitions);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  ASSERT_FALSE(a.trace.empty());
  EXPECT_EQ(a.trace.back().min_z, b.trace.back().min_z);
  EXPECT_EQ(static_cast<long long>(a.trace.size()), a.tau - 4);
}

TEST(Run, TimeoutIsReportedNotSilent) {
  const auto fam = fixtures::family(fixtures::sticky());
  const BanditInstance inst = BanditInstance::from_means(fam, std::vector<double>{0.51, 0.5});
  const StrategyParams params(1.2, 0.01, 2, fam->ratio_constant());
  try {
    run(inst, params, 1, RunOptions{.max_samples = 50});
    FAIL() << "expected a timeout";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTimeout);
  }
}

TEST(Batch, WorkerCountDoesNotChangeRecords) {
  auto serial = parse_config(sticky_config("[0.75, 0.3]", 0.1, 12, 77));
  auto parallel = serial;
  parallel.run.workers = 4;
  const BatchResult a = run_batch(serial);
  const BatchResult b = run_batch(parallel);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].seed, b.records[i].seed);
    EXPECT_EQ(a.records[i].tau, b.records[i].tau);
    EXPECT_EQ(a.records[i].decision, b.records[i].decision);
  }
  EXPECT_EQ(a.report.mean_tau, b.report.mean_tau);
}

TEST(Batch, TimeoutsAreCountedSeparately) {
  auto config = parse_config(sticky_config("[0.51, 0.5]", 0.01, 3, 5));
  config.run.max_samples = 40;
  const BatchResult batch = run_batch(config);
  EXPECT_EQ(batch.report.timeouts, 3);
  EXPECT_EQ(batch.report.errors, 0);
  EXPECT_EQ(batch.report.error_rate, 0.0);
  EXPECT_TRUE(std::isnan(batch.report.mean_tau));
  for (const auto& rec : batch.records) EXPECT_TRUE(rec.timed_out);
}

// Stationary-start trajectories: the expected log-likelihood ratio is exactly
// steps * KL rate.
TEST(LogLikelihoodRatio, MonteCarloMeanMatchesKlRate) {
  const auto fam = fixtures::family(fixtures::sticky());
  const double theta = 0.7, lambda = -0.4;
  const FamilyMember p = fam->member(theta);
  const std::vector<Vector> q{p.stationary};
  const std::vector<double> th{theta}, la{lambda};
  const int reps = 4000, steps = 50;
  Rng rng(2024);
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < reps; ++i) {
    const std::vector<Trajectory> path{simulate(p.kernel, p.stationary, steps, rng)};
    const double llr = log_likelihood_ratio(*fam, path, th, la, q, q);
    sum += llr;
    sum_sq += llr * llr;
  }
  const double mean = sum / reps;
  const double se = std::sqrt((sum_sq / reps - mean * mean) / (reps - 1));
  EXPECT_NEAR(mean, steps * fam->kl_rate_def(theta, lambda), 4.0 * se);
}

}  // namespace

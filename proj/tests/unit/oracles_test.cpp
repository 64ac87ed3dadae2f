// The oracles must themselves be right before they judge anything.
#include <gtest/gtest.h>

#include "oracles.hpp"

namespace {

using mblab::Matrix;
using mblab::Vector;

TEST(Oracles, ClosedFormTwoByTwoMatchesDenseEigenSolver) {
  for (const auto& entries : {std::vector<double>{0.9, 0.1, 0.2, 0.8},
                              std::vector<double>{0.1, 2.0, 0.5, 0.3},
                              std::vector<double>{0.0, 0.1, 0.0, 0.8}}) {
    Matrix m(2, 2);
    m << entries[0], entries[1], entries[2], entries[3];
    const auto t = oracle::pf_2x2(m);
    EXPECT_NEAR(t.rho, oracle::spectral_radius(m), 1e-14);
    EXPECT_LT((m * t.right - t.rho * t.right).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT((m.transpose() * t.left - t.rho * t.left).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Oracles, TwoStateFamilyOfIidBernoulliIsLogistic) {
  Matrix p(2, 2);
  p << 0.5, 0.5, 0.5, 0.5;
  const oracle::TwoStateFamily fam(p, Vector::LinSpaced(2, 0.0, 1.0));
  for (double theta : {-3.0, -0.5, 0.0, 1.0, 4.0}) {
    EXPECT_NEAR(fam.mean(theta), 1.0 / (1.0 + std::exp(-theta)), 1e-15);
    EXPECT_NEAR(fam.log_pf(theta), std::log(0.5 * (1.0 + std::exp(theta))), 1e-14);
  }
  EXPECT_NEAR(fam.kl_mean(0.5, 0.25), oracle::binary_kl(0.5, 0.25), 1e-12);
}

TEST(Oracles, PathEnumerationOfOneStep) {
  Matrix p(2, 2);
  p << 0.9, 0.1, 0.2, 0.8;
  Vector q(2);
  q << 0.25, 0.75;
  const Vector f = Vector::LinSpaced(2, 0.0, 1.0);
  EXPECT_NEAR(oracle::enumerate_tail(p, q, f, 1, 1.0), 0.25 * 0.1 + 0.75 * 0.8, 1e-15);
  EXPECT_NEAR(oracle::enumerate_tail(p, q, f, 3, 0.0), 1.0, 1e-15);
}

TEST(Oracles, GridSearchFindsInteriorMaximum) {
  auto g = [](std::span<const double> w) {
    return -(w[0] - 0.3) * (w[0] - 0.3) - (w[1] - 0.5) * (w[1] - 0.5);
  };
  const auto opt = oracle::simplex_grid_search(g, 3, 0.01);
  EXPECT_NEAR(opt.weights[0], 0.3, 1e-12);
  EXPECT_NEAR(opt.weights[1], 0.5, 1e-12);
}

TEST(Oracles, BinomialTail) {
  EXPECT_NEAR(oracle::binomial_upper_tail(2, 1, 0.5), 0.75, 1e-15);
  EXPECT_NEAR(oracle::binomial_upper_tail(10, 0, 0.3), 1.0, 1e-15);
}

}  // namespace

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "bdarma/diagnostics.hpp"

using namespace bdarma;

namespace {

std::vector<Eigen::MatrixXd> iid_chains(std::size_t chains, std::size_t n, std::size_t d, std::uint64_t seed,
                                        std::vector<double> means = {}) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<Eigen::MatrixXd> out;
  for (std::size_t c = 0; c < chains; ++c) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    const double shift = c < means.size() ? means[c] : 0.0;
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = shift + nd(gen);
    out.push_back(m);
  }
  return out;
}

std::vector<Eigen::MatrixXd> ar1_chains(std::size_t chains, std::size_t n, double rho, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<Eigen::MatrixXd> out;
  const double sd = std::sqrt(1.0 - rho * rho);
  for (std::size_t c = 0; c < chains; ++c) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(n), 1);
    double x = nd(gen);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      x = rho * x + sd * nd(gen);
      m(i, 0) = x;
    }
    out.push_back(m);
  }
  return out;
}

// Split R-hat for two unit-variance chains whose means differ by `gap`:
// the four halves have means {0, 0, gap, gap}.
double mixture_rhat(double gap, double n_half) {
  const double m = 4.0;  // split chains
  const double within = 1.0;
  const double mean_sq = 4.0 * (gap / 2) * (gap / 2) / (m - 1.0);  // variance of the four split means
  const double between = n_half * mean_sq;
  const double var_plus = (n_half - 1.0) / n_half * within + between / n_half;
  return std::sqrt(var_plus / within);
}

}  // namespace

TEST(Rhat, IidChainsNearOne) {
  const Eigen::VectorXd r = compute_rhat(iid_chains(4, 1000, 6, 1));
  for (double v : r) {
    EXPECT_GE(v, 0.99);
    EXPECT_LE(v, 1.01);
  }
}

TEST(Rhat, SeparatedChainsMatchMixtureOracle) {
  const Eigen::VectorXd r = compute_rhat(iid_chains(2, 1000, 1, 2, {0.0, 10.0}));
  EXPECT_GT(r[0], 3.0);
  EXPECT_NEAR(r[0], mixture_rhat(10.0, 500.0), 0.05 * mixture_rhat(10.0, 500.0));
}

TEST(Rhat, ConstantChainsGiveSentinel) {
  std::vector<Eigen::MatrixXd> c(2, Eigen::MatrixXd::Constant(50, 2, 3.0));
  const Eigen::VectorXd r = compute_rhat(c);
  EXPECT_TRUE(std::isinf(r[0]) && r[0] > 0);
  EXPECT_TRUE(std::isinf(compute_rank_rhat(c)[1]));
  EXPECT_TRUE(std::isnan(compute_bulk_ess(c)[0]));
}

TEST(Rhat, RankNormalizedHandlesHeavyTails) {
  std::mt19937_64 gen(3);
  std::cauchy_distribution<double> cd(0.0, 1.0);
  std::vector<Eigen::MatrixXd> chains(4, Eigen::MatrixXd(1000, 1));
  for (auto& c : chains)
    for (Eigen::Index i = 0; i < c.rows(); ++i) c(i, 0) = cd(gen);
  const double r = compute_rank_rhat(chains)[0];
  EXPECT_GE(r, 0.99);
  EXPECT_LE(r, 1.01);
}

TEST(Rhat, RejectsTooFewDraws) {
  EXPECT_THROW(compute_rhat(iid_chains(2, 3, 1, 1)), InvalidInput);
  EXPECT_NO_THROW(compute_rhat(iid_chains(1, 10, 1, 1)));
  EXPECT_THROW(compute_rhat({}), InvalidInput);
  std::vector<Eigen::MatrixXd> ragged{Eigen::MatrixXd::Zero(10, 1), Eigen::MatrixXd::Zero(11, 1)};
  EXPECT_THROW(compute_rhat(ragged), InvalidInput);
}

TEST(BulkEss, IidDrawsNearTotal) {
  const auto chains = iid_chains(4, 1000, 5, 4);
  const Eigen::VectorXd e = compute_bulk_ess(chains);
  for (double v : e) {
    EXPECT_GE(v, 0.8 * 4000);
    EXPECT_LE(v, 1.2 * 4000);
  }
}

TEST(BulkEss, Ar1MatchesAnalyticFactor) {
  const double rho = 0.9;
  const std::size_t n = 5000, chains = 4;
  const double expected = static_cast<double>(n * chains) * (1 - rho) / (1 + rho);
  for (std::uint64_t seed : {5, 6, 7}) {
    const double e = compute_bulk_ess(ar1_chains(chains, n, rho, seed))[0];
    EXPECT_NEAR(e, expected, 0.3 * expected) << seed;
  }
}

TEST(BulkEss, TwoDrawsPerChainIsFiniteAndBounded) {
  const auto chains = iid_chains(3, 2, 2, 8);
  const Eigen::VectorXd e = compute_bulk_ess(chains);
  for (double v : e) {
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_LE(v, 6.0);
  }
}

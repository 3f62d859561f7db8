#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "bdarma/dirichlet.hpp"
#include "test_support.hpp"

using namespace bdarma;

TEST(DirichletLogDensity, UniformOnTwoSimplex) {
  const double v = log_density(Composition{1.0 / 3, 1.0 / 3, 1.0 / 3}, DirichletShape(Eigen::Vector3d(1, 1, 1)));
  EXPECT_NEAR(v, std::log(2.0), 1e-14);
}

TEST(DirichletLogDensity, UniformOnThreeSimplex) {
  const double v =
      log_density(Composition{0.25, 0.25, 0.25, 0.25}, DirichletShape(Eigen::Vector4d(1, 1, 1, 1)));
  EXPECT_NEAR(v, std::log(6.0), 1e-14);
}

TEST(DirichletLogDensity, PermutationInvariant) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(0.2, 20.0);
  for (int i = 0; i < 100; ++i) {
    const Composition y = fixtures::random_interior(4, gen, 0.01);
    Eigen::Vector4d alpha(u(gen), u(gen), u(gen), u(gen));
    const double base = log_density(y, DirichletShape(alpha));
    Eigen::Vector4d yp(y[2], y[0], y[3], y[1]);
    Eigen::Vector4d ap(alpha[2], alpha[0], alpha[3], alpha[1]);
    EXPECT_NEAR(log_density(Composition(yp), DirichletShape(ap)), base, 1e-12 * std::max(1.0, std::abs(base)));
  }
}

TEST(DirichletLogDensity, IntegratesToOneByImportanceSampling) {
  // Proposal: uniform on the 2-simplex (density 2), drawn by sorted spacings.
  std::mt19937_64 gen(99);
  const std::vector<Eigen::Vector3d> shapes{{1.5, 2.0, 3.0}, {4.0, 1.2, 2.5}, {2.0, 2.0, 2.0}};
  for (const auto& alpha : shapes) {
    const DirichletShape shape(alpha);
    const int n = 400000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd y = fixtures::uniform_simplex_point(3, gen);
      if (y.minCoeff() <= 0.0) continue;
      const double w = std::exp(log_density(Composition(y / y.sum()), shape)) / 2.0;
      s += w;
      s2 += w * w;
    }
    const double mean = s / n;
    const double se = std::sqrt((s2 / n - mean * mean) / n);
    EXPECT_NEAR(mean, 1.0, 3.0 * se) << alpha.transpose();
  }
}

TEST(DirichletShapeType, FloorsTinyShapes) {
  const DirichletShape s(Eigen::Vector3d(0.0, 1e-20, 2.0));
  EXPECT_EQ(s.alpha()[0], kShapeFloor);
  EXPECT_EQ(s.alpha()[1], kShapeFloor);
  EXPECT_THROW(DirichletShape(Eigen::Vector3d(-1.0, 1.0, 1.0)), InvalidInput);
  EXPECT_THROW(DirichletShape::from_mean(Composition{0.5, 0.5}, 0.0), InvalidInput);
}

TEST(DirichletSample, MomentsMatch) {
  const Eigen::Vector4d alpha(2.0, 5.0, 12.0, 1.0);
  const double a0 = alpha.sum();
  const std::size_t n = 1000000;
  const auto draws = sample(DirichletShape(alpha), n, 2024);
  for (Eigen::Index j = 0; j < 4; ++j) {
    std::vector<double> xs(n);
    for (std::size_t i = 0; i < n; ++i) xs[i] = draws[i][static_cast<std::size_t>(j)];
    const double mu = alpha[j] / a0;
    const double var = mu * (1 - mu) / (a0 + 1);
    const double m = fixtures::mean(xs);
    EXPECT_NEAR(m, mu, 4.0 * std::sqrt(var / n)) << j;
    // Var of the sample variance ~ (m4 - var^2)/n; use the empirical fourth moment.
    double m4 = 0.0;
    for (double x : xs) m4 += std::pow(x - m, 4);
    m4 /= n;
    const double sv = fixtures::variance(xs);
    EXPECT_NEAR(sv, var, 4.0 * std::sqrt((m4 - sv * sv) / n)) << j;
  }
}

TEST(DirichletSample, DrawsAreInteriorAndReproducible) {
  const DirichletShape shape(Eigen::Vector3d(0.05, 0.3, 1e-6));
  const auto a = sample(shape, 2000, 7);
  const auto b = sample(shape, 2000, 7);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(a[i].parts().sum(), 1.0, 1e-12);
    EXPECT_GT(a[i].parts().minCoeff(), 0.0);
    EXPECT_EQ(a[i].parts(), b[i].parts());
  }
  EXPECT_THROW(sample(shape, 0, 1), InvalidInput);
}

TEST(DirichletLogMoment, MeanOfLogMatchesDigammaDifference) {
  std::mt19937_64 gen(314);
  std::uniform_real_distribution<double> u(0.3, 30.0);
  const std::size_t n = 1000000;
  for (int rep = 0; rep < 10; ++rep) {
    const Eigen::Vector3d alpha(u(gen), u(gen), u(gen));
    const auto draws = sample(DirichletShape(alpha), n, 1000 + rep);
    for (Eigen::Index j = 0; j < 3; ++j) {
      std::vector<double> lg(n);
      for (std::size_t i = 0; i < n; ++i) lg[i] = std::log(draws[i][static_cast<std::size_t>(j)]);
      const double expected = digamma(alpha[j]) - digamma(alpha.sum());
      EXPECT_NEAR(fixtures::mean(lg), expected, 4.0 * std::sqrt(fixtures::variance(lg) / n)) << rep << "," << j;
    }
  }
}

TEST(AlrMean, UniformMeanGivesZero) {
  for (double phi : {0.5, 3.0, 1e4}) {
    const AlrVector g = alr_mean(Composition{0.25, 0.25, 0.25, 0.25}, phi, 3);
    for (double v : g.coords) EXPECT_NEAR(v, 0.0, 1e-15);
  }
}

TEST(AlrMean, MatchesMonteCarlo) {
  const Composition mu{0.2, 0.2, 0.2, 0.4};
  const double phi = 50.0;
  const std::size_t n = 1000000;
  const auto draws = sample(DirichletShape::from_mean(mu, phi), n, 77);
  const AlrVector g = alr_mean(mu, phi, 3);
  for (Eigen::Index k = 0; k < 3; ++k) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = alr(draws[i], 3).coords[k];
    EXPECT_NEAR(fixtures::mean(v), g.coords[k], 4.0 * std::sqrt(fixtures::variance(v) / n));
  }
}

TEST(AlrMean, LargePrecisionApproachesAlr) {
  const Composition mu{0.1, 0.3, 0.2, 0.4};
  const double phi = 1e6;
  const AlrVector g = alr_mean(mu, phi, 3), a = alr(mu, 3);
  double bound = 0.0;
  for (std::size_t j = 0; j < 3; ++j) bound = std::max(bound, std::abs(1.0 / mu[j] - 1.0 / mu[3]));
  bound *= 2.0 / (2.0 * phi);
  for (Eigen::Index k = 0; k < 3; ++k) EXPECT_LE(std::abs(g.coords[k] - a.coords[k]), bound);
}

TEST(AlrMeanExpansion, Limits) {
  const AlrVector e = alr_mean_expansion(Composition{0.25, 0.25, 0.25, 0.25}, 7.0, 3);
  for (double v : e.coords) EXPECT_EQ(v, 0.0);
  const Composition mu{0.1, 0.3, 0.2, 0.4};
  const AlrVector far = alr_mean_expansion(mu, 1e15, 3), a = alr(mu, 3);
  for (Eigen::Index k = 0; k < 3; ++k) EXPECT_NEAR(far.coords[k], a.coords[k], 1e-13);
}

TEST(AlrMeanExpansion, RemainderIsSecondOrder) {
  const Composition mu{0.1, 0.3, 0.2, 0.4};
  auto err = [&](double phi) {
    return (alr_mean(mu, phi, 3).coords - alr_mean_expansion(mu, phi, 3).coords).cwiseAbs().maxCoeff();
  };
  const double ratio = err(100.0) / err(200.0);
  EXPECT_GE(ratio, 3.2);
  EXPECT_LE(ratio, 4.8);
}

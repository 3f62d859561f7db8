#include <gtest/gtest.h>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "bdarma/special.hpp"

using namespace bdarma;

namespace {

// Euler-Mascheroni constant from the Euler-Maclaurin expansion of H_n - ln n.
long double euler_gamma_series() {
  const int n = 10000;
  long double h = 0.0L;
  for (int k = 1; k <= n; ++k) h += 1.0L / k;
  const long double nn = n;
  return h - std::log(nn) - 1.0L / (2 * nn) + 1.0L / (12 * nn * nn) - 1.0L / (120 * nn * nn * nn * nn);
}

double tolerance(double reference) { return 1e-12 * std::max(1.0, std::abs(reference)); }

}  // namespace

TEST(Digamma, AtOneIsMinusEulerGamma) {
  const double g = static_cast<double>(euler_gamma_series());
  EXPECT_NEAR(g, 0.5772156649015329, 1e-15);
  EXPECT_NEAR(digamma(1.0), -g, 1e-14);
}

TEST(Digamma, AtHalfFromDuplication) {
  const double g = static_cast<double>(euler_gamma_series());
  const double expected = -g - 2.0 * std::numbers::ln2;
  EXPECT_NEAR(expected, -1.9635100260214235, 1e-15);
  EXPECT_NEAR(digamma(0.5), expected, 1e-14);
}

TEST(Digamma, RecurrenceAtSpecifiedPoints) {
  for (double x : {0.1, 1.0, 10.0}) EXPECT_NEAR(digamma(x + 1.0) - digamma(x), 1.0 / x, 1e-12) << x;
}

TEST(Digamma, RecurrenceAcrossDomain) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> lx(std::log(1e-8), std::log(1e8));
  for (int i = 0; i < 5000; ++i) {
    const double x = std::exp(lx(gen));
    const double scale = std::max({1.0, 1.0 / x, std::abs(digamma(x))});
    EXPECT_NEAR(digamma(x + 1.0), digamma(x) + 1.0 / x, 1e-12 * scale) << x;
  }
}

TEST(Digamma, MatchesBoostOnLogGrid) {
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> lx(std::log(1e-8), std::log(1e8));
  for (int i = 0; i < 20000; ++i) {
    const double x = std::exp(lx(gen));
    const double ref = boost::math::digamma(x);
    // Relative accuracy except in a small neighbourhood of the root x0 ~ 1.4616.
    EXPECT_NEAR(digamma(x), ref, std::max(1e-12 * std::abs(ref), 2e-15)) << x;
  }
}

TEST(Trigamma, MatchesBoostOnLogGrid) {
  std::mt19937_64 gen(10);
  std::uniform_real_distribution<double> lx(std::log(1e-8), std::log(1e8));
  for (int i = 0; i < 20000; ++i) {
    const double x = std::exp(lx(gen));
    const double ref = boost::math::trigamma(x);
    EXPECT_NEAR(trigamma(x), ref, 1e-12 * ref) << x;
  }
}

TEST(Trigamma, KnownValues) {
  EXPECT_NEAR(trigamma(1.0), std::numbers::pi * std::numbers::pi / 6.0, tolerance(1.6449));
  EXPECT_NEAR(trigamma(0.5), std::numbers::pi * std::numbers::pi / 2.0, tolerance(4.9348));
}

TEST(Trigamma, IsDerivativeOfDigamma) {
  for (double x : {0.05, 0.7, 3.0, 42.0, 1e4}) {
    const double h = 1e-5 * x;
    const double fd = (digamma(x + h) - digamma(x - h)) / (2 * h);
    EXPECT_NEAR(trigamma(x), fd, 1e-6 * trigamma(x)) << x;
  }
}

TEST(SpecialFunctions, DomainErrors) {
  EXPECT_THROW(digamma(0.0), InvalidInput);
  EXPECT_THROW(digamma(-1.5), InvalidInput);
  EXPECT_THROW(digamma(NAN), InvalidInput);
  EXPECT_THROW(trigamma(0.0), InvalidInput);
}

TEST(LogGamma, AgreesWithStd) {
  for (double x : {1e-10, 0.3, 1.0, 2.5, 40.0, 1e6}) EXPECT_NEAR(log_gamma(x), std::lgamma(x), 1e-12 * std::max(1.0, std::abs(std::lgamma(x))));
}

#pragma once

// Digamma, trigamma and a thread-safe log-gamma.

#include <cmath>
#include <limits>

#include "bdarma/error.hpp"

namespace bdarma {

namespace detail {

// Below this the argument is shifted upward by recurrence before the
// asymptotic series is applied; the first omitted term is then < 1e-15.
inline constexpr double kAsymptoticThreshold = 10.0;

inline double digamma_unchecked(double x) {
  double shift = 0.0;
  while (x < kAsymptoticThreshold) {
    shift += 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // Bernoulli terms B_{2n} / (2n x^{2n}) through x^{-12}.
  const double series =
      inv2 * (1.0 / 12 -
              inv2 * (1.0 / 120 -
                      inv2 * (1.0 / 252 - inv2 * (1.0 / 240 - inv2 * (1.0 / 132 - inv2 * (691.0 / 32760))))));
  return std::log(x) - 0.5 * inv - series - shift;
}

inline double trigamma_unchecked(double x) {
  double shift = 0.0;
  while (x < kAsymptoticThreshold) {
    shift += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  const double series =
      inv + 0.5 * inv2 +
      inv * inv2 *
          (1.0 / 6 -
           inv2 * (1.0 / 30 -
                   inv2 * (1.0 / 42 - inv2 * (1.0 / 30 - inv2 * (5.0 / 66 - inv2 * (691.0 / 2730 - inv2 * (7.0 / 6)))))));
  return series + shift;
}

}  // namespace detail

/// psi(x) for x > 0.
inline double digamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) throw InvalidInput("digamma: argument must be positive and finite");
  return detail::digamma_unchecked(x);
}

/// psi'(x) for x > 0.
inline double trigamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) throw InvalidInput("trigamma: argument must be positive and finite");
  return detail::trigamma_unchecked(x);
}

/// log Gamma(x) for x > 0; avoids the global `signgam` written by std::lgamma.
inline double log_gamma(double x) {
#if defined(__GLIBC__) || defined(__APPLE__)
  int sign = 0;
  return ::lgamma_r(x, &sign);
#else
  return std::lgamma(x);
#endif
}

}  // namespace bdarma

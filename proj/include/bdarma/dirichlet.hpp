#pragma once

// Dirichlet kernel: log density, gamma-normalization sampling, and the
// closed-form conditional ALR mean built from digamma differences.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "bdarma/error.hpp"
#include "bdarma/rng.hpp"
#include "bdarma/simplex.hpp"
#include "bdarma/special.hpp"

namespace bdarma {

/// Floor on Dirichlet concentration parameters.
inline constexpr double kShapeFloor = 1e-10;

/// Concentration vector alpha with every entry floored at kShapeFloor.
class DirichletShape {
 public:
  explicit DirichletShape(Eigen::VectorXd alpha) : alpha_(std::move(alpha)) {
    if (alpha_.size() < 2) throw InvalidInput("DirichletShape: need at least two components");
    for (Eigen::Index j = 0; j < alpha_.size(); ++j) {
      if (!std::isfinite(alpha_[j]) || alpha_[j] < 0.0) throw InvalidInput("DirichletShape: invalid concentration");
      alpha_[j] = std::max(alpha_[j], kShapeFloor);
    }
    alpha0_ = alpha_.sum();
    if (!std::isfinite(alpha0_)) throw InvalidInput("DirichletShape: total concentration is not finite");
  }

  /// Shape phi * mu.
  static DirichletShape from_mean(const Composition& mu, double phi) {
    if (!(phi > 0.0) || !std::isfinite(phi)) throw InvalidInput("DirichletShape: precision must be positive");
    return DirichletShape(phi * mu.parts());
  }

  std::size_t size() const { return static_cast<std::size_t>(alpha_.size()); }
  const Eigen::VectorXd& alpha() const { return alpha_; }
  double alpha0() const { return alpha0_; }

 private:
  Eigen::VectorXd alpha_;
  double alpha0_ = 0.0;
};

namespace detail {

/// log f(y | alpha) with alpha already floored; no validation.
inline double dirichlet_log_density(const double* y, const double* alpha, std::size_t J) {
  double alpha0 = 0.0;
  double acc = 0.0;
  for (std::size_t j = 0; j < J; ++j) {
    alpha0 += alpha[j];
    acc += (alpha[j] - 1.0) * std::log(y[j]) - log_gamma(alpha[j]);
  }
  return acc + log_gamma(alpha0);
}

/// Log of a Gamma(alpha, 1) variate (Marsaglia-Tsang squeeze).
///
/// For alpha < 1 the boost X * U^{1/alpha} is applied on the log scale so
/// tiny shapes do not underflow to zero.
inline double log_gamma_variate(double alpha, Rng& rng) {
  const bool boost = alpha < 1.0;
  const double a = boost ? alpha + 1.0 : alpha;
  const double d = a - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  double log_x;
  for (;;) {
    double z, v;
    do {
      z = rng.normal();
      v = 1.0 + c * z;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    const double z2 = z * z;
    if (u < 1.0 - 0.0331 * z2 * z2 || std::log(u) < 0.5 * z2 + d * (1.0 - v + std::log(v))) {
      log_x = std::log(d) + std::log(v);
      break;
    }
  }
  if (boost) log_x += std::log(rng.uniform()) / alpha;
  return log_x;
}

/// One Dirichlet draw written to `out`, floored and closed.
inline void dirichlet_draw_into(const double* alpha, std::size_t J, Rng& rng, double* out) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < J; ++j) {
    out[j] = log_gamma_variate(alpha[j], rng);
    mx = std::max(mx, out[j]);
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < J; ++j) {
    out[j] = std::exp(out[j] - mx);
    sum += out[j];
  }
  double closed = 0.0;
  for (std::size_t j = 0; j < J; ++j) {
    out[j] = std::max(out[j] / sum, kProbFloor);
    closed += out[j];
  }
  for (std::size_t j = 0; j < J; ++j) out[j] /= closed;
}

/// g(mu, phi)_k = psi(phi mu_c(k)) - psi(phi mu_ref), shapes floored.
inline void alr_mean_into(const double* mu, std::size_t J, double phi, std::size_t ref, double* out) {
  const double psi_ref = digamma_unchecked(std::max(phi * mu[ref], kShapeFloor));
  for (std::size_t k = 0; k + 1 < J; ++k)
    out[k] = digamma_unchecked(std::max(phi * mu[alr_component(k, ref)], kShapeFloor)) - psi_ref;
}

}  // namespace detail

inline double log_density(const Composition& y, const DirichletShape& shape) {
  if (y.size() != shape.size()) throw InvalidInput("log_density: dimension mismatch");
  return detail::dirichlet_log_density(y.parts().data(), shape.alpha().data(), y.size());
}

/// n independent draws, reproducible from `rng_seed`.
inline std::vector<Composition> sample(const DirichletShape& shape, std::size_t n, std::uint64_t rng_seed) {
  if (n == 0) throw InvalidInput("sample: n must be at least one");
  Rng rng(rng_seed);
  std::vector<Composition> draws;
  draws.reserve(n);
  Eigen::VectorXd buf(static_cast<Eigen::Index>(shape.size()));
  for (std::size_t i = 0; i < n; ++i) {
    detail::dirichlet_draw_into(shape.alpha().data(), shape.size(), rng, buf.data());
    draws.emplace_back(buf);
  }
  return draws;
}

/// Conditional mean of alr(Y) for Y ~ Dir(phi * mu).
inline AlrVector alr_mean(const Composition& mu, double phi, std::size_t ref) {
  if (!(phi > 0.0) || !std::isfinite(phi)) throw InvalidInput("alr_mean: precision must be positive");
  if (ref >= mu.size()) throw InvalidInput("alr_mean: reference index out of range");
  AlrVector out{Eigen::VectorXd(static_cast<Eigen::Index>(mu.size() - 1)), ref};
  detail::alr_mean_into(mu.parts().data(), mu.size(), phi, ref, out.coords.data());
  return out;
}

/// Two-term large-precision expansion of alr_mean:
/// log(mu_j / mu_ref) - (1/(2 phi)) (1/mu_j - 1/mu_ref).
inline AlrVector alr_mean_expansion(const Composition& mu, double phi, std::size_t ref) {
  if (!(phi > 0.0) || !std::isfinite(phi)) throw InvalidInput("alr_mean_expansion: precision must be positive");
  AlrVector out = alr(mu, ref);
  for (std::size_t k = 0; k + 1 < mu.size(); ++k) {
    const double mj = mu[alr_component(k, ref)];
    out.coords[static_cast<Eigen::Index>(k)] -= (1.0 / (2.0 * phi)) * (1.0 / mj - 1.0 / mu[ref]);
  }
  return out;
}

}  // namespace bdarma

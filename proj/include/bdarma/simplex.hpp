#pragma once

// Compositions on the open simplex and the additive log-ratio chart.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "bdarma/error.hpp"

namespace bdarma {

/// Default probability floor applied to raw shares before closure.
inline constexpr double kProbFloor = 1e-10;

/// Strictly positive J-vector summing to one, J >= 2.
class Composition {
 public:
  Composition() = default;

  /// Validates positivity, finiteness and closure (|sum - 1| <= 1e-12).
  explicit Composition(Eigen::VectorXd parts) : parts_(std::move(parts)) {
    if (parts_.size() < 2) throw InvalidInput("composition needs at least two parts");
    double sum = 0.0;
    for (Eigen::Index j = 0; j < parts_.size(); ++j) {
      const double v = parts_[j];
      if (!std::isfinite(v) || v <= 0.0)
        throw InvalidInput("composition part " + std::to_string(j) + " is not strictly positive: " +
                           std::to_string(v));
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw InvalidInput("composition does not sum to one (sum = " + std::to_string(sum) + ")");
  }

  Composition(std::initializer_list<double> parts)
      : Composition(Eigen::Map<const Eigen::VectorXd>(parts.begin(), static_cast<Eigen::Index>(parts.size()))) {}

  std::size_t size() const { return static_cast<std::size_t>(parts_.size()); }
  double operator[](std::size_t j) const { return parts_[static_cast<Eigen::Index>(j)]; }
  const Eigen::VectorXd& parts() const { return parts_; }

 private:
  Eigen::VectorXd parts_;
};

/// J-1 log-ratio coordinates against the component `ref` (zero-based).
///
/// Coordinates are ordered by ascending component index with `ref` skipped.
struct AlrVector {
  Eigen::VectorXd coords;
  std::size_t ref = 0;

  std::size_t parts() const { return static_cast<std::size_t>(coords.size()) + 1; }
};

/// Component index addressed by ALR coordinate k.
inline std::size_t alr_component(std::size_t k, std::size_t ref) { return k < ref ? k : k + 1; }

/// Floors each share at eps_prob and renormalizes the row.
inline Composition floor_and_close(std::span<const double> raw, double eps_prob = kProbFloor) {
  if (raw.size() < 2) throw InvalidInput("floor_and_close: need at least two entries");
  if (!(eps_prob > 0.0) || !std::isfinite(eps_prob)) throw InvalidInput("floor_and_close: eps_prob must be positive");
  bool any_positive = false;
  for (double v : raw) {
    if (!std::isfinite(v)) throw InvalidInput("floor_and_close: non-finite entry");
    if (v < 0.0) throw InvalidInput("floor_and_close: negative entry");
    any_positive = any_positive || v > 0.0;
  }
  if (!any_positive) throw InvalidInput("floor_and_close: all entries are zero");

  double total = 0.0;
  for (double v : raw) total += v;
  Eigen::VectorXd out(static_cast<Eigen::Index>(raw.size()));
  // Close first so the floor acts on shares, then floor and re-close.
  double sum = 0.0;
  for (std::size_t j = 0; j < raw.size(); ++j) {
    const double share = std::max(raw[j] / total, eps_prob);
    out[static_cast<Eigen::Index>(j)] = share;
    sum += share;
  }
  out /= sum;
  return Composition(std::move(out));
}

inline Composition floor_and_close(const Eigen::VectorXd& raw, double eps_prob = kProbFloor) {
  return floor_and_close(std::span<const double>(raw.data(), static_cast<std::size_t>(raw.size())), eps_prob);
}

inline AlrVector alr(const Composition& y, std::size_t ref) {
  const std::size_t J = y.size();
  if (ref >= J) throw InvalidInput("alr: reference index out of range");
  AlrVector out{Eigen::VectorXd(static_cast<Eigen::Index>(J - 1)), ref};
  const double log_ref = std::log(y[ref]);
  for (std::size_t k = 0; k + 1 < J; ++k)
    out.coords[static_cast<Eigen::Index>(k)] = std::log(y[alr_component(k, ref)]) - log_ref;
  return out;
}

/// Softmax with the reference pinned at zero; writes J shares into `out`.
///
/// Uses max-subtraction, so the result is finite for any finite input.
inline void alr_inv_into(const double* eta, std::size_t K, std::size_t ref, double* out) {
  double mx = 0.0;
  for (std::size_t k = 0; k < K; ++k) mx = std::max(mx, eta[k]);
  double sum = 0.0;
  out[ref] = std::exp(-mx);
  sum += out[ref];
  for (std::size_t k = 0; k < K; ++k) {
    const double w = std::exp(eta[k] - mx);
    out[alr_component(k, ref)] = w;
    sum += w;
  }
  const double inv = 1.0 / sum;
  for (std::size_t j = 0; j <= K; ++j) out[j] *= inv;
}

inline Composition alr_inv(const AlrVector& eta) {
  const auto K = static_cast<std::size_t>(eta.coords.size());
  if (eta.ref > K) throw InvalidInput("alr_inv: reference index out of range");
  for (Eigen::Index k = 0; k < eta.coords.size(); ++k)
    if (!std::isfinite(eta.coords[k])) throw InvalidInput("alr_inv: non-finite coordinate");
  Eigen::VectorXd mu(static_cast<Eigen::Index>(K + 1));
  alr_inv_into(eta.coords.data(), K, eta.ref, mu.data());
  // Extreme inputs can underflow a part to exactly zero; keep the result interior.
  bool underflow = false;
  for (Eigen::Index j = 0; j < mu.size(); ++j) underflow = underflow || !(mu[j] > 0.0);
  if (underflow) {
    for (Eigen::Index j = 0; j < mu.size(); ++j) mu[j] = std::max(mu[j], std::numeric_limits<double>::min());
    mu /= mu.sum();
  }
  return Composition(std::move(mu));
}

}  // namespace bdarma

#pragma once

// Synthetic panels: exogenous designs plus a simulated composition path.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>

#include "bdarma/darma.hpp"
#include "bdarma/ingest.hpp"
#include "bdarma/panel.hpp"
#include "bdarma/rng.hpp"

namespace bdarma {

/// Stationary AR(1) with unit marginal variance.
inline Eigen::VectorXd ar1_series(std::size_t T, Rng& rng, double rho = 0.8) {
  Eigen::VectorXd z(static_cast<Eigen::Index>(T));
  const double sd = std::sqrt(1.0 - rho * rho);
  double x = rng.normal();
  for (Eigen::Index t = 0; t < z.size(); ++t) {
    z[t] = x;
    x = rho * x + sd * rng.normal();
  }
  return z;
}

/// Panel simulated from `params`. X is an intercept plus AR(1) columns when
/// M > 1; Z is an intercept plus AR(1) columns, the first of which is kept
/// as `z_raw` and standardized on the rows before the fixed holdout.
inline SeriesPanel synthetic_panel(const DarmaSpec& spec, const DarmaParams& params, std::size_t T, std::uint64_t seed) {
  spec.validate();
  if (T < 2) throw InvalidInput("synthetic_panel: T must be at least 2");
  Rng design(seed, 0xD351);
  Eigen::MatrixXd X = intercept_design(T);
  X.conservativeResize(Eigen::NoChange, static_cast<Eigen::Index>(spec.M));
  for (Eigen::Index m = 1; m < X.cols(); ++m) X.col(m) = ar1_series(T, design);
  Eigen::MatrixXd Z = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(spec.R));
  Eigen::VectorXd z_raw;
  for (Eigen::Index r = 1; r < Z.cols(); ++r) {
    const Eigen::VectorXd z = ar1_series(T, design);
    if (r == 1) {
      z_raw = z;
      Z.col(r) = standardize_on_prefix(z, T - holdout_weeks(T));
    } else {
      Z.col(r) = z;
    }
  }
  SeriesPanel p = simulate(spec, params, T, X, Z, seed);
  p.z_raw = z_raw;
  if (z_raw.size() > 0) p.meta.z_train_len = T - holdout_weeks(T);
  return p;
}

}  // namespace bdarma

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "bdarma/error.hpp"
#include "bdarma/simplex.hpp"

namespace bdarma {

/// Provenance carried alongside a panel.
struct PanelMeta {
  std::vector<std::string> components;  // names of the J parts, in column order
  std::vector<std::string> source_ids;  // series ids in role order (total, cash, securities, loans)
  std::string seasonal_mode;            // "SA", "NSA", or empty for synthetic data
  double eps_prob = kProbFloor;
  std::size_t z_train_len = 0;          // rows used to standardize the precision regressor
  double negative_other_fraction = 0.0;
  std::string trim_cutoff;              // rows are strictly after this date
};

/// Dated compositions with mean design X (T x M) and precision design Z (T x R).
///
/// Rows of Y are validated compositions. `z_raw` keeps the unstandardized
/// precision regressor when the panel came from ingestion.
struct SeriesPanel {
  std::vector<std::string> dates;
  Eigen::MatrixXd Y;
  Eigen::MatrixXd X;
  Eigen::MatrixXd Z;
  Eigen::VectorXd z_raw;
  PanelMeta meta;

  std::size_t rows() const { return static_cast<std::size_t>(Y.rows()); }
  std::size_t parts() const { return static_cast<std::size_t>(Y.cols()); }

  Composition composition(std::size_t t) const {
    return Composition(Eigen::VectorXd(Y.row(static_cast<Eigen::Index>(t)).transpose()));
  }

  /// Throws InvalidInput unless the panel is internally consistent.
  void validate() const {
    const auto T = Y.rows();
    if (Y.cols() < 2) throw InvalidInput("panel: need at least two components");
    if (X.rows() != T || Z.rows() != T) throw InvalidInput("panel: design rows do not match Y");
    if (!dates.empty() && static_cast<Eigen::Index>(dates.size()) != T)
      throw InvalidInput("panel: date count does not match Y");
    for (Eigen::Index t = 0; t < T; ++t) {
      double sum = 0.0;
      for (Eigen::Index j = 0; j < Y.cols(); ++j) {
        if (!(Y(t, j) > 0.0) || !std::isfinite(Y(t, j)))
          throw InvalidInput("panel: row " + std::to_string(t) + " is not strictly positive");
        sum += Y(t, j);
      }
      if (std::abs(sum - 1.0) > 1e-12) throw InvalidInput("panel: row " + std::to_string(t) + " does not sum to one");
    }
    if (!X.allFinite() || !Z.allFinite()) throw InvalidInput("panel: non-finite covariates");
  }

  /// First n rows.
  SeriesPanel head(std::size_t n) const {
    if (n > rows()) throw InvalidInput("panel: head(" + std::to_string(n) + ") exceeds " + std::to_string(rows()) + " rows");
    SeriesPanel out;
    const auto rows_n = static_cast<Eigen::Index>(n);
    if (!dates.empty()) out.dates.assign(dates.begin(), dates.begin() + static_cast<std::ptrdiff_t>(n));
    out.Y = Y.topRows(rows_n);
    out.X = X.topRows(rows_n);
    out.Z = Z.topRows(rows_n);
    if (z_raw.size() >= rows_n) out.z_raw = z_raw.head(rows_n);
    out.meta = meta;
    return out;
  }
};

/// Intercept-only design with T rows.
inline Eigen::MatrixXd intercept_design(std::size_t T) { return Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(T), 1); }

}  // namespace bdarma

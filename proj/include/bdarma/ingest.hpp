#pragma once

// Bank-asset panel construction from weekly level series: CSV parsing,
// alignment, residual "other", trimming, floors, the precision regressor
// and augmented Dickey-Fuller checks.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bdarma/csv.hpp"
#include "bdarma/dates.hpp"
#include "bdarma/error.hpp"
#include "bdarma/panel.hpp"
#include "bdarma/simplex.hpp"

namespace bdarma {

struct RawSeries {
  std::string id;
  std::vector<std::string> dates;  // ISO, strictly increasing
  std::vector<double> values;
  std::size_t size() const { return dates.size(); }
};

/// Parses a two-column series CSV. The date column may be named DATE, date
/// or observation_date; the first other column holds values and "." marks a
/// missing observation.
inline RawSeries parse_series_csv(const std::string& text, const std::string& id) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  RawSeries s;
  s.id = id;
  long date_col = -1, value_col = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (line.empty() || line == "\r") continue;
    const auto f = csv::split_line(line);
    if (date_col < 0) {
      for (std::size_t i = 0; i < f.size(); ++i) {
        if (f[i] == "DATE" || f[i] == "date" || f[i] == "observation_date") {
          if (date_col < 0) date_col = static_cast<long>(i);
        } else if (value_col < 0) {
          value_col = static_cast<long>(i);
        }
      }
      if (date_col < 0) throw FormatError(id + ": line " + std::to_string(lineno) + ": no DATE/date/observation_date column");
      if (value_col < 0) throw FormatError(id + ": line " + std::to_string(lineno) + ": no value column");
      continue;
    }
    const auto need = static_cast<std::size_t>(std::max(date_col, value_col));
    if (f.size() <= need) throw FormatError(id + ": line " + std::to_string(lineno) + ": too few fields");
    const std::string& v = f[static_cast<std::size_t>(value_col)];
    if (v == "." || v.empty()) continue;
    const std::string& d = f[static_cast<std::size_t>(date_col)];
    double x = 0.0;
    try {
      dates::parse(d);
      x = csv::parse_double(v);
    } catch (const FormatError& e) {
      throw FormatError(id + ": line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!std::isfinite(x)) throw FormatError(id + ": line " + std::to_string(lineno) + ": non-finite value");
    if (!s.dates.empty() && dates::parse(d) <= dates::parse(s.dates.back()))
      throw FormatError(id + ": line " + std::to_string(lineno) + ": dates are not strictly increasing");
    s.dates.push_back(dates::format(dates::parse(d)));
    s.values.push_back(x);
  }
  if (date_col < 0) throw FormatError(id + ": empty file");
  return s;
}

/// Series roles in column order of the level panel.
inline const std::vector<std::string>& series_roles() {
  static const std::vector<std::string> roles{"total", "cash", "securities", "loans"};
  return roles;
}

/// Candidate ids per role for seasonally adjusted and unadjusted data. The
/// first available id wins within a mode.
/// Download pattern; "{id}" is replaced by the series id.
inline constexpr const char* kDefaultEndpoint = "https://fred.stlouisfed.org/graph/fredgraph.csv?id={id}";

struct SeriesCandidates {
  std::map<std::string, std::vector<std::string>> sa, nsa;
};

inline SeriesCandidates default_series_ids() {
  SeriesCandidates c;
  c.sa = {{"total", {"TLAACBW027SBOG"}},
          {"cash", {"CASACBW027SBOG"}},
          {"securities", {"SBCACBW027SBOG"}},
          {"loans", {"TOTLL", "LLBACBW027SBOG"}}};
  c.nsa = {{"total", {"TLAACBW027NBOG"}},
           {"cash", {"CASACBW027NBOG"}},
           {"securities", {"SBCACBW027NBOG"}},
           {"loans", {"TOTLLNSA", "LLBACBW027NBOG"}}};
  return c;
}

struct ResolvedSeries {
  std::map<std::string, RawSeries> by_role;
  std::string mode;  // "SA" or "NSA"
};

/// Picks one series per role. Seasonally adjusted ids are used for every
/// role when all are available; otherwise every role switches to unadjusted.
/// `source` returns nullopt for an unavailable id and throws on hard errors.
inline ResolvedSeries resolve_series(const std::function<std::optional<RawSeries>(const std::string&)>& source,
                                     const SeriesCandidates& ids = default_series_ids()) {
  auto try_mode = [&](const std::map<std::string, std::vector<std::string>>& table,
                      std::string& missing) -> std::optional<std::map<std::string, RawSeries>> {
    std::map<std::string, RawSeries> out;
    for (const auto& role : series_roles()) {
      const auto it = table.find(role);
      if (it == table.end()) throw InvalidInput("series ids: no candidates for role " + role);
      bool found = false;
      for (const auto& id : it->second)
        if (auto s = source(id)) {
          out[role] = std::move(*s);
          found = true;
          break;
        }
      if (!found) {
        missing = role;
        return std::nullopt;
      }
    }
    return out;
  };
  std::string missing;
  if (auto sa = try_mode(ids.sa, missing)) return {std::move(*sa), "SA"};
  const std::string sa_missing = missing;
  if (auto nsa = try_mode(ids.nsa, missing)) return {std::move(*nsa), "NSA"};
  throw FetchError("no usable series for role '" + missing + "' (adjusted series also missing for '" + sa_missing +
                   "')");
}

/// Sorted intersection of the date sets of all series.
inline std::vector<std::string> inner_join_dates(const std::vector<const RawSeries*>& series) {
  if (series.empty()) return {};
  std::vector<std::string> common = series.front()->dates;
  for (std::size_t i = 1; i < series.size(); ++i) {
    std::vector<std::string> next;
    std::set_intersection(common.begin(), common.end(), series[i]->dates.begin(), series[i]->dates.end(),
                          std::back_inserter(next));
    common = std::move(next);
  }
  return common;
}

struct PrecisionRegressor {
  Eigen::VectorXd r;      // RMS of ALR increments
  Eigen::VectorXd r4;     // trailing four-week mean, leading values filled
  Eigen::VectorXd z_vol;  // r4 lagged one week
  Eigen::VectorXd z;      // z_vol standardized on the first train_len rows
  double train_mean = 0.0;
  double train_sd = 1.0;
};

/// Standardizes `z_vol` with mean and sd (n - 1) over its first `train_len`
/// rows. The sd is replaced by 1 when it is not positive and finite.
inline Eigen::VectorXd standardize_on_prefix(const Eigen::VectorXd& z_vol, std::size_t train_len, double* mean_out = nullptr,
                                             double* sd_out = nullptr) {
  if (train_len < 1 || train_len > static_cast<std::size_t>(z_vol.size()))
    throw InvalidInput("standardize: training length outside [1, T]");
  const auto n = static_cast<Eigen::Index>(train_len);
  const double mean = z_vol.head(n).mean();
  double sd = n > 1 ? std::sqrt((z_vol.head(n).array() - mean).square().sum() / static_cast<double>(n - 1))
                    : std::nan("");
  if (!(sd > 0.0) || !std::isfinite(sd)) sd = 1.0;
  if (mean_out) *mean_out = mean;
  if (sd_out) *sd_out = sd;
  return (z_vol.array() - mean) / sd;
}

inline PrecisionRegressor precision_regressor(const Eigen::MatrixXd& Y, std::size_t ref, std::size_t train_len) {
  const auto T = Y.rows();
  if (T < 2) throw InvalidInput("precision_regressor: need at least two rows");
  if (ref >= static_cast<std::size_t>(Y.cols())) throw InvalidInput("precision_regressor: reference out of range");
  const auto K = Y.cols() - 1;
  PrecisionRegressor out;
  out.r.resize(T);
  Eigen::VectorXd prev = Eigen::VectorXd::Zero(K), eta(K);
  for (Eigen::Index t = 0; t < T; ++t) {
    const double lr = std::log(Y(t, static_cast<Eigen::Index>(ref)));
    for (Eigen::Index k = 0; k < K; ++k)
      eta[k] = std::log(Y(t, static_cast<Eigen::Index>(alr_component(static_cast<std::size_t>(k), ref)))) - lr;
    out.r[t] = std::sqrt((eta - prev).squaredNorm() / static_cast<double>(K));
    prev = eta;
  }
  out.r4.resize(T);
  for (Eigen::Index t = 3; t < T; ++t) out.r4[t] = out.r.segment(t - 3, 4).mean();
  // The first three values are undefined for a past-only filter and take
  // the first defined value; a panel shorter than four rows uses the mean.
  const double fill = T >= 4 ? out.r4[3] : out.r.mean();
  for (Eigen::Index t = 0; t < std::min<Eigen::Index>(3, T); ++t) out.r4[t] = fill;
  out.z_vol.resize(T);
  out.z_vol[0] = out.r4[0];
  for (Eigen::Index t = 1; t < T; ++t) out.z_vol[t] = out.r4[t - 1];
  out.z = standardize_on_prefix(out.z_vol, train_len, &out.train_mean, &out.train_sd);
  return out;
}

/// Rewrites the precision design column from `z_raw` standardized on the
/// first `train_len` rows.
inline void restandardize(SeriesPanel& panel, std::size_t train_len) {
  if (panel.z_raw.size() != static_cast<Eigen::Index>(panel.rows()) || panel.Z.cols() < 2)
    throw InvalidInput("restandardize: panel has no raw precision regressor");
  panel.Z.col(1) = standardize_on_prefix(panel.z_raw, train_len);
  panel.meta.z_train_len = train_len;
}

/// Last min(104, floor(T / 4)) rows form the fixed holdout.
inline std::size_t holdout_weeks(std::size_t T) { return std::min<std::size_t>(104, T / 4); }

struct BuildConfig {
  int years = 10;
  double eps_prob = kProbFloor;
  double max_negative_fraction = 0.05;
  std::size_t ref = 2;
  std::size_t train_len = 0;  // 0: T minus the fixed holdout
};

/// Aligned levels in role order (total, cash, securities, loans) with dates.
struct LevelPanel {
  std::vector<std::string> dates;
  Eigen::MatrixXd levels;  // T x 4
};

inline LevelPanel align_levels(const std::map<std::string, RawSeries>& by_role, int years) {
  std::vector<const RawSeries*> ordered;
  for (const auto& role : series_roles()) {
    const auto it = by_role.find(role);
    if (it == by_role.end()) throw InvalidInput("build_panel: missing series for role " + role);
    ordered.push_back(&it->second);
  }
  const std::vector<std::string> common = inner_join_dates(ordered);
  if (common.empty()) throw InvalidInput("build_panel: series share no dates");
  const std::string cutoff = dates::minus_years(common.back(), years);
  LevelPanel lp;
  for (const auto& d : common)
    if (d > cutoff) lp.dates.push_back(d);
  lp.levels.resize(static_cast<Eigen::Index>(lp.dates.size()), 4);
  for (std::size_t c = 0; c < ordered.size(); ++c) {
    const RawSeries& s = *ordered[c];
    std::size_t i = 0;
    for (std::size_t t = 0; t < lp.dates.size(); ++t) {
      while (s.dates[i] != lp.dates[t]) ++i;
      lp.levels(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c)) = s.values[i];
    }
  }
  return lp;
}

/// Shares (cash, securities, loans, other) from levels, with the residual
/// "other" clamped at zero before the floor.
inline Eigen::MatrixXd shares_from_levels(const Eigen::MatrixXd& levels, double eps_prob, double* negative_fraction) {
  const auto T = levels.rows();
  Eigen::MatrixXd Y(T, 4);
  std::size_t negative = 0;
  for (Eigen::Index t = 0; t < T; ++t) {
    const double total = levels(t, 0);
    if (!(total > 0.0)) throw InvalidInput("build_panel: total assets not positive at row " + std::to_string(t));
    const double other = total - levels(t, 1) - levels(t, 2) - levels(t, 3);
    if (other < 0.0) ++negative;
    double sum = 0.0;
    for (Eigen::Index j = 0; j < 4; ++j) {
      const double level = j < 3 ? levels(t, j + 1) : std::max(other, 0.0);
      if (level < 0.0) throw InvalidInput("build_panel: negative level at row " + std::to_string(t));
      Y(t, j) = std::max(level / total, eps_prob);
      sum += Y(t, j);
    }
    Y.row(t) /= sum;
  }
  if (negative_fraction) *negative_fraction = T ? static_cast<double>(negative) / static_cast<double>(T) : 0.0;
  return Y;
}

/// Full panel build. Throws IntegrityError when more than 5% of weeks have
/// a negative residual; a smaller positive fraction is kept in the meta.
inline SeriesPanel build_panel(const std::map<std::string, RawSeries>& by_role, const BuildConfig& cfg = {},
                               const std::string& seasonal_mode = "") {
  const LevelPanel lp = align_levels(by_role, cfg.years);
  const auto T = static_cast<std::size_t>(lp.levels.rows());
  double frac = 0.0;
  Eigen::MatrixXd Y = shares_from_levels(lp.levels, cfg.eps_prob, &frac);
  if (frac > cfg.max_negative_fraction) {
    std::ostringstream msg;
    msg << std::fixed << std::setprecision(4) << "residual 'other' is negative in a fraction " << frac
        << " of weeks (limit " << cfg.max_negative_fraction
        << "); check the securities/loans series ids and seasonal consistency";
    throw IntegrityError(msg.str(), frac);
  }
  if (T < 2) throw InvalidInput("build_panel: fewer than two aligned weeks");

  SeriesPanel p;
  p.dates = lp.dates;
  p.Y = std::move(Y);
  p.X = intercept_design(T);
  const std::size_t train = cfg.train_len ? cfg.train_len : T - holdout_weeks(T);
  const PrecisionRegressor pr = precision_regressor(p.Y, cfg.ref, train);
  p.z_raw = pr.z_vol;
  p.Z.resize(static_cast<Eigen::Index>(T), 2);
  p.Z.col(0).setOnes();
  p.Z.col(1) = pr.z;
  p.meta.components = {"cash", "secr", "loans", "other"};
  for (const auto& role : series_roles()) p.meta.source_ids.push_back(by_role.at(role).id);
  p.meta.seasonal_mode = seasonal_mode;
  p.meta.eps_prob = cfg.eps_prob;
  p.meta.z_train_len = train;
  p.meta.negative_other_fraction = frac;
  p.meta.trim_cutoff = dates::minus_years(lp.dates.empty() ? "2000-01-01" : lp.dates.back(), cfg.years);
  p.validate();
  return p;
}

struct AdfResult {
  double t_stat = 0.0;
  bool reject_5pct = false;
  std::size_t observations = 0;
};

inline constexpr double kAdfCritical5 = -2.86;

/// OLS of dy_t on (1, y_{t-1}, dy_{t-1}, ..., dy_{t-lags}); the statistic is
/// the t-ratio of the y_{t-1} coefficient.
inline AdfResult adf_test(const std::vector<double>& y, std::size_t lags = 6, bool with_drift = true) {
  const std::size_t n = y.size();
  if (n <= lags + 2) throw InvalidInput("adf: series too short for " + std::to_string(lags) + " lags");
  const std::size_t rows = n - 1 - lags;
  const std::size_t cols = (with_drift ? 1 : 0) + 1 + lags;
  if (rows <= cols) throw InvalidInput("adf: fewer observations than regressors");
  Eigen::MatrixXd D(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  Eigen::VectorXd dy(static_cast<Eigen::Index>(rows));
  for (std::size_t i = 0; i < rows; ++i) {
    const std::size_t t = i + 1 + lags;
    const auto r = static_cast<Eigen::Index>(i);
    Eigen::Index c = 0;
    if (with_drift) D(r, c++) = 1.0;
    D(r, c++) = y[t - 1];
    for (std::size_t l = 1; l <= lags; ++l) D(r, c++) = y[t - l] - y[t - l - 1];
    dy[r] = y[t] - y[t - 1];
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(D);
  if (qr.rank() < static_cast<Eigen::Index>(cols)) throw NumericalError("adf: singular design");
  const Eigen::VectorXd b = qr.solve(dy);
  const double s2 = (dy - D * b).squaredNorm() / static_cast<double>(rows - cols);
  const Eigen::MatrixXd xtx_inv = (D.transpose() * D).inverse();
  const Eigen::Index k = with_drift ? 1 : 0;
  const double se = std::sqrt(s2 * xtx_inv(k, k));
  if (!(se > 0.0) || !std::isfinite(se)) throw NumericalError("adf: degenerate residual variance");
  AdfResult out;
  out.t_stat = b[k] / se;
  out.reject_5pct = out.t_stat < kAdfCritical5;
  out.observations = rows;
  return out;
}

}  // namespace bdarma

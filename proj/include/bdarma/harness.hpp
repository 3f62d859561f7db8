#pragma once

// Fixed-holdout and rolling-origin comparisons of the raw and centered
// variants, plus report files.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "bdarma/csv.hpp"
#include "bdarma/darma.hpp"
#include "bdarma/error.hpp"
#include "bdarma/forecast.hpp"
#include "bdarma/inference.hpp"
#include "bdarma/ingest.hpp"
#include "bdarma/io.hpp"
#include "bdarma/parallel.hpp"
#include "json.hpp"

namespace bdarma {

enum class Design { FixedHoldout, Rolling };

inline std::string to_string(Design d) { return d == Design::FixedHoldout ? "fixed" : "rolling"; }

inline Design parse_design(const std::string& s) {
  if (s == "fixed") return Design::FixedHoldout;
  if (s == "rolling") return Design::Rolling;
  throw InvalidInput("design must be 'fixed' or 'rolling', got '" + s + "'");
}

struct EvalConfig {
  Design design = Design::Rolling;
  DarmaSpec spec;  // the variant field is ignored; both variants are run
  PriorScales prior;
  SamplerConfig sampler_full = SamplerConfig::full();
  SamplerConfig sampler_light = SamplerConfig::light();
  RefitPolicy refit;
  std::size_t min_train = 104;
  std::size_t n_origins = 104;       // rolling: the last n eligible origins
  std::size_t holdout_draws = 400;   // posterior draws used per holdout week
  std::size_t rolling_draws = 200;   // posterior draws used per origin
  std::uint64_t seed = 1;
  std::size_t jobs = 1;
};

/// One scored one-step forecast: a holdout week or a rolling origin.
struct StepRecord {
  std::size_t t = 0;  // zero-based row being forecast
  std::string date;
  double lpd[2] = {0.0, 0.0};       // [raw, centered]
  double rmse[2] = {0.0, 0.0};      // over the J components of this step
  double mae[2] = {0.0, 0.0};
  double coverage[2] = {0.0, 0.0};  // share of components covered
  std::size_t divergences[2] = {0, 0};
  std::size_t attempts[2] = {0, 0};
  bool failed[2] = {false, false};
  std::string status = "ok";  // or "skipped: <reason>"

  bool ok() const { return status == "ok"; }
  double diff() const { return lpd[1] - lpd[0]; }
};

/// Diagnostics of one fit.
struct FitRecord {
  std::string scope;  // "holdout" or the origin row
  Variant variant = Variant::Raw;
  std::size_t divergences = 0, treedepth_hits = 0, attempts = 0;
  double rhat_max = 0.0, ess_min = 0.0, mean_accept = 0.0;
  bool failed = false;
};

struct VariantTotals {
  double elpd_sum = 0.0;
  double rmse_mean = 0.0;  // mean of per-step values
  double mae_mean = 0.0;
  double coverage_mean = 0.0;
  double rmse_pooled = 0.0;  // over every (step, component) pair
  double mae_pooled = 0.0;
  std::size_t divergences = 0;
  std::size_t fits = 0;
  std::size_t fits_with_divergence = 0;
  std::size_t attempts = 0;
  std::size_t failed_fits = 0;
};

struct EvalReport {
  Design design = Design::Rolling;
  std::size_t T = 0, T_train = 0, T_test = 0;
  std::vector<StepRecord> steps;
  std::vector<FitRecord> fits;
  VariantTotals totals[2];  // [raw, centered]
  std::size_t wins = 0, losses = 0, ties = 0;  // centered vs raw per step
  std::vector<double> cum_elpd;                // running sum of diff over ok steps
  nlohmann::json config;
};

inline constexpr double kTieTolerance = 1e-12;

namespace detail {

inline std::size_t vi(Variant v) { return v == Variant::Raw ? 0 : 1; }

inline DarmaSpec with_variant(DarmaSpec s, Variant v) {
  s.variant = v;
  return s;
}

inline PosteriorDraws fit_variant(const DarmaSpec& spec, const SeriesPanel& train, const PriorScales& prior,
                                  const SamplerConfig& cfg, const RefitPolicy& policy) {
  const DarmaPosterior target(spec, train, prior);
  PosteriorDraws d = fit_with_refit(target, spec.dimension(), cfg, policy);
  d.names = parameter_names(spec);
  return d;
}

inline FitRecord fit_record(const std::string& scope, Variant v, const DiagnosticsReport& d) {
  FitRecord f;
  f.scope = scope;
  f.variant = v;
  f.divergences = d.divergences;
  f.treedepth_hits = d.treedepth_hits;
  f.attempts = d.attempts;
  f.rhat_max = d.rhat_max();
  f.ess_min = d.ess_min();
  f.mean_accept = d.mean_accept;
  f.failed = d.failed;
  return f;
}

inline void score_step(StepRecord& r, std::size_t v, const Composition& y, const Eigen::MatrixXd& mu,
                       const Eigen::VectorXd& phi, const Eigen::MatrixXd& draws, const Eigen::VectorXd& point) {
  r.lpd[v] = lpd(y, mu, phi);
  const auto cov = coverage_95(y, draws);
  std::size_t c = 0;
  for (bool b : cov) c += b ? 1 : 0;
  r.coverage[v] = static_cast<double>(c) / static_cast<double>(cov.size());
  const PointErrors e = point_errors(point.transpose(), y.parts().transpose());
  r.rmse[v] = e.rmse;
  r.mae[v] = e.mae;
}

inline nlohmann::json config_json(const EvalConfig& c) {
  return {{"design", to_string(c.design)},
          {"spec", to_json(detail::with_variant(c.spec, Variant::Centered))},
          {"prior", {{"ar", c.prior.ar}, {"ma", c.prior.ma}, {"beta", c.prior.beta}, {"gamma", c.prior.gamma}}},
          {"sampler_full", to_json(c.sampler_full)},
          {"sampler_light", to_json(c.sampler_light)},
          {"refit",
           {{"max_attempts", c.refit.max_attempts},
            {"rhat_threshold", c.refit.rhat_threshold},
            {"ess_threshold", c.refit.ess_threshold}}},
          {"min_train", c.min_train},
          {"n_origins", c.n_origins},
          {"holdout_draws", c.holdout_draws},
          {"rolling_draws", c.rolling_draws},
          {"seed", c.seed}};
}

}  // namespace detail

/// Fills wins, cumulative path and per-variant totals from steps and fits.
inline void summarize(EvalReport& r) {
  r.wins = r.losses = r.ties = 0;
  r.cum_elpd.clear();
  double cum = 0.0;
  for (std::size_t v = 0; v < 2; ++v) r.totals[v] = {};
  std::size_t n_ok = 0;
  double pooled_sq[2] = {0, 0}, pooled_abs[2] = {0, 0};
  for (const auto& s : r.steps) {
    if (!s.ok()) continue;
    ++n_ok;
    const double d = s.diff();
    if (std::abs(d) <= kTieTolerance) ++r.ties;
    else if (d > 0) ++r.wins;
    else ++r.losses;
    cum += d;
    r.cum_elpd.push_back(cum);
    for (std::size_t v = 0; v < 2; ++v) {
      auto& t = r.totals[v];
      t.elpd_sum += s.lpd[v];
      t.rmse_mean += s.rmse[v];
      t.mae_mean += s.mae[v];
      t.coverage_mean += s.coverage[v];
      pooled_sq[v] += s.rmse[v] * s.rmse[v];
      pooled_abs[v] += s.mae[v];
    }
  }
  for (std::size_t v = 0; v < 2; ++v) {
    auto& t = r.totals[v];
    if (n_ok) {
      const double n = static_cast<double>(n_ok);
      t.rmse_mean /= n;
      t.mae_mean /= n;
      t.coverage_mean /= n;
      t.rmse_pooled = std::sqrt(pooled_sq[v] / n);
      t.mae_pooled = pooled_abs[v] / n;
    }
  }
  for (const auto& f : r.fits) {
    auto& t = r.totals[detail::vi(f.variant)];
    t.divergences += f.divergences;
    ++t.fits;
    t.fits_with_divergence += f.divergences > 0 ? 1 : 0;
    t.attempts += f.attempts;
    t.failed_fits += f.failed ? 1 : 0;
  }
}

/// One fit per variant on the rows before the holdout, then one-step
/// forecasts over the holdout with the state re-filtered on observed data
/// and parameters fixed at the posterior draws.
inline EvalReport run_fixed_holdout(const SeriesPanel& panel_in, const EvalConfig& cfg) {
  const std::size_t T = panel_in.rows();
  const std::size_t T_test = holdout_weeks(T);
  if (T_test < 1 || T - T_test <= cfg.spec.lags() + 1)
    throw InvalidInput("fixed holdout: panel of " + std::to_string(T) + " rows is too short");
  const std::size_t T_train = T - T_test;
  SeriesPanel panel = panel_in;
  if (panel.z_raw.size() == static_cast<Eigen::Index>(T) && panel.Z.cols() >= 2) restandardize(panel, T_train);
  const SeriesPanel train = panel.head(T_train);

  EvalReport rep;
  rep.design = Design::FixedHoldout;
  rep.T = T;
  rep.T_train = T_train;
  rep.T_test = T_test;
  rep.config = detail::config_json(cfg);
  rep.steps.resize(T_test);
  for (std::size_t i = 0; i < T_test; ++i) {
    rep.steps[i].t = T_train + i;
    if (!panel.dates.empty()) rep.steps[i].date = panel.dates[T_train + i];
  }

  const Variant variants[2] = {Variant::Raw, Variant::Centered};
  PosteriorDraws post[2];
  SamplerConfig sc = cfg.sampler_full;
  sc.seed = cfg.seed;
  sc.jobs = cfg.jobs;
  for (std::size_t v = 0; v < 2; ++v) {
    const DarmaSpec spec = detail::with_variant(cfg.spec, variants[v]);
    post[v] = detail::fit_variant(spec, train, cfg.prior, sc, cfg.refit);
    rep.fits.push_back(detail::fit_record("holdout", variants[v], post[v].diagnostics));
  }

  const auto J = static_cast<Eigen::Index>(cfg.spec.J);
  const std::size_t S = cfg.holdout_draws;
  for (std::size_t v = 0; v < 2; ++v) {
    const DarmaSpec spec = detail::with_variant(cfg.spec, variants[v]);
    const std::vector<std::size_t> idx = subsample_rows(post[v].size(), S, cfg.seed);
    // Per week: S x J means, S precisions and S predictive draws.
    std::vector<Eigen::MatrixXd> mu(T_test, Eigen::MatrixXd(static_cast<Eigen::Index>(S), J));
    std::vector<Eigen::VectorXd> phi(T_test, Eigen::VectorXd(static_cast<Eigen::Index>(S)));
    std::vector<Eigen::MatrixXd> draws(T_test, Eigen::MatrixXd(static_cast<Eigen::Index>(S), J));
    parallel_for(S, cfg.jobs, [&](std::size_t s) {
      const DarmaParams params = DarmaParams::unflatten(spec, post[v].draws.row(static_cast<Eigen::Index>(idx[s])).transpose());
      const StatePath st = filter(spec, params, panel);
      Rng rng(cfg.seed, 1 + s);
      Eigen::VectorXd alpha(J), y(J);
      for (std::size_t i = 0; i < T_test; ++i) {
        const auto t = static_cast<Eigen::Index>(T_train + i);
        const auto si = static_cast<Eigen::Index>(s);
        mu[i].row(si) = st.mu.row(t);
        phi[i][si] = st.phi[t];
        for (Eigen::Index j = 0; j < J; ++j) alpha[j] = std::max(st.phi[t] * st.mu(t, j), kShapeFloor);
        detail::dirichlet_draw_into(alpha.data(), cfg.spec.J, rng, y.data());
        draws[i].row(si) = y.transpose();
      }
    });
    for (std::size_t i = 0; i < T_test; ++i) {
      const Eigen::VectorXd point = mu[i].colwise().mean().transpose();
      detail::score_step(rep.steps[i], v, panel.composition(T_train + i), mu[i], phi[i], draws[i], point);
      rep.steps[i].divergences[v] = post[v].diagnostics.divergences;
      rep.steps[i].attempts[v] = post[v].diagnostics.attempts;
      rep.steps[i].failed[v] = post[v].diagnostics.failed;
    }
  }
  summarize(rep);
  return rep;
}

/// Zero-based forecast rows of the rolling design: the last `n_origins`
/// of t0 = max(104, min_train) .. T - 1 (t0 training rows, forecast row t0).
inline std::vector<std::size_t> rolling_origins(std::size_t T, const EvalConfig& cfg) {
  const std::size_t first = std::max<std::size_t>(104, cfg.min_train);
  if (T <= first) throw InvalidInput("rolling: panel of " + std::to_string(T) + " rows leaves no origin after " +
                                     std::to_string(first) + " training rows");
  const std::size_t start = std::max(first, T > cfg.n_origins ? T - cfg.n_origins : 0);
  std::vector<std::size_t> out;
  for (std::size_t t0 = start; t0 < T; ++t0) out.push_back(t0);
  return out;
}

/// Scores one origin: both variants fit on rows [0, t0) with the light
/// sampler and forecast row t0.
inline StepRecord run_origin(const SeriesPanel& panel, std::size_t t0, const EvalConfig& cfg,
                             std::vector<FitRecord>* fits_out) {
  StepRecord rec;
  rec.t = t0;
  if (!panel.dates.empty()) rec.date = panel.dates[t0];
  SeriesPanel view = panel.head(t0 + 1);
  if (view.z_raw.size() == static_cast<Eigen::Index>(t0 + 1) && view.Z.cols() >= 2) restandardize(view, t0);
  const SeriesPanel train = view.head(t0);
  SamplerConfig sc = cfg.sampler_light;
  sc.seed = cfg.seed + t0;
  sc.jobs = 1;
  const Variant variants[2] = {Variant::Raw, Variant::Centered};
  try {
    for (std::size_t v = 0; v < 2; ++v) {
      const DarmaSpec spec = detail::with_variant(cfg.spec, variants[v]);
      const PosteriorDraws post = detail::fit_variant(spec, train, cfg.prior, sc, cfg.refit);
      fits_out->push_back(detail::fit_record(std::to_string(t0), variants[v], post.diagnostics));
      PredictiveOptions opt;
      const ForecastResult fc = predictive_draws(spec, post, view, t0, 1, cfg.rolling_draws, sc.seed, opt);
      detail::score_step(rec, v, view.composition(t0), fc.step_mu, fc.step_phi, fc.draws[0],
                         fc.mu_mean.row(0).transpose());
      rec.divergences[v] = post.diagnostics.divergences;
      rec.attempts[v] = post.diagnostics.attempts;
      rec.failed[v] = post.diagnostics.failed;
    }
  } catch (const NumericalError& e) {
    rec.status = std::string("skipped: ") + e.what();
  } catch (const SamplerError& e) {
    rec.status = std::string("skipped: ") + e.what();
  }
  std::replace(rec.status.begin(), rec.status.end(), '"', '\'');
  return rec;
}

inline EvalReport run_rolling(const SeriesPanel& panel, const EvalConfig& cfg) {
  const std::vector<std::size_t> origins = rolling_origins(panel.rows(), cfg);
  EvalReport rep;
  rep.design = Design::Rolling;
  rep.T = panel.rows();
  rep.T_train = origins.front();
  rep.T_test = origins.size();
  rep.config = detail::config_json(cfg);
  rep.steps.resize(origins.size());
  std::vector<std::vector<FitRecord>> fits(origins.size());
  parallel_for(origins.size(), cfg.jobs, [&](std::size_t i) { rep.steps[i] = run_origin(panel, origins[i], cfg, &fits[i]); });
  for (auto& f : fits)
    for (auto& r : f) rep.fits.push_back(std::move(r));
  summarize(rep);
  return rep;
}

inline EvalReport run_evaluation(const SeriesPanel& panel, const EvalConfig& cfg) {
  return cfg.design == Design::FixedHoldout ? run_fixed_holdout(panel, cfg) : run_rolling(panel, cfg);
}

// ---------------------------------------------------------------------------
// Report files

inline const std::vector<std::string>& step_columns() {
  static const std::vector<std::string> cols{
      "row",          "date",          "lpd_centered",     "lpd_raw",          "lpd_diff",
      "rmse_centered", "rmse_raw",     "mae_centered",     "mae_raw",          "coverage_centered",
      "coverage_raw", "div_centered",  "div_raw",          "attempts_centered", "attempts_raw",
      "failed_centered", "failed_raw", "status"};
  return cols;
}

inline std::string steps_to_csv(const std::vector<StepRecord>& steps) {
  std::ostringstream out;
  out << csv::join(step_columns()) << '\n';
  for (const auto& s : steps) {
    out << csv::join({std::to_string(s.t), s.date, csv::format(s.lpd[1]), csv::format(s.lpd[0]), csv::format(s.diff()),
                      csv::format(s.rmse[1]), csv::format(s.rmse[0]), csv::format(s.mae[1]), csv::format(s.mae[0]),
                      csv::format(s.coverage[1]), csv::format(s.coverage[0]), std::to_string(s.divergences[1]),
                      std::to_string(s.divergences[0]), std::to_string(s.attempts[1]), std::to_string(s.attempts[0]),
                      s.failed[1] ? "1" : "0", s.failed[0] ? "1" : "0", s.status})
        << '\n';
  }
  return out.str();
}

inline std::vector<StepRecord> steps_from_csv(const csv::Table& t) {
  if (t.header != step_columns()) throw FormatError("step csv: unexpected header");
  std::vector<StepRecord> out;
  for (const auto& row : t.rows) {
    StepRecord s;
    auto num = [&](std::size_t i) { return csv::parse_double(row[i]); };
    auto count = [&](std::size_t i) { return static_cast<std::size_t>(num(i)); };
    s.t = count(0);
    s.date = row[1];
    s.lpd[1] = num(2);
    s.lpd[0] = num(3);
    s.rmse[1] = num(5);
    s.rmse[0] = num(6);
    s.mae[1] = num(7);
    s.mae[0] = num(8);
    s.coverage[1] = num(9);
    s.coverage[0] = num(10);
    s.divergences[1] = count(11);
    s.divergences[0] = count(12);
    s.attempts[1] = count(13);
    s.attempts[0] = count(14);
    s.failed[1] = row[15] == "1";
    s.failed[0] = row[16] == "1";
    s.status = row[17];
    out.push_back(s);
  }
  return out;
}

namespace detail {

inline std::string fmt_fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

inline std::string fmt_sci(double v) {
  std::ostringstream s;
  s << std::scientific << std::setprecision(3) << v;
  return s.str();
}

inline std::string fmt_signed(double v, int digits) { return (v >= 0 ? "+" : "") + fmt_fixed(v, digits); }

inline std::string percent(std::size_t num, std::size_t den) {
  return den ? fmt_fixed(100.0 * static_cast<double>(num) / static_cast<double>(den), 1) + "%" : "n/a";
}

}  // namespace detail

inline std::string table2_markdown(const EvalReport& r) {
  const auto& c = r.totals[1];
  const auto& w = r.totals[0];
  const std::string unit = r.design == Design::Rolling ? "origins" : "holdout weeks";
  const std::size_t n = r.cum_elpd.size();
  double mean_diff = 0.0, sd_diff = 0.0;
  std::vector<double> diffs;
  for (const auto& s : r.steps)
    if (s.ok()) diffs.push_back(s.diff());
  if (!diffs.empty()) {
    for (double d : diffs) mean_diff += d;
    mean_diff /= static_cast<double>(diffs.size());
    for (double d : diffs) sd_diff += (d - mean_diff) * (d - mean_diff);
    sd_diff = diffs.size() > 1 ? std::sqrt(sd_diff / static_cast<double>(diffs.size() - 1)) : 0.0;
  }
  auto per_fit = [](std::size_t a, std::size_t f) {
    return f ? detail::fmt_fixed(static_cast<double>(a) / static_cast<double>(f), 2) : std::string("n/a");
  };
  std::ostringstream o;
  o << "| | Centered MA | Raw MA | Difference | Notes |\n";
  o << "|---|---|---|---|---|\n";
  o << "| ELPD (sum) | " << detail::fmt_fixed(c.elpd_sum, 3) << " | " << detail::fmt_fixed(w.elpd_sum, 3) << " | "
    << detail::fmt_signed(c.elpd_sum - w.elpd_sum, 3) << " | mean diff " << detail::fmt_signed(mean_diff, 4) << ", sd "
    << detail::fmt_fixed(sd_diff, 4) << " |\n";
  o << "| Wins on ELPD | " << r.wins << " vs " << r.losses << " (ties: " << r.ties << ") | | | " << n << " " << unit
    << " |\n";
  o << "| RMSE (mean) | " << detail::fmt_sci(c.rmse_mean) << " | " << detail::fmt_sci(w.rmse_mean) << " | "
    << detail::fmt_sci(c.rmse_mean - w.rmse_mean) << " | per-step mean |\n";
  o << "| MAE (mean) | " << detail::fmt_sci(c.mae_mean) << " | " << detail::fmt_sci(w.mae_mean) << " | "
    << detail::fmt_sci(c.mae_mean - w.mae_mean) << " | per-step mean |\n";
  o << "| 95% Coverage (mean) | " << detail::fmt_fixed(c.coverage_mean, 4) << " | " << detail::fmt_fixed(w.coverage_mean, 4)
    << " | " << detail::fmt_signed(c.coverage_mean - w.coverage_mean, 4) << " | all components |\n";
  o << "| Divergences (total) | " << c.divergences << " | " << w.divergences << " | -- | across " << c.fits << " fits |\n";
  o << "| Any divergence | " << detail::percent(c.fits_with_divergence, c.fits) << " | "
    << detail::percent(w.fits_with_divergence, w.fits) << " | -- | share of fits |\n";
  o << "| Avg attempts / origin | " << per_fit(c.attempts, c.fits) << " | " << per_fit(w.attempts, w.fits)
    << " | -- | auto-refits enabled |\n";
  return o.str();
}

inline nlohmann::json summary_json(const EvalReport& r) {
  using nlohmann::json;
  auto totals = [](const VariantTotals& t) {
    return json{{"elpd_sum", t.elpd_sum},
                {"rmse_mean", t.rmse_mean},
                {"mae_mean", t.mae_mean},
                {"coverage_mean", t.coverage_mean},
                {"rmse_pooled", t.rmse_pooled},
                {"mae_pooled", t.mae_pooled},
                {"divergences", t.divergences},
                {"fits", t.fits},
                {"fits_with_divergence", t.fits_with_divergence},
                {"attempts", t.attempts},
                {"failed_fits", t.failed_fits}};
  };
  std::size_t skipped = 0;
  for (const auto& s : r.steps) skipped += s.ok() ? 0 : 1;
  return {{"design", to_string(r.design)},
          {"T", r.T},
          {"T_train", r.T_train},
          {"T_test", r.T_test},
          {"steps", r.steps.size()},
          {"skipped", skipped},
          {"centered", totals(r.totals[1])},
          {"raw", totals(r.totals[0])},
          {"elpd_diff", r.totals[1].elpd_sum - r.totals[0].elpd_sum},
          {"cum_elpd_final", r.cum_elpd.empty() ? 0.0 : r.cum_elpd.back()},
          {"wins", r.wins},
          {"losses", r.losses},
          {"ties", r.ties},
          {"config", r.config}};
}

/// `results_<UTC timestamp>` under `out_dir`, with a numeric suffix when the
/// name is taken.
inline std::filesystem::path make_results_dir(const std::filesystem::path& out_dir) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &tm);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  std::filesystem::path dir = out_dir / (std::string("results_") + stamp);
  for (int i = 2; std::filesystem::exists(dir); ++i) dir = out_dir / (std::string("results_") + stamp + "_" + std::to_string(i));
  std::filesystem::create_directory(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

/// Writes every report file into `dir`, which must exist.
inline void write_report_files(const EvalReport& r, const std::filesystem::path& dir) {
  const bool rolling = r.design == Design::Rolling;
  const std::vector<StepRecord> none;
  write_json((dir / "summary.json").string(), summary_json(r));
  csv::write_text((dir / "rolling_origins.csv").string(), steps_to_csv(rolling ? r.steps : none));

  std::ostringstream cum, rmse, bars, diag;
  cum << "row,date,cum_elpd_diff\n";
  rmse << "row,date,rmse_centered,rmse_raw\n";
  if (rolling) {
    std::size_t k = 0;
    for (const auto& s : r.steps) {
      if (!s.ok()) continue;
      cum << s.t << ',' << s.date << ',' << csv::format(r.cum_elpd[k++]) << '\n';
      rmse << s.t << ',' << s.date << ',' << csv::format(s.rmse[1]) << ',' << csv::format(s.rmse[0]) << '\n';
    }
  }
  bars << "metric,centered,raw,difference\n";
  if (!rolling && !r.steps.empty()) {
    const auto& c = r.totals[1];
    const auto& w = r.totals[0];
    auto row = [&](const char* name, double a, double b) {
      bars << name << ',' << csv::format(a) << ',' << csv::format(b) << ',' << csv::format(a - b) << '\n';
    };
    row("elpd", c.elpd_sum, w.elpd_sum);
    row("rmse", c.rmse_pooled, w.rmse_pooled);
    row("mae", c.mae_pooled, w.mae_pooled);
    row("coverage", c.coverage_mean, w.coverage_mean);
  }
  diag << "scope,variant,divergences,treedepth_hits,rhat_max,ess_min,attempts,failed,mean_accept\n";
  for (const auto& f : r.fits)
    diag << f.scope << ',' << to_string(f.variant) << ',' << f.divergences << ',' << f.treedepth_hits << ','
         << csv::format(f.rhat_max) << ',' << csv::format(f.ess_min) << ',' << f.attempts << ',' << (f.failed ? 1 : 0) << ','
         << csv::format(f.mean_accept) << '\n';
  csv::write_text((dir / "cum_elpd.csv").string(), cum.str());
  csv::write_text((dir / "rolling_rmse.csv").string(), rmse.str());
  csv::write_text((dir / "holdout_bars.csv").string(), bars.str());
  csv::write_text((dir / "diagnostics.csv").string(), diag.str());
  csv::write_text((dir / "table2.md").string(), table2_markdown(r));
  if (!rolling) csv::write_text((dir / "holdout_weeks.csv").string(), steps_to_csv(r.steps));
}

/// Creates a timestamped directory under `out_dir` and writes the report.
inline std::filesystem::path emit_report(const EvalReport& r, const std::filesystem::path& out_dir) {
  const auto dir = make_results_dir(out_dir);
  write_report_files(r, dir);
  return dir;
}

}  // namespace bdarma

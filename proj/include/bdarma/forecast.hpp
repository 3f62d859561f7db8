#pragma once

// Conditional mean recursions for both innovation variants, predictive
// simulation from posterior draws, and the scoring rules (lpd, interval
// coverage, RMSE, MAE).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "bdarma/darma.hpp"
#include "bdarma/dirichlet.hpp"
#include "bdarma/error.hpp"
#include "bdarma/inference.hpp"
#include "bdarma/rng.hpp"

namespace bdarma {

/// E[eta_{T+h} | F_T] for h = 1..H and the pieces it is built from.
struct MeanPath {
  Eigen::MatrixXd eta;  // H x K
  Eigen::MatrixXd mu;   // H x J, alr_inv(eta)
  Eigen::MatrixXd ma;   // H x K, moving-average contribution to eta
  Eigen::MatrixXd G;    // H x K, E[g(mu_{T+h}, phi_{T+h}) | F_T]
  std::vector<bool> exact;  // false where a Monte Carlo estimate of G entered
  std::size_t horizon() const { return static_cast<std::size_t>(eta.rows()); }
};

struct MeanPathOptions {
  std::size_t n_paths = 2000;  // forward paths used for E[g] beyond one step
  std::uint64_t seed = 1;
};

namespace detail {

inline void check_future(const DarmaSpec& spec, std::size_t H, const Eigen::MatrixXd& X_future,
                         const Eigen::MatrixXd& Z_future) {
  if (H == 0) throw InvalidInput("forecast: horizon must be at least one");
  if (static_cast<std::size_t>(X_future.rows()) < H || static_cast<std::size_t>(Z_future.rows()) < H)
    throw InvalidInput("forecast: future covariates cover fewer than " + std::to_string(H) + " steps");
  if (static_cast<std::size_t>(X_future.cols()) != spec.M || static_cast<std::size_t>(Z_future.cols()) != spec.R)
    throw InvalidInput("forecast: future covariate widths do not match (M, R)");
  if (!X_future.topRows(static_cast<Eigen::Index>(H)).allFinite() ||
      !Z_future.topRows(static_cast<Eigen::Index>(H)).allFinite())
    throw InvalidInput("forecast: future covariates must be finite");
}

/// Rolling window holding the last max(P, Q) filtered rows followed by the
/// forecast rows.
struct Window {
  std::size_t m = 0;
  Eigen::MatrixXd a, xb, eps;

  Window(const DarmaSpec& spec, const DarmaParams& params, const StatePath& state, std::size_t H,
         const Eigen::MatrixXd& X_future) {
    m = spec.lags();
    const auto T = static_cast<Eigen::Index>(state.rows());
    if (static_cast<std::size_t>(T) < m || state.xb.rows() != T)
      throw InvalidInput("forecast: state is shorter than max(P, Q) or lacks X beta");
    const auto K = static_cast<Eigen::Index>(spec.K());
    const auto rows = static_cast<Eigen::Index>(m + H);
    a = Eigen::MatrixXd::Zero(rows, K);
    xb = Eigen::MatrixXd::Zero(rows, K);
    eps = Eigen::MatrixXd::Zero(rows, K);
    const auto mm = static_cast<Eigen::Index>(m);
    a.topRows(mm) = state.a.bottomRows(mm);
    xb.topRows(mm) = state.xb.bottomRows(mm);
    eps.topRows(mm) = state.eps.bottomRows(mm);
    for (std::size_t h = 0; h < H; ++h)
      xb.row(mm + static_cast<Eigen::Index>(h)) =
          (params.beta * X_future.row(static_cast<Eigen::Index>(h)).transpose()).transpose();
  }
};

/// Simulates one forward path of H steps, writing compositions (H x J).
/// When `g_acc` is non-null, g(mu_s, phi_s) along the path is added to it.
inline void forward_path(const DarmaSpec& spec, const DarmaParams& params, Window w, std::size_t H,
                         const Eigen::MatrixXd& Z_future, Rng& rng, Eigen::MatrixXd* y_out, Eigen::MatrixXd* g_acc,
                         Eigen::MatrixXd* eta_acc = nullptr) {
  const auto K = static_cast<Eigen::Index>(spec.K());
  const auto J = static_cast<Eigen::Index>(spec.J);
  Eigen::VectorXd eta(K), mu(J), alpha(J), y(J), g(K);
  for (std::size_t h = 0; h < H; ++h) {
    const auto r = static_cast<Eigen::Index>(w.m + h);
    eta = w.xb.row(r).transpose();
    for (std::size_t p = 1; p <= spec.P; ++p) {
      const auto lag = r - static_cast<Eigen::Index>(p);
      eta += params.A[p - 1] * (w.a.row(lag) - w.xb.row(lag)).transpose();
    }
    for (std::size_t q = 1; q <= spec.Q; ++q) eta += params.B[q - 1] * w.eps.row(r - static_cast<Eigen::Index>(q)).transpose();
    const double phi = std::exp(Z_future.row(static_cast<Eigen::Index>(h)).dot(params.gamma));
    if (!eta.allFinite() || !std::isfinite(phi)) throw NumericalError("forecast: forward path diverged");
    alr_inv_into(eta.data(), spec.K(), spec.ref, mu.data());
    alr_mean_into(mu.data(), spec.J, phi, spec.ref, g.data());
    if (g_acc) g_acc->row(static_cast<Eigen::Index>(h)) += g.transpose();
    if (eta_acc) eta_acc->row(static_cast<Eigen::Index>(h)) += eta.transpose();
    for (Eigen::Index j = 0; j < J; ++j) alpha[j] = std::max(phi * mu[j], kShapeFloor);
    dirichlet_draw_into(alpha.data(), spec.J, rng, y.data());
    if (y_out) y_out->row(static_cast<Eigen::Index>(h)) = y.transpose();
    const double lr = std::log(y[static_cast<Eigen::Index>(spec.ref)]);
    for (Eigen::Index k = 0; k < K; ++k)
      w.a(r, k) = std::log(y[static_cast<Eigen::Index>(alr_component(static_cast<std::size_t>(k), spec.ref))]) - lr;
    w.eps.row(r) = spec.variant == Variant::Raw ? (w.a.row(r) - eta.transpose()).eval() : (w.a.row(r) - g.transpose()).eval();
  }
}

}  // namespace detail

/// Conditional mean path from a state filtered through the origin.
///
/// Centered: only realized innovations enter, so the moving-average term
/// is exactly zero beyond lag Q. Raw: forecast-period residuals keep the
/// conditional mean E[b_s | F_T] = G_s - eta_hat_s, where G_s is exact one
/// step ahead and estimated from `opt.n_paths` forward paths beyond that.
inline MeanPath forecast_mean_path(const DarmaSpec& spec, const DarmaParams& params, const StatePath& state,
                                   std::size_t H, const Eigen::MatrixXd& X_future, const Eigen::MatrixXd& Z_future,
                                   const MeanPathOptions& opt = {}) {
  spec.validate();
  params.check(spec);
  detail::check_future(spec, H, X_future, Z_future);
  const detail::Window w(spec, params, state, H, X_future);
  const auto K = static_cast<Eigen::Index>(spec.K());
  const auto J = static_cast<Eigen::Index>(spec.J);
  const bool raw = spec.variant == Variant::Raw;

  // Steps (1-based) whose G is needed by later steps; G_1 is exact.
  std::vector<bool> inexact(H + 1, false);
  bool need_mc = false;
  for (std::size_t h = 1; h <= H; ++h) {
    std::size_t deepest = 0;
    for (std::size_t p = 1; p <= spec.P; ++p)
      if (h > p) deepest = std::max(deepest, h - p);
    if (raw)
      for (std::size_t q = 1; q <= std::min(spec.Q, h - 1); ++q) deepest = std::max(deepest, h - q);
    inexact[h] = deepest >= 2;
    need_mc = need_mc || inexact[h];
  }

  MeanPath out;
  out.eta.resize(static_cast<Eigen::Index>(H), K);
  out.mu.resize(static_cast<Eigen::Index>(H), J);
  out.ma = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(H), K);
  out.G = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(H), K);
  for (std::size_t h = 1; h <= H; ++h) out.exact.push_back(!inexact[h]);

  if (need_mc) {
    if (opt.n_paths == 0) throw InvalidInput("forecast: n_paths must be positive beyond two steps");
    Rng rng(opt.seed);
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(H), K);
    for (std::size_t i = 0; i < opt.n_paths; ++i)
      detail::forward_path(spec, params, w, H - 1, Z_future, rng, nullptr, &acc);
    out.G = acc / static_cast<double>(opt.n_paths);
  }

  // Expected ALR observation and innovation on the window rows.
  Eigen::MatrixXd ahat = w.a, ehat = w.eps;
  const auto m = static_cast<Eigen::Index>(w.m);
  Eigen::VectorXd eta(K), mu(J), g(K);
  for (std::size_t h = 1; h <= H; ++h) {
    const auto r = m + static_cast<Eigen::Index>(h) - 1;
    eta = w.xb.row(r).transpose();
    for (std::size_t p = 1; p <= spec.P; ++p) {
      const auto lag = r - static_cast<Eigen::Index>(p);
      eta += params.A[p - 1] * (ahat.row(lag) - w.xb.row(lag)).transpose();
    }
    Eigen::VectorXd ma = Eigen::VectorXd::Zero(K);
    for (std::size_t q = 1; q <= spec.Q; ++q) {
      if (q < h && !raw) continue;  // unrealized centered innovations have mean zero
      ma += params.B[q - 1] * ehat.row(r - static_cast<Eigen::Index>(q)).transpose();
    }
    eta += ma;
    const double phi = std::exp(Z_future.row(static_cast<Eigen::Index>(h - 1)).dot(params.gamma));
    if (!eta.allFinite() || !std::isfinite(phi)) throw NumericalError("forecast: mean path diverged");
    alr_inv_into(eta.data(), spec.K(), spec.ref, mu.data());
    if (h == 1) {
      detail::alr_mean_into(mu.data(), spec.J, phi, spec.ref, g.data());
      out.G.row(0) = g.transpose();
    }
    out.eta.row(static_cast<Eigen::Index>(h - 1)) = eta.transpose();
    out.mu.row(static_cast<Eigen::Index>(h - 1)) = mu.transpose();
    out.ma.row(static_cast<Eigen::Index>(h - 1)) = ma.transpose();
    ahat.row(r) = out.G.row(static_cast<Eigen::Index>(h - 1));
    ehat.row(r) = raw ? (ahat.row(r) - eta.transpose()).eval() : Eigen::RowVectorXd::Zero(K);
  }
  return out;
}

/// Predictive output for H steps ahead of an origin.
struct ForecastResult {
  std::size_t origin = 0;         // first forecast row of the panel
  Eigen::MatrixXd eta_mean;       // H x K, mean over draws of the conditional mean path
  Eigen::MatrixXd mu_mean;        // H x J, mean over draws of alr_inv(eta_hat); the point forecast
  std::vector<Eigen::MatrixXd> draws;  // per h: S x J predictive compositions
  Eigen::MatrixXd step_mu;        // S x J one-step Dirichlet means per posterior draw
  Eigen::VectorXd step_phi;       // S one-step precisions per posterior draw
  Eigen::MatrixXd lo, hi;         // H x J central 95% interval bounds
  std::vector<std::size_t> draw_index;  // posterior rows used
  std::size_t horizon() const { return draws.size(); }
};

/// Type-7 (linear interpolation) sample quantile.
inline double quantile(std::vector<double> v, double p) {
  if (v.empty()) throw InvalidInput("quantile: empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidInput("quantile: probability outside [0, 1]");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// Uniform subsample of `S` distinct rows out of `total`, seeded.
inline std::vector<std::size_t> subsample_rows(std::size_t total, std::size_t S, std::uint64_t seed) {
  if (S == 0 || S > total)
    throw InvalidInput("subsample: requested " + std::to_string(S) + " of " + std::to_string(total) + " draws");
  std::vector<std::size_t> idx(total);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed, 0x5eed);
  for (std::size_t i = 0; i < S; ++i) std::swap(idx[i], idx[i + rng.below(total - i)]);
  idx.resize(S);
  return idx;
}

struct PredictiveOptions {
  MeanPathOptions mean_path{};
  bool keep_mean_path = true;  // compute eta_mean / mu_mean
};

/// Predictive simulation from `S` posterior draws: each draw is filtered
/// through rows [0, origin) of `panel` and then rolled forward `H` steps
/// with Dirichlet sampling. Future covariates come from panel rows
/// [origin, origin + H).
inline ForecastResult predictive_draws(const DarmaSpec& spec, const PosteriorDraws& posterior, const SeriesPanel& panel,
                                       std::size_t origin, std::size_t H, std::size_t S, std::uint64_t seed,
                                       const PredictiveOptions& opt = {}) {
  if (origin + H > panel.rows()) throw InvalidInput("predictive_draws: panel does not cover origin + horizon");
  if (posterior.dimension() != spec.dimension()) throw InvalidInput("predictive_draws: draws do not match the spec");
  const SeriesPanel history = panel.head(origin);
  const Eigen::MatrixXd Xf = panel.X.middleRows(static_cast<Eigen::Index>(origin), static_cast<Eigen::Index>(H));
  const Eigen::MatrixXd Zf = panel.Z.middleRows(static_cast<Eigen::Index>(origin), static_cast<Eigen::Index>(H));
  detail::check_future(spec, H, Xf, Zf);

  ForecastResult out;
  out.origin = origin;
  out.draw_index = subsample_rows(posterior.size(), S, seed);
  const auto K = static_cast<Eigen::Index>(spec.K());
  const auto J = static_cast<Eigen::Index>(spec.J);
  const auto SS = static_cast<Eigen::Index>(S);
  out.draws.assign(H, Eigen::MatrixXd(SS, J));
  out.step_mu.resize(SS, J);
  out.step_phi.resize(SS);
  out.eta_mean = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(H), K);
  out.mu_mean = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(H), J);

  Eigen::MatrixXd path(static_cast<Eigen::Index>(H), J);
  for (std::size_t s = 0; s < S; ++s) {
    const Eigen::VectorXd theta = posterior.draws.row(static_cast<Eigen::Index>(out.draw_index[s])).transpose();
    const DarmaParams params = DarmaParams::unflatten(spec, theta);
    const StatePath state = filter(spec, params, history);
    const detail::Window w(spec, params, state, H, Xf);
    Rng rng(seed, 1 + s);
    detail::forward_path(spec, params, w, H, Zf, rng, &path, nullptr);
    for (std::size_t h = 0; h < H; ++h) out.draws[h].row(static_cast<Eigen::Index>(s)) = path.row(static_cast<Eigen::Index>(h));

    MeanPathOptions mp = opt.mean_path;
    mp.seed = opt.mean_path.seed ^ (seed + 0x9E3779B97F4A7C15ULL * (s + 1));
    const MeanPath mean = forecast_mean_path(spec, params, state, opt.keep_mean_path ? H : 1, Xf, Zf, mp);
    out.step_mu.row(static_cast<Eigen::Index>(s)) = mean.mu.row(0);
    out.step_phi[static_cast<Eigen::Index>(s)] = std::exp(Zf.row(0).dot(params.gamma));
    out.eta_mean.topRows(mean.eta.rows()) += mean.eta;
    out.mu_mean.topRows(mean.mu.rows()) += mean.mu;
  }
  out.eta_mean /= static_cast<double>(S);
  out.mu_mean /= static_cast<double>(S);

  out.lo.resize(static_cast<Eigen::Index>(H), J);
  out.hi.resize(static_cast<Eigen::Index>(H), J);
  for (std::size_t h = 0; h < H; ++h)
    for (Eigen::Index j = 0; j < J; ++j) {
      const Eigen::VectorXd col = out.draws[h].col(j);
      std::vector<double> v(col.data(), col.data() + col.size());
      out.lo(static_cast<Eigen::Index>(h), j) = quantile(v, 0.025);
      out.hi(static_cast<Eigen::Index>(h), j) = quantile(v, 0.975);
    }
  return out;
}

/// log (1/S) sum_s f_Dir(y | phi_s mu_s), computed by max subtraction.
inline double lpd(const Composition& y, const Eigen::MatrixXd& mu, const Eigen::VectorXd& phi) {
  const auto S = mu.rows();
  if (S < 1 || phi.size() != S) throw InvalidInput("lpd: need at least one (mu, phi) pair");
  if (static_cast<std::size_t>(mu.cols()) != y.size()) throw InvalidInput("lpd: dimension mismatch");
  std::vector<double> terms(static_cast<std::size_t>(S));
  Eigen::VectorXd alpha(mu.cols());
  for (Eigen::Index s = 0; s < S; ++s) {
    for (Eigen::Index j = 0; j < mu.cols(); ++j) alpha[j] = std::max(phi[s] * mu(s, j), kShapeFloor);
    terms[static_cast<std::size_t>(s)] = detail::dirichlet_log_density(y.parts().data(), alpha.data(), y.size());
  }
  const double mx = *std::max_element(terms.begin(), terms.end());
  if (!std::isfinite(mx)) return mx;
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - mx);
  return mx + std::log(acc / static_cast<double>(S));
}

/// Componentwise inclusion of `y` in the central `level` interval of the
/// predictive draws (S x J).
inline std::vector<bool> coverage_95(const Composition& y, const Eigen::MatrixXd& draws, double level = 0.95) {
  if (draws.rows() < 40) throw InvalidInput("coverage: need at least 40 predictive draws");
  if (static_cast<std::size_t>(draws.cols()) != y.size()) throw InvalidInput("coverage: dimension mismatch");
  const double tail = 0.5 * (1.0 - level);
  std::vector<bool> out(y.size());
  for (Eigen::Index j = 0; j < draws.cols(); ++j) {
    const Eigen::VectorXd col = draws.col(j);
    std::vector<double> v(col.data(), col.data() + col.size());
    const double lo = quantile(v, tail), hi = quantile(v, 1.0 - tail);
    out[static_cast<std::size_t>(j)] = y[static_cast<std::size_t>(j)] >= lo && y[static_cast<std::size_t>(j)] <= hi;
  }
  return out;
}

struct PointErrors {
  double rmse = 0.0;
  double mae = 0.0;
};

/// RMSE and MAE over every (row, component) pair.
inline PointErrors point_errors(const Eigen::MatrixXd& forecast, const Eigen::MatrixXd& truth) {
  if (forecast.rows() != truth.rows() || forecast.cols() != truth.cols())
    throw InvalidInput("point_errors: forecast and truth shapes differ");
  if (forecast.size() == 0) throw InvalidInput("point_errors: empty input");
  const Eigen::ArrayXXd d = (forecast - truth).array();
  const double n = static_cast<double>(d.size());
  return {std::sqrt(d.square().sum() / n), d.abs().sum() / n};
}

/// Density and point scores over a window of one-step forecasts.
struct ScorePanel {
  double elpd_sum = 0.0;
  std::vector<double> lpd_t;
  double coverage = 0.0;  // share of covered (week, component) pairs
  double rmse = 0.0;
  double mae = 0.0;
};

/// Accumulates per-week scores; `finish` fills the aggregates.
class ScoreAccumulator {
 public:
  void add(double lpd_value, const std::vector<bool>& covered, const Eigen::VectorXd& point, const Eigen::VectorXd& truth) {
    lpd_.push_back(lpd_value);
    for (bool c : covered) {
      covered_ += c ? 1 : 0;
      ++pairs_;
    }
    point_.push_back(point);
    truth_.push_back(truth);
  }

  ScorePanel finish() const {
    ScorePanel s;
    s.lpd_t = lpd_;
    for (double v : lpd_) s.elpd_sum += v;
    s.coverage = pairs_ ? static_cast<double>(covered_) / static_cast<double>(pairs_) : 0.0;
    if (!point_.empty()) {
      Eigen::MatrixXd f(static_cast<Eigen::Index>(point_.size()), point_.front().size());
      Eigen::MatrixXd t(f.rows(), f.cols());
      for (std::size_t i = 0; i < point_.size(); ++i) {
        f.row(static_cast<Eigen::Index>(i)) = point_[i].transpose();
        t.row(static_cast<Eigen::Index>(i)) = truth_[i].transpose();
      }
      const PointErrors e = point_errors(f, t);
      s.rmse = e.rmse;
      s.mae = e.mae;
    }
    return s;
  }

 private:
  std::vector<double> lpd_;
  std::size_t covered_ = 0, pairs_ = 0;
  std::vector<Eigen::VectorXd> point_, truth_;
};

}  // namespace bdarma

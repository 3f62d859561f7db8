#pragma once

// No-U-turn Hamiltonian Monte Carlo with multinomial trajectory sampling,
// dual-averaging step size and windowed diagonal metric adaptation, plus
// the auto-refit policy.
//
// A target is any copyable callable `double f(const VectorXd& x, VectorXd& grad)`
// returning the log density (or -inf) and writing its gradient. Each chain
// works on its own copy of the target.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "bdarma/csv.hpp"
#include "bdarma/diagnostics.hpp"
#include "bdarma/error.hpp"
#include "bdarma/parallel.hpp"
#include "bdarma/rng.hpp"
#include "json.hpp"

namespace bdarma {

enum class InitMode { Zero, Random };

struct SamplerConfig {
  std::size_t chains = 4;
  std::size_t iterations = 2000;  // per chain, warmup included
  std::size_t warmup = 1000;
  double target_accept = 0.90;
  std::size_t max_treedepth = 12;
  InitMode init = InitMode::Zero;
  std::uint64_t seed = 1;
  std::size_t jobs = 1;  // threads used for chains

  void validate() const {
    if (chains < 1) throw InvalidInput("sampler: chains must be >= 1");
    if (!(warmup < iterations)) throw InvalidInput("sampler: warmup must be < iterations");
    if (!(target_accept >= 0.5 && target_accept <= 0.999)) throw InvalidInput("sampler: target_accept outside [0.5, 0.999]");
    if (max_treedepth < 1) throw InvalidInput("sampler: max_treedepth must be >= 1");
  }

  std::size_t draws_per_chain() const { return iterations - warmup; }

  static SamplerConfig full() { return {}; }
  static SamplerConfig light() {
    SamplerConfig c;
    c.chains = 2;
    c.iterations = 1200;
    c.warmup = 600;
    c.target_accept = 0.95;
    return c;
  }
};

struct DiagnosticsReport {
  std::size_t divergences = 0;
  std::size_t treedepth_hits = 0;
  Eigen::VectorXd rhat;       // split R-hat, drives the refit trigger
  Eigen::VectorXd rank_rhat;  // rank-normalized split R-hat, reported only
  Eigen::VectorXd bulk_ess;
  std::size_t attempts = 1;
  bool failed = false;  // refit attempts exhausted without passing
  std::vector<double> step_size;  // per chain, after adaptation
  double mean_accept = 0.0;
  SamplerConfig config;  // settings of the returned fit

  double rhat_max() const {
    double m = -std::numeric_limits<double>::infinity();
    for (double v : rhat) m = std::isnan(v) ? std::numeric_limits<double>::infinity() : std::max(m, v);
    return m;
  }
  double ess_min() const {
    double m = std::numeric_limits<double>::infinity();
    for (double v : bulk_ess) m = std::isnan(v) ? 0.0 : std::min(m, v);
    return m;
  }
};

struct PosteriorDraws {
  Eigen::MatrixXd draws;                 // S x D, chains stacked
  std::vector<std::size_t> chain_start;  // row where each chain begins
  std::vector<std::string> names;        // optional parameter names
  DiagnosticsReport diagnostics;

  std::size_t size() const { return static_cast<std::size_t>(draws.rows()); }
  std::size_t dimension() const { return static_cast<std::size_t>(draws.cols()); }
  std::size_t chains() const { return chain_start.size(); }

  Eigen::MatrixXd chain(std::size_t c) const {
    const std::size_t end = c + 1 < chain_start.size() ? chain_start[c + 1] : size();
    return draws.middleRows(static_cast<Eigen::Index>(chain_start[c]), static_cast<Eigen::Index>(end - chain_start[c]));
  }
  std::vector<Eigen::MatrixXd> split_by_chain() const {
    std::vector<Eigen::MatrixXd> out;
    for (std::size_t c = 0; c < chains(); ++c) out.push_back(chain(c));
    return out;
  }
};

/// Thresholds of the auto-refit policy.
struct RefitPolicy {
  std::size_t max_attempts = 3;
  double rhat_threshold = 1.01;
  double ess_threshold = 400.0;
  double accept_increment = 0.01;
  double accept_cap = 0.999;
};

inline bool needs_refit(const DiagnosticsReport& d, const RefitPolicy& policy = {}) {
  return d.divergences > 0 || d.rhat_max() > policy.rhat_threshold || d.ess_min() < policy.ess_threshold;
}

namespace hmc {

inline constexpr double kMaxDeltaH = 1000.0;

/// Position, momentum, gradient and log density of a phase-space point.
struct Point {
  Eigen::VectorXd q, p, grad;
  double logp = 0.0;
};

inline double log_sum_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

/// Dual averaging of log step size toward a target acceptance statistic.
class StepSizeAdapter {
 public:
  explicit StepSizeAdapter(double delta) : delta_(delta) {}
  void set_mu(double mu) { mu_ = mu; }
  void restart() {
    counter_ = 0;
    s_bar_ = 0.0;
    x_bar_ = 0.0;
  }
  double learn(double accept_stat) {
    ++counter_;
    accept_stat = std::min(1.0, accept_stat);
    const double n = static_cast<double>(counter_);
    const double eta = 1.0 / (n + t0_);
    s_bar_ = (1.0 - eta) * s_bar_ + eta * (delta_ - accept_stat);
    const double x = mu_ - s_bar_ * std::sqrt(n) / gamma_;
    const double x_eta = std::pow(n, -kappa_);
    x_bar_ = (1.0 - x_eta) * x_bar_ + x_eta * x;
    return std::exp(x);
  }
  double final_step() const { return std::exp(x_bar_); }

 private:
  double delta_;
  double mu_ = std::log(10.0);
  double gamma_ = 0.05, t0_ = 10.0, kappa_ = 0.75;
  std::size_t counter_ = 0;
  double s_bar_ = 0.0, x_bar_ = 0.0;
};

/// Metric adaptation schedule over `warmup` iterations: an initial
/// step-size-only buffer (15%), slow windows that double from 25 draws and
/// fill 75%, and a terminal step-size-only buffer (10%).
class WindowSchedule {
 public:
  explicit WindowSchedule(std::size_t warmup) {
    init_ = static_cast<std::size_t>(0.15 * static_cast<double>(warmup));
    term_ = static_cast<std::size_t>(0.10 * static_cast<double>(warmup));
    const std::size_t slow_end = warmup - term_;
    if (warmup < 20 || slow_end <= init_) return;
    std::size_t start = init_, size = 25;
    while (start < slow_end) {
      std::size_t end = start + size;
      // Merge a window with its successor when the successor would not fit.
      if (end + 2 * size > slow_end || end >= slow_end) end = slow_end;
      ends_.push_back(end);
      start = end;
      size *= 2;
    }
  }
  bool collecting(std::size_t i) const { return !ends_.empty() && i >= init_ && i < ends_.back(); }
  bool window_end(std::size_t i) const { return std::find(ends_.begin(), ends_.end(), i + 1) != ends_.end(); }
  const std::vector<std::size_t>& ends() const { return ends_; }
  std::size_t init_buffer() const { return init_; }
  std::size_t term_buffer() const { return term_; }

 private:
  std::size_t init_ = 0, term_ = 0;
  std::vector<std::size_t> ends_;
};

struct TransitionInfo {
  double accept_stat = 0.0;
  std::size_t leapfrogs = 0;
  std::size_t depth = 0;
  bool divergent = false;
};

template <class Target>
class Nuts {
 public:
  Nuts(Target target, std::size_t dim, std::uint64_t seed, std::uint64_t stream)
      : target_(std::move(target)), dim_(dim), rng_(seed, stream),
        inv_metric_(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(dim))) {}

  Point make_point(const Eigen::VectorXd& q) {
    Point z;
    z.q = q;
    z.p = Eigen::VectorXd::Zero(q.size());
    z.grad.resize(q.size());
    z.logp = evaluate(z.q, z.grad);
    return z;
  }

  double evaluate(const Eigen::VectorXd& q, Eigen::VectorXd& grad) {
    double v = target_(q, grad);
    if (std::isnan(v) || !grad.allFinite()) v = -std::numeric_limits<double>::infinity();
    return v;
  }

  double kinetic(const Point& z) const { return 0.5 * z.p.dot(inv_metric_.cwiseProduct(z.p)); }
  double hamiltonian(const Point& z) const {
    const double h = -z.logp + kinetic(z);
    return std::isnan(h) ? std::numeric_limits<double>::infinity() : h;
  }

  /// One velocity-Verlet step of signed size `eps`.
  void leapfrog(Point& z, double eps) {
    z.p += 0.5 * eps * z.grad;
    z.q += eps * inv_metric_.cwiseProduct(z.p);
    z.logp = evaluate(z.q, z.grad);
    if (!std::isfinite(z.logp)) return;
    z.p += 0.5 * eps * z.grad;
  }

  void sample_momentum(Point& z) {
    for (Eigen::Index i = 0; i < z.p.size(); ++i) z.p[i] = rng_.normal() / std::sqrt(inv_metric_[i]);
  }

  /// Doubles the step size until the one-step acceptance crosses 0.8.
  void init_stepsize(const Point& start) {
    if (!(step_ > 0.0) || step_ > 1e7) return;
    Point z = start;
    sample_momentum(z);
    double h0 = hamiltonian(z);
    leapfrog(z, step_);
    double delta = h0 - hamiltonian(z);
    const int direction = delta > std::log(0.8) ? 1 : -1;
    for (;;) {
      z = start;
      sample_momentum(z);
      h0 = hamiltonian(z);
      leapfrog(z, step_);
      delta = h0 - hamiltonian(z);
      if (direction == 1 && !(delta > std::log(0.8))) break;
      if (direction == -1 && !(delta < std::log(0.8))) break;
      step_ = direction == 1 ? 2.0 * step_ : 0.5 * step_;
      if (step_ > 1e7) throw SamplerError("sampler: step size diverged upward; posterior may be improper");
      if (step_ == 0.0) throw SamplerError("sampler: step size collapsed to zero; posterior is not smooth at the start");
    }
  }

  TransitionInfo transition(Point& current) {
    TransitionInfo info;
    Point z = current;
    sample_momentum(z);
    const double h0 = hamiltonian(z);

    Point z_fwd = z, z_bck = z, z_sample = z, z_propose = z;
    Eigen::VectorXd p_sharp_fwd_bck = inv_metric_.cwiseProduct(z.p);
    Eigen::VectorXd p_sharp_fwd_fwd = p_sharp_fwd_bck, p_sharp_bck_fwd = p_sharp_fwd_bck,
                    p_sharp_bck_bck = p_sharp_fwd_bck;
    Eigen::VectorXd p_fwd_fwd = z.p, p_fwd_bck = z.p, p_bck_fwd = z.p, p_bck_bck = z.p;
    Eigen::VectorXd rho = z.p;
    double log_sum_weight = 0.0;
    double sum_metro = 0.0;
    std::size_t n_leapfrog = 0;
    divergent_ = false;

    while (info.depth < max_depth_) {
      Eigen::VectorXd rho_fwd = Eigen::VectorXd::Zero(z.q.size()), rho_bck = rho_fwd;
      double lsw_subtree = -std::numeric_limits<double>::infinity();
      bool valid;
      if (rng_.uniform() > 0.5) {
        z = z_fwd;
        rho_bck = rho;
        p_bck_fwd = p_fwd_fwd;
        p_sharp_bck_fwd = p_sharp_fwd_fwd;
        valid = build_tree(info.depth, z, z_propose, p_sharp_fwd_bck, p_sharp_fwd_fwd, rho_fwd, p_fwd_bck, p_fwd_fwd, h0,
                           1.0, n_leapfrog, lsw_subtree, sum_metro);
        z_fwd = z;
      } else {
        z = z_bck;
        rho_fwd = rho;
        p_fwd_bck = p_bck_bck;
        p_sharp_fwd_bck = p_sharp_bck_bck;
        valid = build_tree(info.depth, z, z_propose, p_sharp_bck_fwd, p_sharp_bck_bck, rho_bck, p_bck_fwd, p_bck_bck, h0,
                           -1.0, n_leapfrog, lsw_subtree, sum_metro);
        z_bck = z;
      }
      if (!valid) break;
      ++info.depth;
      if (lsw_subtree > log_sum_weight) {
        z_sample = z_propose;
      } else if (rng_.uniform() < std::exp(lsw_subtree - log_sum_weight)) {
        z_sample = z_propose;
      }
      log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);
      rho = rho_bck + rho_fwd;
      bool persist = criterion(p_sharp_bck_bck, p_sharp_fwd_fwd, rho);
      persist = persist && criterion(p_sharp_bck_bck, p_sharp_fwd_bck, rho_bck + p_fwd_bck);
      persist = persist && criterion(p_sharp_bck_fwd, p_sharp_fwd_fwd, rho_fwd + p_bck_fwd);
      if (!persist) break;
    }
    info.leapfrogs = n_leapfrog;
    info.divergent = divergent_;
    info.accept_stat = n_leapfrog > 0 ? sum_metro / static_cast<double>(n_leapfrog) : 0.0;
    current = z_sample;
    return info;
  }

  Eigen::VectorXd& inv_metric() { return inv_metric_; }
  double& step_size() { return step_; }
  std::size_t& max_depth() { return max_depth_; }
  Rng& rng() { return rng_; }
  std::size_t dimension() const { return dim_; }

 private:
  static bool criterion(const Eigen::VectorXd& sharp_minus, const Eigen::VectorXd& sharp_plus, const Eigen::VectorXd& rho) {
    return sharp_plus.dot(rho) > 0.0 && sharp_minus.dot(rho) > 0.0;
  }

  bool build_tree(std::size_t depth, Point& z, Point& z_propose, Eigen::VectorXd& p_sharp_beg, Eigen::VectorXd& p_sharp_end,
                  Eigen::VectorXd& rho, Eigen::VectorXd& p_beg, Eigen::VectorXd& p_end, double h0, double sign,
                  std::size_t& n_leapfrog, double& log_sum_weight, double& sum_metro) {
    if (depth == 0) {
      leapfrog(z, sign * step_);
      ++n_leapfrog;
      double h = hamiltonian(z);
      if (!std::isfinite(z.logp)) h = std::numeric_limits<double>::infinity();
      if (h - h0 > kMaxDeltaH) divergent_ = true;
      log_sum_weight = log_sum_exp(log_sum_weight, h0 - h);
      sum_metro += h0 - h > 0.0 ? 1.0 : std::exp(h0 - h);
      z_propose = z;
      p_sharp_beg = inv_metric_.cwiseProduct(z.p);
      p_sharp_end = p_sharp_beg;
      rho += z.p;
      p_beg = z.p;
      p_end = p_beg;
      return !divergent_;
    }

    double lsw_init = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd p_init_end(z.q.size()), p_sharp_init_end(z.q.size());
    Eigen::VectorXd rho_init = Eigen::VectorXd::Zero(z.q.size());
    if (!build_tree(depth - 1, z, z_propose, p_sharp_beg, p_sharp_init_end, rho_init, p_beg, p_init_end, h0, sign,
                    n_leapfrog, lsw_init, sum_metro))
      return false;

    Point z_propose_final = z;
    double lsw_final = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd p_final_beg(z.q.size()), p_sharp_final_beg(z.q.size());
    Eigen::VectorXd rho_final = Eigen::VectorXd::Zero(z.q.size());
    if (!build_tree(depth - 1, z, z_propose_final, p_sharp_final_beg, p_sharp_end, rho_final, p_final_beg, p_end, h0, sign,
                    n_leapfrog, lsw_final, sum_metro))
      return false;

    const double lsw_subtree = log_sum_exp(lsw_init, lsw_final);
    log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);
    if (lsw_final > lsw_subtree) {
      z_propose = z_propose_final;
    } else if (rng_.uniform() < std::exp(lsw_final - lsw_subtree)) {
      z_propose = z_propose_final;
    }
    const Eigen::VectorXd rho_subtree = rho_init + rho_final;
    rho += rho_subtree;
    bool persist = criterion(p_sharp_beg, p_sharp_end, rho_subtree);
    persist = persist && criterion(p_sharp_beg, p_sharp_final_beg, rho_init + p_final_beg);
    persist = persist && criterion(p_sharp_init_end, p_sharp_end, rho_final + p_init_end);
    return persist;
  }

  Target target_;
  std::size_t dim_;
  Rng rng_;
  Eigen::VectorXd inv_metric_;
  double step_ = 1.0;
  std::size_t max_depth_ = 10;
  bool divergent_ = false;
};

/// Welford accumulator for per-coordinate variances.
class VarianceEstimator {
 public:
  explicit VarianceEstimator(std::size_t dim)
      : mean_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim))), m2_(mean_) {}
  void restart() {
    n_ = 0;
    mean_.setZero();
    m2_.setZero();
  }
  void add(const Eigen::VectorXd& x) {
    ++n_;
    const Eigen::VectorXd delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta.cwiseProduct(x - mean_);
  }
  std::size_t count() const { return n_; }
  /// Sample variance shrunk toward 1e-3.
  Eigen::VectorXd regularized() const {
    const double n = static_cast<double>(n_);
    const Eigen::VectorXd var = m2_ / (n - 1.0);
    return (n / (n + 5.0)) * var + Eigen::VectorXd::Constant(var.size(), 1e-3 * (5.0 / (n + 5.0)));
  }

 private:
  std::size_t n_ = 0;
  Eigen::VectorXd mean_, m2_;
};

struct ChainResult {
  Eigen::MatrixXd draws;
  std::size_t divergences = 0;
  std::size_t treedepth_hits = 0;
  std::size_t warmup_divergences = 0;
  double step_size = 0.0;
  double accept_sum = 0.0;
  Eigen::VectorXd inv_metric;
};

template <class Target>
ChainResult run_chain(const Target& target, std::size_t dim, const SamplerConfig& cfg, std::size_t chain) {
  Nuts<Target> nuts(target, dim, cfg.seed, chain);
  nuts.max_depth() = cfg.max_treedepth;

  Eigen::VectorXd q0 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  Point z;
  if (cfg.init == InitMode::Zero) {
    z = nuts.make_point(q0);
    if (!std::isfinite(z.logp)) throw SamplerError("sampler: log density is not finite at the zero initial point");
  } else {
    bool ok = false;
    for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
      for (Eigen::Index i = 0; i < q0.size(); ++i) q0[i] = -2.0 + 4.0 * nuts.rng().uniform();
      z = nuts.make_point(q0);
      ok = std::isfinite(z.logp);
    }
    if (!ok) throw SamplerError("sampler: no finite initial point found in 100 random attempts");
  }

  const std::size_t W = cfg.warmup;
  StepSizeAdapter adapter(cfg.target_accept);
  WindowSchedule schedule(W);
  VarianceEstimator estimator(dim);
  if (W > 0) {
    nuts.init_stepsize(z);
    adapter.set_mu(std::log(10.0 * nuts.step_size()));
    adapter.restart();
  }

  ChainResult out;
  out.draws.resize(static_cast<Eigen::Index>(cfg.draws_per_chain()), static_cast<Eigen::Index>(dim));
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const TransitionInfo info = nuts.transition(z);
    if (it < W) {
      if (info.divergent) ++out.warmup_divergences;
      nuts.step_size() = adapter.learn(info.accept_stat);
      if (schedule.collecting(it)) estimator.add(z.q);
      if (schedule.window_end(it)) {
        nuts.inv_metric() = estimator.regularized();
        estimator.restart();
        nuts.init_stepsize(z);
        adapter.set_mu(std::log(10.0 * nuts.step_size()));
        adapter.restart();
      }
      if (it + 1 == W) {
        nuts.step_size() = adapter.final_step();
        if (out.warmup_divergences == W) throw SamplerError("sampler: every warmup transition diverged");
      }
    } else {
      if (info.divergent) ++out.divergences;
      if (info.depth >= cfg.max_treedepth) ++out.treedepth_hits;
      out.accept_sum += info.accept_stat;
      out.draws.row(static_cast<Eigen::Index>(it - W)) = z.q.transpose();
    }
  }
  out.step_size = nuts.step_size();
  out.inv_metric = nuts.inv_metric();
  return out;
}

}  // namespace hmc

/// Fills the convergence fields of a report from chain-split draws.
inline void compute_diagnostics(const std::vector<Eigen::MatrixXd>& chains, DiagnosticsReport& d) {
  const std::size_t n = static_cast<std::size_t>(chains.front().rows());
  if (n >= 4) {
    d.rhat = compute_rhat(chains);
    d.rank_rhat = compute_rank_rhat(chains);
  } else {
    d.rhat = Eigen::VectorXd::Constant(chains.front().cols(), std::numeric_limits<double>::infinity());
    d.rank_rhat = d.rhat;
  }
  d.bulk_ess = n >= 2 ? compute_bulk_ess(chains)
                      : Eigen::VectorXd::Constant(chains.front().cols(), std::numeric_limits<double>::quiet_NaN());
}

/// Runs `cfg.chains` independent NUTS chains on `target` and pools the
/// post-warmup draws.
template <class Target>
PosteriorDraws sample_posterior(const Target& target, std::size_t dim, const SamplerConfig& cfg) {
  cfg.validate();
  if (dim == 0) throw InvalidInput("sampler: zero-dimensional target");
  std::vector<hmc::ChainResult> results(cfg.chains);
  parallel_for(cfg.chains, cfg.jobs, [&](std::size_t c) { results[c] = hmc::run_chain(target, dim, cfg, c); });

  PosteriorDraws out;
  const std::size_t n = cfg.draws_per_chain();
  out.draws.resize(static_cast<Eigen::Index>(n * cfg.chains), static_cast<Eigen::Index>(dim));
  DiagnosticsReport& d = out.diagnostics;
  double accept = 0.0;
  for (std::size_t c = 0; c < cfg.chains; ++c) {
    out.chain_start.push_back(c * n);
    out.draws.middleRows(static_cast<Eigen::Index>(c * n), static_cast<Eigen::Index>(n)) = results[c].draws;
    d.divergences += results[c].divergences;
    d.treedepth_hits += results[c].treedepth_hits;
    d.step_size.push_back(results[c].step_size);
    accept += results[c].accept_sum;
  }
  if (!out.draws.allFinite()) throw SamplerError("sampler: non-finite draws");
  d.mean_accept = accept / static_cast<double>(n * cfg.chains);
  d.config = cfg;
  compute_diagnostics(out.split_by_chain(), d);
  return out;
}

/// Settings for the next attempt: doubled length, higher acceptance target.
inline SamplerConfig escalate(const SamplerConfig& cfg, const RefitPolicy& policy = {}) {
  SamplerConfig next = cfg;
  next.iterations *= 2;
  next.warmup *= 2;
  next.target_accept = std::min(policy.accept_cap, cfg.target_accept + policy.accept_increment);
  return next;
}

/// Runs `fit(config)` and refits with escalated settings while the
/// diagnostics fail the policy. When attempts run out, returns the attempt
/// with the fewest divergences (ties broken by the lowest max R-hat) and
/// sets `diagnostics.failed`.
template <class FitFn>
PosteriorDraws fit_with_refit(FitFn&& fit, SamplerConfig cfg, const RefitPolicy& policy = {}) {
  if (policy.max_attempts < 1) throw InvalidInput("refit: max_attempts must be >= 1");
  std::vector<PosteriorDraws> attempts;
  for (std::size_t a = 1; a <= policy.max_attempts; ++a) {
    PosteriorDraws d = fit(cfg);
    d.diagnostics.attempts = a;
    d.diagnostics.config = cfg;
    if (!needs_refit(d.diagnostics, policy)) return d;
    attempts.push_back(std::move(d));
    if (a < policy.max_attempts) cfg = escalate(cfg, policy);
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < attempts.size(); ++i) {
    const auto& b = attempts[best].diagnostics;
    const auto& c = attempts[i].diagnostics;
    if (c.divergences < b.divergences || (c.divergences == b.divergences && c.rhat_max() < b.rhat_max())) best = i;
  }
  PosteriorDraws out = std::move(attempts[best]);
  out.diagnostics.attempts = policy.max_attempts;
  out.diagnostics.failed = true;
  return out;
}

template <class Target>
PosteriorDraws fit_with_refit(const Target& target, std::size_t dim, const SamplerConfig& cfg, const RefitPolicy& policy = {}) {
  return fit_with_refit([&](const SamplerConfig& c) { return sample_posterior(target, dim, c); }, cfg, policy);
}

/// Columnar CSV: `chain,draw,<names...>`, one row per draw.
inline std::string draws_to_csv(const PosteriorDraws& d) {
  std::ostringstream out;
  std::vector<std::string> header{"chain", "draw"};
  for (std::size_t i = 0; i < d.dimension(); ++i)
    header.push_back(i < d.names.size() ? d.names[i] : "theta[" + std::to_string(i + 1) + "]");
  out << csv::join(header) << '\n';
  for (std::size_t c = 0; c < d.chains(); ++c) {
    const Eigen::MatrixXd ch = d.chain(c);
    for (Eigen::Index r = 0; r < ch.rows(); ++r) {
      out << c << ',' << r;
      for (Eigen::Index j = 0; j < ch.cols(); ++j) out << ',' << csv::format(ch(r, j));
      out << '\n';
    }
  }
  return out.str();
}

inline PosteriorDraws draws_from_csv(const csv::Table& t) {
  if (t.header.size() < 3 || t.header[0] != "chain" || t.header[1] != "draw")
    throw FormatError("draws csv: header must start with chain,draw");
  PosteriorDraws d;
  d.names.assign(t.header.begin() + 2, t.header.end());
  d.draws.resize(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(d.names.size()));
  long prev_chain = -1;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const long c = static_cast<long>(csv::parse_double(t.rows[r][0]));
    if (c != prev_chain) {
      d.chain_start.push_back(r);
      prev_chain = c;
    }
    for (std::size_t j = 0; j < d.names.size(); ++j)
      d.draws(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = csv::parse_double(t.rows[r][j + 2]);
  }
  return d;
}

inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

inline nlohmann::json to_json(const SamplerConfig& c) {
  return {{"chains", c.chains},
          {"iterations", c.iterations},
          {"warmup", c.warmup},
          {"adapt_delta", c.target_accept},
          {"max_treedepth", c.max_treedepth},
          {"init", c.init == InitMode::Zero ? "zero" : "random"},
          {"seed", c.seed}};
}

inline nlohmann::json to_json(const DiagnosticsReport& d, const std::vector<std::string>& names = {}) {
  nlohmann::json per = nlohmann::json::array();
  for (Eigen::Index i = 0; i < d.rhat.size(); ++i) {
    per.push_back({{"name", static_cast<std::size_t>(i) < names.size() ? names[static_cast<std::size_t>(i)]
                                                                        : "theta[" + std::to_string(i + 1) + "]"},
                   {"rhat", finite_or_null(d.rhat[i])},
                   {"rank_rhat", finite_or_null(d.rank_rhat[i])},
                   {"bulk_ess", finite_or_null(d.bulk_ess[i])}});
  }
  return {{"divergences", d.divergences},
          {"treedepth_hits", d.treedepth_hits},
          {"rhat_max", finite_or_null(d.rhat_max())},
          {"ess_min", finite_or_null(d.ess_min())},
          {"attempts", d.attempts},
          {"failed", d.failed},
          {"mean_accept", d.mean_accept},
          {"step_size", d.step_size},
          {"config", to_json(d.config)},
          {"parameters", per}};
}

}  // namespace bdarma

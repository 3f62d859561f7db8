#pragma once

// Split R-hat, rank-normalized R-hat and bulk effective sample size.
//
// Chains are passed as one (draws x parameters) matrix per chain; all
// chains must have the same number of rows.

#include <Eigen/Dense>
#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "bdarma/error.hpp"

namespace bdarma {

namespace detail {

using Chains = std::vector<std::vector<double>>;

inline void check_chains(const std::vector<Eigen::MatrixXd>& chains, std::size_t min_chains, std::size_t min_draws) {
  if (chains.size() < min_chains) throw InvalidInput("diagnostics: too few chains");
  const Eigen::Index n = chains.front().rows(), d = chains.front().cols();
  if (static_cast<std::size_t>(n) < min_draws) throw InvalidInput("diagnostics: too few draws per chain");
  for (const auto& c : chains)
    if (c.rows() != n || c.cols() != d) throw InvalidInput("diagnostics: chains differ in shape");
}

inline Chains column(const std::vector<Eigen::MatrixXd>& chains, Eigen::Index col) {
  Chains out;
  out.reserve(chains.size());
  for (const auto& c : chains) out.emplace_back(c.col(col).data(), c.col(col).data() + c.rows());
  return out;
}

/// Halves every chain; an odd middle draw is dropped. Chains shorter than
/// four draws are left whole.
inline Chains split(const Chains& in) {
  const std::size_t n = in.front().size();
  if (n < 4) return in;
  const std::size_t half = n / 2;
  Chains out;
  for (const auto& c : in) {
    out.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
    out.emplace_back(c.end() - static_cast<std::ptrdiff_t>(half), c.end());
  }
  return out;
}

/// Replaces draws by normal scores of their pooled ranks (ties averaged).
inline Chains rank_normalize(const Chains& in) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t c = 0; c < in.size(); ++c)
    for (std::size_t i = 0; i < in[c].size(); ++i) all.push_back({in[c][i], c * in[c].size() + i});
  std::sort(all.begin(), all.end());
  const double S = static_cast<double>(all.size());
  std::vector<double> z(all.size());
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    const double rank = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
    const double p = (rank - 0.375) / (S + 0.25);
    const double score = -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
    for (std::size_t k = i; k < j; ++k) z[all[k].second] = score;
    i = j;
  }
  Chains out = in;
  for (std::size_t c = 0; c < out.size(); ++c)
    for (std::size_t i = 0; i < out[c].size(); ++i) out[c][i] = z[c * out[c].size() + i];
  return out;
}

struct ChainMoments {
  double within = 0.0;    // mean of per-chain sample variances
  double between = 0.0;   // n * variance of chain means
  std::vector<double> means;
};

inline ChainMoments moments(const Chains& ch) {
  ChainMoments m;
  const double n = static_cast<double>(ch.front().size());
  double grand = 0.0;
  for (const auto& c : ch) {
    const double mean = std::accumulate(c.begin(), c.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : c) ss += (v - mean) * (v - mean);
    m.within += n > 1 ? ss / (n - 1.0) : 0.0;
    m.means.push_back(mean);
    grand += mean;
  }
  const double M = static_cast<double>(ch.size());
  m.within /= M;
  grand /= M;
  if (ch.size() > 1) {
    double sb = 0.0;
    for (double v : m.means) sb += (v - grand) * (v - grand);
    m.between = n * sb / (M - 1.0);
  }
  return m;
}

inline double rhat_of(const Chains& ch) {
  const ChainMoments m = moments(ch);
  if (!(m.within > 0.0)) return std::numeric_limits<double>::infinity();
  const double n = static_cast<double>(ch.front().size());
  const double var_plus = (n - 1.0) / n * m.within + m.between / n;
  return std::sqrt(var_plus / m.within);
}

/// Effective sample size with Geyer's initial positive sequence and the
/// monotone correction. Returns NaN for zero within-chain variance.
inline double ess_of(const Chains& ch) {
  const std::size_t M = ch.size(), n = ch.front().size();
  const double S = static_cast<double>(M * n);
  const ChainMoments mo = moments(ch);
  if (!(mo.within > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  const double nn = static_cast<double>(n);
  const double var_plus = (nn - 1.0) / nn * mo.within + mo.between / nn;

  // Mean over chains of the biased autocovariance at `lag`.
  auto acov = [&](std::size_t lag) {
    double total = 0.0;
    for (std::size_t c = 0; c < M; ++c) {
      const auto& x = ch[c];
      const double mean = mo.means[c];
      double s = 0.0;
      for (std::size_t i = 0; i + lag < n; ++i) s += (x[i] - mean) * (x[i + lag] - mean);
      total += s / nn;
    }
    return total / static_cast<double>(M);
  };
  const double mean_var = mo.within;  // acov(0) * n / (n - 1)
  auto rho = [&](std::size_t lag) { return 1.0 - (mean_var - acov(lag)) / var_plus; };

  std::vector<double> r(n + 1, 0.0);
  r[0] = 1.0;
  double even = 1.0, odd = n > 1 ? rho(1) : 0.0;
  if (n > 1) r[1] = odd;
  std::size_t t = 0;
  while (t + 5 < n && std::isfinite(even + odd) && even + odd > 0.0) {
    t += 2;
    even = rho(t);
    odd = rho(t + 1);
    if (even + odd >= 0.0) {
      r[t] = even;
      r[t + 1] = odd;
    }
  }
  const std::size_t max_t = t;
  if (even > 0.0) r[max_t] = even;
  for (std::size_t s = 2; s + 2 <= max_t; s += 2) {
    if (r[s] + r[s + 1] > r[s - 2] + r[s - 1]) {
      r[s] = 0.5 * (r[s - 2] + r[s - 1]);
      r[s + 1] = r[s];
    }
  }
  double tau = -1.0 + r[max_t];
  for (std::size_t s = 0; s < std::max<std::size_t>(max_t, 1); ++s) tau += 2.0 * r[s];
  tau = std::max(tau, 1.0 / std::log10(S));
  return std::min(S / tau, S);
}

}  // namespace detail

/// Plain split R-hat per parameter (a single chain is split in two). +inf
/// when a parameter has zero within-chain variance.
inline Eigen::VectorXd compute_rhat(const std::vector<Eigen::MatrixXd>& chains) {
  detail::check_chains(chains, 1, 4);
  Eigen::VectorXd out(chains.front().cols());
  for (Eigen::Index d = 0; d < out.size(); ++d) out[d] = detail::rhat_of(detail::split(detail::column(chains, d)));
  return out;
}

/// Split R-hat computed on rank-normalized draws.
inline Eigen::VectorXd compute_rank_rhat(const std::vector<Eigen::MatrixXd>& chains) {
  detail::check_chains(chains, 1, 4);
  Eigen::VectorXd out(chains.front().cols());
  for (Eigen::Index d = 0; d < out.size(); ++d) {
    const auto col = detail::column(chains, d);
    const detail::ChainMoments m = detail::moments(col);
    out[d] = m.within > 0.0 ? detail::rhat_of(detail::split(detail::rank_normalize(col)))
                            : std::numeric_limits<double>::infinity();
  }
  return out;
}

/// Bulk ESS: rank-normalized split chains, capped at the total draw count.
/// NaN when a parameter has zero within-chain variance.
inline Eigen::VectorXd compute_bulk_ess(const std::vector<Eigen::MatrixXd>& chains) {
  detail::check_chains(chains, 1, 2);
  Eigen::VectorXd out(chains.front().cols());
  for (Eigen::Index d = 0; d < out.size(); ++d) {
    const auto col = detail::column(chains, d);
    const detail::ChainMoments m = detail::moments(col);
    out[d] = m.within > 0.0 ? detail::ess_of(detail::split(detail::rank_normalize(col)))
                            : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

}  // namespace bdarma

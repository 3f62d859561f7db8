#pragma once

// Dirichlet ARMA state recursion on the ALR scale.
//
//   eta_t = X_t beta + sum_p A_p (alr(y_{t-p}) - X_{t-p} beta) + sum_q B_q eps_{t-q}
//   phi_t = exp(Z_t gamma),   y_t ~ Dir(phi_t alr_inv(eta_t))
//
// The MA regressor is either the raw residual alr(y_t) - eta_t or the
// centered innovation alr(y_t) - g(mu_t, phi_t), where g is the digamma
// conditional ALR mean. The first m = max(P, Q) rows are conditioned on:
// their innovations are zero and they contribute no likelihood term.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "bdarma/dates.hpp"
#include "bdarma/dirichlet.hpp"
#include "bdarma/error.hpp"
#include "bdarma/panel.hpp"
#include "bdarma/rng.hpp"
#include "bdarma/simplex.hpp"
#include "bdarma/special.hpp"

namespace bdarma {

enum class Variant { Raw, Centered };

inline std::string to_string(Variant v) { return v == Variant::Raw ? "raw" : "centered"; }

inline Variant parse_variant(const std::string& s) {
  if (s == "raw") return Variant::Raw;
  if (s == "centered") return Variant::Centered;
  throw InvalidInput("unknown variant '" + s + "' (expected raw|centered)");
}

/// Model orders and dimensions.
struct DarmaSpec {
  std::size_t P = 1;
  std::size_t Q = 1;
  std::size_t J = 4;
  std::size_t ref = 2;  // zero-based reference component
  Variant variant = Variant::Centered;
  std::size_t M = 1;  // mean covariates
  std::size_t R = 2;  // precision covariates

  std::size_t K() const { return J - 1; }
  std::size_t lags() const { return std::max(P, Q); }
  std::size_t dimension() const { return (P + Q) * K() * K() + K() * M + R; }

  std::size_t offset_B() const { return P * K() * K(); }
  std::size_t offset_beta() const { return (P + Q) * K() * K(); }
  std::size_t offset_gamma() const { return offset_beta() + K() * M; }

  void validate() const {
    if (J < 2) throw InvalidInput("DarmaSpec: J must be at least 2");
    if (ref >= J) throw InvalidInput("DarmaSpec: reference index out of range");
    if (M < 1 && R < 1) throw InvalidInput("DarmaSpec: need at least one covariate");
  }
};

/// Normal prior scales; every coefficient has a zero-mean normal prior.
struct PriorScales {
  double ar = 0.5;
  double ma = 0.5;
  double beta = 1.0;
  double gamma = 1.0;
};

/// Coefficients of the recursion.
///
/// Flattened order: A_1..A_P row-major, then B_1..B_Q row-major, then beta
/// column-major (K entries per covariate), then gamma.
struct DarmaParams {
  std::vector<Eigen::MatrixXd> A;
  std::vector<Eigen::MatrixXd> B;
  Eigen::MatrixXd beta;  // K x M
  Eigen::VectorXd gamma;  // R

  static DarmaParams zeros(const DarmaSpec& spec) {
    const auto K = static_cast<Eigen::Index>(spec.K());
    DarmaParams p;
    p.A.assign(spec.P, Eigen::MatrixXd::Zero(K, K));
    p.B.assign(spec.Q, Eigen::MatrixXd::Zero(K, K));
    p.beta = Eigen::MatrixXd::Zero(K, static_cast<Eigen::Index>(spec.M));
    p.gamma = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.R));
    return p;
  }

  void check(const DarmaSpec& spec) const {
    const auto K = static_cast<Eigen::Index>(spec.K());
    if (A.size() != spec.P || B.size() != spec.Q) throw InvalidInput("DarmaParams: lag count mismatch");
    for (const auto& m : A)
      if (m.rows() != K || m.cols() != K || !m.allFinite()) throw InvalidInput("DarmaParams: bad AR matrix");
    for (const auto& m : B)
      if (m.rows() != K || m.cols() != K || !m.allFinite()) throw InvalidInput("DarmaParams: bad MA matrix");
    if (beta.rows() != K || beta.cols() != static_cast<Eigen::Index>(spec.M) || !beta.allFinite())
      throw InvalidInput("DarmaParams: bad beta");
    if (gamma.size() != static_cast<Eigen::Index>(spec.R) || !gamma.allFinite())
      throw InvalidInput("DarmaParams: bad gamma");
  }

  Eigen::VectorXd flatten(const DarmaSpec& spec) const {
    check(spec);
    Eigen::VectorXd theta(static_cast<Eigen::Index>(spec.dimension()));
    Eigen::Index i = 0;
    auto put_row_major = [&](const Eigen::MatrixXd& m) {
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) theta[i++] = m(r, c);
    };
    for (const auto& m : A) put_row_major(m);
    for (const auto& m : B) put_row_major(m);
    for (Eigen::Index c = 0; c < beta.cols(); ++c)
      for (Eigen::Index r = 0; r < beta.rows(); ++r) theta[i++] = beta(r, c);
    for (Eigen::Index r = 0; r < gamma.size(); ++r) theta[i++] = gamma[r];
    return theta;
  }

  static DarmaParams unflatten(const DarmaSpec& spec, const Eigen::VectorXd& theta) {
    if (theta.size() != static_cast<Eigen::Index>(spec.dimension()))
      throw InvalidInput("unflatten: expected " + std::to_string(spec.dimension()) + " values, got " +
                         std::to_string(theta.size()));
    DarmaParams p = zeros(spec);
    Eigen::Index i = 0;
    auto take_row_major = [&](Eigen::MatrixXd& m) {
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = theta[i++];
    };
    for (auto& m : p.A) take_row_major(m);
    for (auto& m : p.B) take_row_major(m);
    for (Eigen::Index c = 0; c < p.beta.cols(); ++c)
      for (Eigen::Index r = 0; r < p.beta.rows(); ++r) p.beta(r, c) = theta[i++];
    for (Eigen::Index r = 0; r < p.gamma.size(); ++r) p.gamma[r] = theta[i++];
    return p;
  }
};

/// Column names for the flattened parameter vector, one-based like "A1[2,3]".
inline std::vector<std::string> parameter_names(const DarmaSpec& spec) {
  std::vector<std::string> names;
  const std::size_t K = spec.K();
  auto matrix = [&](char tag, std::size_t lag) {
    for (std::size_t r = 0; r < K; ++r)
      for (std::size_t c = 0; c < K; ++c)
        names.push_back(std::string(1, tag) + std::to_string(lag) + "[" + std::to_string(r + 1) + "," +
                        std::to_string(c + 1) + "]");
  };
  for (std::size_t p = 1; p <= spec.P; ++p) matrix('A', p);
  for (std::size_t q = 1; q <= spec.Q; ++q) matrix('B', q);
  for (std::size_t c = 0; c < spec.M; ++c)
    for (std::size_t r = 0; r < K; ++r)
      names.push_back("beta[" + std::to_string(r + 1) + "," + std::to_string(c + 1) + "]");
  for (std::size_t r = 0; r < spec.R; ++r) names.push_back("gamma[" + std::to_string(r + 1) + "]");
  return names;
}

/// Filtered quantities for every row of a panel.
///
/// Rows before `start` carry eta = X beta and zero innovations.
struct StatePath {
  Eigen::MatrixXd eta;  // T x K
  Eigen::MatrixXd mu;   // T x J
  Eigen::VectorXd phi;  // T
  Eigen::MatrixXd eps;  // T x K, innovation of the selected variant
  Eigen::MatrixXd g;    // T x K, conditional ALR mean g(mu_t, phi_t)
  Eigen::MatrixXd a;    // T x K, alr(y_t)
  Eigen::MatrixXd xb;   // T x K, X_t beta
  std::size_t start = 0;

  std::size_t rows() const { return static_cast<std::size_t>(eta.rows()); }
  /// b_t = g(mu_t, phi_t) - eta_t.
  Eigen::MatrixXd bias() const { return g - eta; }
  Eigen::MatrixXd raw_residual() const { return a - eta; }
  Eigen::MatrixXd centered_innovation() const { return a - g; }
};

namespace detail {

inline void check_panel_dims(const DarmaSpec& spec, const SeriesPanel& panel) {
  spec.validate();
  if (panel.parts() != spec.J) throw InvalidInput("panel has " + std::to_string(panel.parts()) + " parts, spec J = " +
                                                  std::to_string(spec.J));
  if (static_cast<std::size_t>(panel.X.cols()) != spec.M || static_cast<std::size_t>(panel.Z.cols()) != spec.R)
    throw InvalidInput("panel covariate widths do not match the spec (M, R)");
  if (panel.X.rows() != panel.Y.rows() || panel.Z.rows() != panel.Y.rows())
    throw InvalidInput("panel covariate rows do not match Y");
  if (panel.rows() <= spec.lags()) throw InvalidInput("panel must be longer than max(P, Q)");
}

inline Eigen::MatrixXd alr_rows(const Eigen::MatrixXd& Y, std::size_t ref) {
  const auto T = Y.rows();
  const auto J = Y.cols();
  Eigen::MatrixXd a(T, J - 1);
  for (Eigen::Index t = 0; t < T; ++t) {
    const double lr = std::log(Y(t, static_cast<Eigen::Index>(ref)));
    for (Eigen::Index k = 0; k < J - 1; ++k)
      a(t, k) = std::log(Y(t, static_cast<Eigen::Index>(alr_component(static_cast<std::size_t>(k), ref)))) - lr;
  }
  return a;
}

inline double normal_log_density(double x, double sd) {
  return -0.5 * std::log(2.0 * std::numbers::pi) - std::log(sd) - 0.5 * (x / sd) * (x / sd);
}

}  // namespace detail

/// Runs the recursion over the whole panel.
inline StatePath filter(const DarmaSpec& spec, const DarmaParams& params, const SeriesPanel& panel) {
  detail::check_panel_dims(spec, panel);
  params.check(spec);
  const auto T = static_cast<Eigen::Index>(panel.rows());
  const auto K = static_cast<Eigen::Index>(spec.K());
  const auto J = static_cast<Eigen::Index>(spec.J);
  const std::size_t m = spec.lags();

  StatePath s;
  s.start = m;
  s.a = detail::alr_rows(panel.Y, spec.ref);
  s.eta.resize(T, K);
  s.mu.resize(T, J);
  s.phi.resize(T);
  s.eps = Eigen::MatrixXd::Zero(T, K);
  s.g.resize(T, K);
  s.xb = panel.X * params.beta.transpose();
  const Eigen::MatrixXd& xb = s.xb;

  Eigen::VectorXd eta(K), mu(J), g(K);
  for (Eigen::Index t = 0; t < T; ++t) {
    eta = xb.row(t).transpose();
    if (static_cast<std::size_t>(t) >= m) {
      for (std::size_t p = 1; p <= spec.P; ++p) {
        const auto lag = t - static_cast<Eigen::Index>(p);
        eta += params.A[p - 1] * (s.a.row(lag) - xb.row(lag)).transpose();
      }
      for (std::size_t q = 1; q <= spec.Q; ++q)
        eta += params.B[q - 1] * s.eps.row(t - static_cast<Eigen::Index>(q)).transpose();
    }
    const double phi = std::exp(panel.Z.row(t).dot(params.gamma));
    if (!eta.allFinite() || !std::isfinite(phi) || !(phi > 0.0))
      throw NumericalError("filter: non-finite state at row " + std::to_string(t));
    alr_inv_into(eta.data(), static_cast<std::size_t>(K), spec.ref, mu.data());
    detail::alr_mean_into(mu.data(), spec.J, phi, spec.ref, g.data());
    s.eta.row(t) = eta.transpose();
    s.mu.row(t) = mu.transpose();
    s.phi[t] = phi;
    s.g.row(t) = g.transpose();
    if (static_cast<std::size_t>(t) >= m)
      s.eps.row(t) = spec.variant == Variant::Raw ? (s.a.row(t) - eta.transpose()).eval()
                                                  : (s.a.row(t) - g.transpose()).eval();
  }
  return s;
}

/// Per-row Dirichlet log density on the filtered path (zero before `start`).
inline Eigen::VectorXd pointwise_log_likelihood(const DarmaSpec& spec, const DarmaParams& params,
                                                const SeriesPanel& panel) {
  const StatePath s = filter(spec, params, panel);
  const auto T = static_cast<Eigen::Index>(panel.rows());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(T);
  Eigen::VectorXd alpha(static_cast<Eigen::Index>(spec.J));
  for (auto t = static_cast<Eigen::Index>(s.start); t < T; ++t) {
    for (Eigen::Index j = 0; j < alpha.size(); ++j) alpha[j] = std::max(s.phi[t] * s.mu(t, j), kShapeFloor);
    const Eigen::VectorXd y = panel.Y.row(t).transpose();
    out[t] = detail::dirichlet_log_density(y.data(), alpha.data(), spec.J);
  }
  return out;
}

inline double log_likelihood(const DarmaSpec& spec, const DarmaParams& params, const SeriesPanel& panel) {
  return pointwise_log_likelihood(spec, params, panel).sum();
}

inline double log_prior(const DarmaSpec& spec, const DarmaParams& params, const PriorScales& prior = {}) {
  params.check(spec);
  double lp = 0.0;
  for (const auto& m : params.A)
    for (double v : m.reshaped()) lp += detail::normal_log_density(v, prior.ar);
  for (const auto& m : params.B)
    for (double v : m.reshaped()) lp += detail::normal_log_density(v, prior.ma);
  for (double v : params.beta.reshaped()) lp += detail::normal_log_density(v, prior.beta);
  for (double v : params.gamma) lp += detail::normal_log_density(v, prior.gamma);
  return lp;
}

inline double log_posterior(const DarmaSpec& spec, const DarmaParams& params, const SeriesPanel& panel,
                            const PriorScales& prior = {}) {
  return log_likelihood(spec, params, panel) + log_prior(spec, params, prior);
}

/// Log posterior and its gradient over the flattened parameter vector.
///
/// Single forward pass over the panel followed by reverse accumulation
/// through the recursion, softmax, digamma centering and precision link.
/// Holds mutable workspace: use one instance per thread.
class DarmaPosterior {
 public:
  enum class Terms { Full, LikelihoodOnly, PriorOnly };

  DarmaPosterior(DarmaSpec spec, const SeriesPanel& panel, PriorScales prior = {}, Terms terms = Terms::Full)
      : spec_(spec), prior_(prior), terms_(terms) {
    detail::check_panel_dims(spec_, panel);
    T_ = panel.rows();
    K_ = spec_.K();
    J_ = spec_.J;
    M_ = spec_.M;
    R_ = spec_.R;
    const Eigen::MatrixXd a = detail::alr_rows(panel.Y, spec_.ref);
    a_.resize(T_ * K_);
    logy_.resize(T_ * J_);
    X_.resize(T_ * M_);
    Z_.resize(T_ * R_);
    for (std::size_t t = 0; t < T_; ++t) {
      const auto ti = static_cast<Eigen::Index>(t);
      for (std::size_t k = 0; k < K_; ++k) a_[t * K_ + k] = a(ti, static_cast<Eigen::Index>(k));
      for (std::size_t j = 0; j < J_; ++j) logy_[t * J_ + j] = std::log(panel.Y(ti, static_cast<Eigen::Index>(j)));
      for (std::size_t c = 0; c < M_; ++c) X_[t * M_ + c] = panel.X(ti, static_cast<Eigen::Index>(c));
      for (std::size_t r = 0; r < R_; ++r) Z_[t * R_ + r] = panel.Z(ti, static_cast<Eigen::Index>(r));
    }
    xb_.resize(T_ * K_);
    dev_.resize(T_ * K_);
    eta_.resize(T_ * K_);
    eps_.resize(T_ * K_);
    eps_bar_.resize(T_ * K_);
    mu_.resize(T_ * J_);
    phi_.resize(T_);
    dalpha_.resize(T_ * J_);
    tri_.resize(T_ * J_);
    floored_.resize(T_ * J_);
    eta_bar_.resize(K_);
  }

  std::size_t dimension() const { return spec_.dimension(); }
  const DarmaSpec& spec() const { return spec_; }

  /// Returns log p(theta | y); fills `grad`. Returns -inf when the state
  /// leaves the representable range (gradient then unspecified).
  double operator()(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) {
    grad.setZero(static_cast<Eigen::Index>(dimension()));
    const double* th = theta.data();
    double* gr = grad.data();
    const std::size_t KK = K_ * K_;
    const std::size_t oB = spec_.offset_B(), oBeta = spec_.offset_beta(), oG = spec_.offset_gamma();
    const std::size_t m = spec_.lags();
    const bool centered = spec_.variant == Variant::Centered;
    const double ninf = -std::numeric_limits<double>::infinity();

    auto A = [&](std::size_t p, std::size_t i, std::size_t j) { return th[(p - 1) * KK + i * K_ + j]; };
    auto B = [&](std::size_t q, std::size_t i, std::size_t j) { return th[oB + (q - 1) * KK + i * K_ + j]; };

    for (std::size_t t = 0; t < T_; ++t)
      for (std::size_t k = 0; k < K_; ++k) {
        double v = 0.0;
        for (std::size_t c = 0; c < M_; ++c) v += th[oBeta + c * K_ + k] * X_[t * M_ + c];
        xb_[t * K_ + k] = v;
        dev_[t * K_ + k] = a_[t * K_ + k] - v;
      }

    double lp = 0.0;
    if (terms_ == Terms::PriorOnly) {
      add_prior(th, gr, lp);
      return lp;
    }
    std::fill(eps_.begin(), eps_.end(), 0.0);
    std::vector<double> psi(J_);
    for (std::size_t t = m; t < T_; ++t) {
      double* eta = &eta_[t * K_];
      for (std::size_t k = 0; k < K_; ++k) eta[k] = xb_[t * K_ + k];
      for (std::size_t p = 1; p <= spec_.P; ++p) {
        const double* d = &dev_[(t - p) * K_];
        for (std::size_t i = 0; i < K_; ++i)
          for (std::size_t j = 0; j < K_; ++j) eta[i] += A(p, i, j) * d[j];
      }
      for (std::size_t q = 1; q <= spec_.Q; ++q) {
        const double* e = &eps_[(t - q) * K_];
        for (std::size_t i = 0; i < K_; ++i)
          for (std::size_t j = 0; j < K_; ++j) eta[i] += B(q, i, j) * e[j];
      }
      double zg = 0.0;
      for (std::size_t r = 0; r < R_; ++r) zg += Z_[t * R_ + r] * th[oG + r];
      const double phi = std::exp(zg);
      bool ok = std::isfinite(phi) && phi > 0.0;
      for (std::size_t k = 0; k < K_; ++k) ok = ok && std::isfinite(eta[k]);
      if (!ok) return ninf;
      phi_[t] = phi;

      double* mu = &mu_[t * J_];
      alr_inv_into(eta, K_, spec_.ref, mu);
      double alpha0 = 0.0;
      double ll = 0.0;
      const double* ly = &logy_[t * J_];
      for (std::size_t j = 0; j < J_; ++j) {
        double alpha = phi * mu[j];
        const bool fl = alpha < kShapeFloor;
        floored_[t * J_ + j] = fl;
        if (fl) alpha = kShapeFloor;
        alpha0 += alpha;
        ll += (alpha - 1.0) * ly[j] - log_gamma(alpha);
        psi[j] = detail::digamma_unchecked(alpha);
        if (centered && spec_.Q > 0) tri_[t * J_ + j] = fl ? 0.0 : detail::trigamma_unchecked(alpha);
      }
      ll += log_gamma(alpha0);
      lp += ll;
      const double psi0 = detail::digamma_unchecked(alpha0);
      for (std::size_t j = 0; j < J_; ++j)
        dalpha_[t * J_ + j] = floored_[t * J_ + j] ? 0.0 : psi0 - psi[j] + ly[j];
      double* e = &eps_[t * K_];
      for (std::size_t k = 0; k < K_; ++k)
        e[k] = centered ? a_[t * K_ + k] - (psi[alr_component(k, spec_.ref)] - psi[spec_.ref])
                        : a_[t * K_ + k] - eta[k];
    }
    if (!std::isfinite(lp)) return ninf;

    // Reverse sweep.
    std::fill(eps_bar_.begin(), eps_bar_.end(), 0.0);
    std::vector<double> abar(J_);
    for (std::size_t tt = T_; tt-- > m;) {
      const std::size_t t = tt;
      const double* mu = &mu_[t * J_];
      const double phi = phi_[t];
      const double* ebar = &eps_bar_[t * K_];
      for (std::size_t j = 0; j < J_; ++j) abar[j] = dalpha_[t * J_ + j];
      if (centered) {
        // eps = a - g(alpha): adjoint of alpha picks up -J_g' ebar.
        double ref_acc = 0.0;
        for (std::size_t k = 0; k < K_; ++k) {
          const std::size_t c = alr_component(k, spec_.ref);
          abar[c] -= ebar[k] * tri_[t * J_ + c];
          ref_acc += ebar[k];
        }
        abar[spec_.ref] += ref_acc * tri_[t * J_ + spec_.ref];
      }
      // alpha_j = phi mu_j
      double phibar = 0.0, mubar_dot_mu = 0.0;
      for (std::size_t j = 0; j < J_; ++j) {
        phibar += abar[j] * mu[j];
        mubar_dot_mu += phi * abar[j] * mu[j];
      }
      for (std::size_t k = 0; k < K_; ++k) {
        const std::size_t c = alr_component(k, spec_.ref);
        eta_bar_[k] = mu[c] * (phi * abar[c] - mubar_dot_mu);
        if (!centered) eta_bar_[k] -= ebar[k];
      }
      for (std::size_t r = 0; r < R_; ++r) gr[oG + r] += phibar * phi * Z_[t * R_ + r];

      for (std::size_t p = 1; p <= spec_.P; ++p) {
        const double* d = &dev_[(t - p) * K_];
        double* gA = &gr[(p - 1) * KK];
        for (std::size_t i = 0; i < K_; ++i)
          for (std::size_t j = 0; j < K_; ++j) gA[i * K_ + j] += eta_bar_[i] * d[j];
      }
      for (std::size_t q = 1; q <= spec_.Q; ++q) {
        const double* e = &eps_[(t - q) * K_];
        double* gB = &gr[oB + (q - 1) * KK];
        for (std::size_t i = 0; i < K_; ++i)
          for (std::size_t j = 0; j < K_; ++j) gB[i * K_ + j] += eta_bar_[i] * e[j];
        if (t - q >= m) {
          double* eb = &eps_bar_[(t - q) * K_];
          for (std::size_t j = 0; j < K_; ++j)
            for (std::size_t i = 0; i < K_; ++i) eb[j] += B(q, i, j) * eta_bar_[i];
        }
      }
      // beta enters through X_t beta and through every AR deviation.
      for (std::size_t c = 0; c < M_; ++c)
        for (std::size_t k = 0; k < K_; ++k) gr[oBeta + c * K_ + k] += eta_bar_[k] * X_[t * M_ + c];
      for (std::size_t p = 1; p <= spec_.P; ++p) {
        for (std::size_t j = 0; j < K_; ++j) {
          double v = 0.0;
          for (std::size_t i = 0; i < K_; ++i) v += A(p, i, j) * eta_bar_[i];
          for (std::size_t c = 0; c < M_; ++c) gr[oBeta + c * K_ + j] -= v * X_[(t - p) * M_ + c];
        }
      }
    }

    if (terms_ == Terms::Full) add_prior(th, gr, lp);
    return lp;
  }

 private:
  void add_prior(const double* th, double* gr, double& lp) const {
    auto block = [&](std::size_t from, std::size_t to, double sd) {
      const double c = -0.5 * std::log(2.0 * std::numbers::pi) - std::log(sd);
      for (std::size_t i = from; i < to; ++i) {
        lp += c - 0.5 * th[i] * th[i] / (sd * sd);
        gr[i] -= th[i] / (sd * sd);
      }
    };
    block(0, spec_.offset_B(), prior_.ar);
    block(spec_.offset_B(), spec_.offset_beta(), prior_.ma);
    block(spec_.offset_beta(), spec_.offset_gamma(), prior_.beta);
    block(spec_.offset_gamma(), dimension(), prior_.gamma);
  }


  DarmaSpec spec_;
  PriorScales prior_;
  Terms terms_;
  std::size_t T_ = 0, K_ = 0, J_ = 0, M_ = 0, R_ = 0;
  std::vector<double> a_, logy_, X_, Z_;
  std::vector<double> xb_, dev_, eta_, eps_, eps_bar_, mu_, phi_, dalpha_, tri_;
  std::vector<char> floored_;
  std::vector<double> eta_bar_;
};

/// Gradient of log_posterior over the flattened parameter vector.
inline Eigen::VectorXd grad_log_posterior(const DarmaSpec& spec, const DarmaParams& params, const SeriesPanel& panel,
                                          const PriorScales& prior = {}) {
  DarmaPosterior post(spec, panel, prior);
  Eigen::VectorXd grad;
  const double lp = post(params.flatten(spec), grad);
  if (!std::isfinite(lp)) throw NumericalError("grad_log_posterior: log posterior is not finite");
  for (Eigen::Index i = 0; i < grad.size(); ++i)
    if (!std::isfinite(grad[i])) throw NumericalError("grad_log_posterior: non-finite gradient at coordinate " +
                                                      std::to_string(i));
  return grad;
}

/// Draws a panel forward through the recursion.
///
/// Rows before max(P, Q) are drawn from Dir(phi_t alr_inv(X_t beta)).
/// Throws NumericalError if the simulated state diverges.
inline SeriesPanel simulate(const DarmaSpec& spec, const DarmaParams& params, std::size_t T, const Eigen::MatrixXd& X,
                            const Eigen::MatrixXd& Z, std::uint64_t rng_seed) {
  spec.validate();
  params.check(spec);
  const std::size_t m = spec.lags();
  if (T <= m) throw InvalidInput("simulate: T must exceed max(P, Q)");
  if (static_cast<std::size_t>(X.rows()) != T || static_cast<std::size_t>(X.cols()) != spec.M ||
      static_cast<std::size_t>(Z.rows()) != T || static_cast<std::size_t>(Z.cols()) != spec.R)
    throw InvalidInput("simulate: covariate dimensions do not match (T, M, R)");

  Rng rng(rng_seed);
  const auto K = static_cast<Eigen::Index>(spec.K());
  const auto J = static_cast<Eigen::Index>(spec.J);
  const Eigen::MatrixXd xb = X * params.beta.transpose();
  Eigen::MatrixXd Y(static_cast<Eigen::Index>(T), J), a(static_cast<Eigen::Index>(T), K);
  Eigen::MatrixXd eps = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(T), K);
  Eigen::VectorXd eta(K), mu(J), alpha(J), y(J), g(K);
  for (Eigen::Index t = 0; t < static_cast<Eigen::Index>(T); ++t) {
    eta = xb.row(t).transpose();
    if (static_cast<std::size_t>(t) >= m) {
      for (std::size_t p = 1; p <= spec.P; ++p) {
        const auto lag = t - static_cast<Eigen::Index>(p);
        eta += params.A[p - 1] * (a.row(lag) - xb.row(lag)).transpose();
      }
      for (std::size_t q = 1; q <= spec.Q; ++q) eta += params.B[q - 1] * eps.row(t - static_cast<Eigen::Index>(q)).transpose();
    }
    const double phi = std::exp(Z.row(t).dot(params.gamma));
    if (!eta.allFinite() || !std::isfinite(phi)) throw NumericalError("simulate: path diverged at row " + std::to_string(t));
    alr_inv_into(eta.data(), spec.K(), spec.ref, mu.data());
    for (Eigen::Index j = 0; j < J; ++j) alpha[j] = std::max(phi * mu[j], kShapeFloor);
    detail::dirichlet_draw_into(alpha.data(), spec.J, rng, y.data());
    Y.row(t) = y.transpose();
    const double lr = std::log(y[static_cast<Eigen::Index>(spec.ref)]);
    for (Eigen::Index k = 0; k < K; ++k)
      a(t, k) = std::log(y[static_cast<Eigen::Index>(alr_component(static_cast<std::size_t>(k), spec.ref))]) - lr;
    if (static_cast<std::size_t>(t) >= m) {
      if (spec.variant == Variant::Raw) {
        eps.row(t) = a.row(t) - eta.transpose();
      } else {
        detail::alr_mean_into(mu.data(), spec.J, phi, spec.ref, g.data());
        eps.row(t) = a.row(t) - g.transpose();
      }
    }
  }

  SeriesPanel panel;
  panel.dates = dates::weekly("2000-01-05", T);
  panel.Y = std::move(Y);
  panel.X = X;
  panel.Z = Z;
  for (std::size_t j = 0; j < spec.J; ++j) panel.meta.components.push_back("c" + std::to_string(j + 1));
  return panel;
}

}  // namespace bdarma

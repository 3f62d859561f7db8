#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "bdarma/forecast.hpp"
#include "test_support.hpp"

using namespace bdarma;

namespace {

struct Scenario {
  DarmaSpec spec;
  DarmaParams params;
  SeriesPanel panel;
  StatePath state;
  Eigen::MatrixXd Xf, Zf;
};

Scenario make_setup(std::size_t P, std::size_t Q, Variant v, double log_phi, std::uint64_t seed, std::size_t T = 120) {
  Scenario s;
  s.spec.P = P;
  s.spec.Q = Q;
  s.spec.J = 4;
  s.spec.ref = 3;
  s.spec.variant = v;
  std::mt19937_64 gen(seed);
  s.params = fixtures::random_params(s.spec, gen, 0.25, 0.3, log_phi);
  const std::size_t H = 4;
  const Eigen::MatrixXd Z = fixtures::random_precision_design(T + H, s.spec.R, gen);
  const SeriesPanel full = simulate(s.spec, s.params, T + H, intercept_design(T + H), Z, seed + 1);
  s.panel = full.head(T);
  s.state = filter(s.spec, s.params, s.panel);
  s.Xf = full.X.bottomRows(H);
  s.Zf = full.Z.bottomRows(H);
  // Large centered innovations mean the path has hit the shape floor.
  EXPECT_LT(s.state.eps.cwiseAbs().maxCoeff(), 50.0) << "scenario left the stable regime";
  return s;
}

PosteriorDraws single_draw(const DarmaSpec& spec, const DarmaParams& p, std::size_t copies) {
  PosteriorDraws d;
  const Eigen::VectorXd theta = p.flatten(spec);
  d.draws = theta.transpose().replicate(static_cast<Eigen::Index>(copies), 1);
  d.chain_start = {0};
  return d;
}

}  // namespace

TEST(MeanPath, MatchesForwardSimulationOracle) {
  for (std::size_t Q : {1u, 2u})
    for (Variant v : {Variant::Raw, Variant::Centered}) {
      const Scenario s = make_setup(1, Q, v, std::log(20.0), 10 + Q);
      MeanPathOptions opt;
      opt.n_paths = 200000;
      opt.seed = 3;
      const MeanPath mp = forecast_mean_path(s.spec, s.params, s.state, 3, s.Xf, s.Zf, opt);
      const auto oracle = fixtures::oracle_eta_paths(s.spec, s.params, s.state, s.Xf, s.Zf, 3, 100000, 99);
      for (Eigen::Index h = 0; h < 3; ++h)
        for (Eigen::Index k = 0; k < 3; ++k)
          EXPECT_NEAR(mp.eta(h, k), oracle.mean(h, k), 4.0 * oracle.se(h, k) + 1e-9)
              << to_string(v) << " Q=" << Q << " h=" << h + 1 << " k=" << k;
      EXPECT_TRUE(mp.exact[0]);
      EXPECT_TRUE(mp.exact[1]);
      EXPECT_FALSE(mp.exact[2]);
    }
}

TEST(MeanPath, CenteredMaTermVanishesBeyondQ) {
  for (std::size_t Q : {1u, 2u}) {
    const Scenario s = make_setup(1, Q, Variant::Centered, std::log(30.0), 20 + Q);
    const MeanPath mp = forecast_mean_path(s.spec, s.params, s.state, 4, s.Xf, s.Zf);
    for (std::size_t h = Q + 1; h <= 4; ++h)
      for (Eigen::Index k = 0; k < 3; ++k) EXPECT_EQ(mp.ma(static_cast<Eigen::Index>(h - 1), k), 0.0);
    EXPECT_GT(mp.ma.row(0).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(MeanPath, OneStepUsesAllPastShocks) {
  for (Variant v : {Variant::Raw, Variant::Centered}) {
    const Scenario s = make_setup(2, 2, v, std::log(40.0), 31);
    const MeanPath mp = forecast_mean_path(s.spec, s.params, s.state, 1, s.Xf, s.Zf);
    const auto T = static_cast<Eigen::Index>(s.state.rows());
    const Eigen::VectorXd expected =
        s.params.B[0] * s.state.eps.row(T - 1).transpose() + s.params.B[1] * s.state.eps.row(T - 2).transpose();
    EXPECT_LT((mp.ma.row(0).transpose() - expected).cwiseAbs().maxCoeff(), 1e-14);
    // One step ahead equals the filter recursion at the next row.
    StatePath next = filter(s.spec, s.params, [&] {
      SeriesPanel p = s.panel;
      p.Y.conservativeResize(p.Y.rows() + 1, Eigen::NoChange);
      p.Y.row(p.Y.rows() - 1) = Eigen::RowVector4d(0.25, 0.25, 0.25, 0.25);
      p.X.conservativeResize(p.X.rows() + 1, Eigen::NoChange);
      p.X.row(p.X.rows() - 1) = s.Xf.row(0);
      p.Z.conservativeResize(p.Z.rows() + 1, Eigen::NoChange);
      p.Z.row(p.Z.rows() - 1) = s.Zf.row(0);
      p.dates.clear();
      return p;
    }());
    EXPECT_LT((next.eta.row(T) - mp.eta.row(0)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(MeanPath, RawMinusCenteredAtOneStepIsBiasTerm) {
  const Scenario s = make_setup(1, 1, Variant::Centered, std::log(15.0), 41);
  StatePath c = s.state, r = s.state;
  const auto T = static_cast<Eigen::Index>(s.state.rows());
  c.eps.row(T - 1) = s.state.centered_innovation().row(T - 1);
  r.eps.row(T - 1) = s.state.raw_residual().row(T - 1);
  DarmaSpec raw = s.spec;
  raw.variant = Variant::Raw;
  const MeanPath mc = forecast_mean_path(s.spec, s.params, c, 1, s.Xf, s.Zf);
  const MeanPath mr = forecast_mean_path(raw, s.params, r, 1, s.Xf, s.Zf);
  const Eigen::VectorXd expected = s.params.B[0] * s.state.bias().row(T - 1).transpose();
  EXPECT_LT(((mr.eta - mc.eta).row(0).transpose() - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(MeanPath, RejectsMissingFutureCovariates) {
  const Scenario s = make_setup(1, 1, Variant::Raw, std::log(20.0), 51);
  EXPECT_THROW(forecast_mean_path(s.spec, s.params, s.state, 5, s.Xf, s.Zf), InvalidInput);
  EXPECT_THROW(forecast_mean_path(s.spec, s.params, s.state, 0, s.Xf, s.Zf), InvalidInput);
  Eigen::MatrixXd bad = s.Zf;
  bad(0, 1) = NAN;
  EXPECT_THROW(forecast_mean_path(s.spec, s.params, s.state, 1, s.Xf, bad), InvalidInput);
}

TEST(PredictiveDraws, SingleDrawIsOneDirichletVariate) {
  const Scenario s = make_setup(1, 1, Variant::Centered, std::log(50.0), 61);
  SeriesPanel full = s.panel;
  const PosteriorDraws d = single_draw(s.spec, s.params, 1);
  const auto T = s.panel.rows();
  const ForecastResult r = predictive_draws(s.spec, d, full, T - 1, 1, 1, 5);
  ASSERT_EQ(r.draws.size(), 1u);
  ASSERT_EQ(r.draws[0].rows(), 1);
  EXPECT_NEAR(r.draws[0].row(0).sum(), 1.0, 1e-12);
  EXPECT_GT(r.draws[0].minCoeff(), 0.0);
  const StatePath st = filter(s.spec, s.params, full);
  EXPECT_LT((r.step_mu.row(0) - st.mu.row(static_cast<Eigen::Index>(T - 1))).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(r.step_phi[0], st.phi[static_cast<Eigen::Index>(T - 1)], 1e-9 * st.phi[static_cast<Eigen::Index>(T - 1)]);
}

TEST(PredictiveDraws, OneStepMeanMatchesDirichletMean) {
  const Scenario s = make_setup(1, 1, Variant::Raw, std::log(25.0), 71, 20);
  const std::size_t S = 100000;
  const PosteriorDraws d = single_draw(s.spec, s.params, S);
  const auto T = s.panel.rows();
  PredictiveOptions opt;
  opt.keep_mean_path = false;
  const ForecastResult r = predictive_draws(s.spec, d, s.panel, T - 1, 1, S, 9, opt);
  const StatePath st = filter(s.spec, s.params, s.panel);
  for (Eigen::Index j = 0; j < 4; ++j) {
    const double mean = r.draws[0].col(j).mean();
    const double sd = std::sqrt((r.draws[0].col(j).array() - mean).square().sum() / (S - 1.0));
    EXPECT_NEAR(mean, st.mu(static_cast<Eigen::Index>(T - 1), j), 4.0 * sd / std::sqrt(static_cast<double>(S))) << j;
  }
}

TEST(PredictiveDraws, SeededAndValidated) {
  const Scenario s = make_setup(1, 1, Variant::Centered, std::log(50.0), 81);
  PosteriorDraws d = single_draw(s.spec, s.params, 10);
  for (Eigen::Index i = 0; i < 10; ++i) d.draws(i, static_cast<Eigen::Index>(s.spec.offset_gamma())) += 0.01 * i;
  const auto T = s.panel.rows();
  const ForecastResult a = predictive_draws(s.spec, d, s.panel, T - 3, 3, 8, 4);
  const ForecastResult b = predictive_draws(s.spec, d, s.panel, T - 3, 3, 8, 4);
  for (std::size_t h = 0; h < 3; ++h) EXPECT_EQ(a.draws[h], b.draws[h]);
  EXPECT_EQ(a.draw_index, b.draw_index);
  std::vector<std::size_t> idx = a.draw_index;
  std::sort(idx.begin(), idx.end());
  EXPECT_TRUE(std::adjacent_find(idx.begin(), idx.end()) == idx.end());
  EXPECT_THROW(predictive_draws(s.spec, d, s.panel, T - 1, 1, 11, 4), InvalidInput);
  EXPECT_THROW(predictive_draws(s.spec, d, s.panel, T - 1, 2, 5, 4), InvalidInput);
  for (std::size_t h = 0; h < 3; ++h)
    for (Eigen::Index j = 0; j < 4; ++j) EXPECT_LE(a.lo(static_cast<Eigen::Index>(h), j), a.hi(static_cast<Eigen::Index>(h), j));
  EXPECT_NEAR(a.mu_mean.row(0).sum(), 1.0, 1e-12);
}

TEST(Lpd, SingleDrawEqualsDirichletDensity) {
  const Composition y{0.1, 0.2, 0.3, 0.4};
  Eigen::MatrixXd mu(1, 4);
  mu << 0.2, 0.2, 0.3, 0.3;
  const Eigen::VectorXd phi = Eigen::VectorXd::Constant(1, 35.0);
  const double v = lpd(y, mu, phi);
  EXPECT_NEAR(v, log_density(y, DirichletShape::from_mean(Composition{0.2, 0.2, 0.3, 0.3}, 35.0)), 1e-12);
  EXPECT_NEAR(lpd(y, mu.replicate(7, 1), phi.replicate(7, 1)), v, 1e-12);
}

TEST(Lpd, MatchesNaiveAverageAndIsPermutationInvariant) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(5.0, 80.0);
  const Composition y = fixtures::random_interior(4, gen, 0.05);
  const int S = 50;
  Eigen::MatrixXd mu(S, 4);
  Eigen::VectorXd phi(S);
  for (int s = 0; s < S; ++s) {
    mu.row(s) = fixtures::random_interior(4, gen, 0.05).parts().transpose();
    phi[s] = u(gen);
  }
  double naive = 0.0;
  for (int s = 0; s < S; ++s) {
    const double lg = std::lgamma(phi[s]);
    double acc = lg;
    for (int j = 0; j < 4; ++j) acc += (phi[s] * mu(s, j) - 1) * std::log(y[j]) - std::lgamma(phi[s] * mu(s, j));
    naive += std::exp(acc);
  }
  naive = std::log(naive / S);
  EXPECT_NEAR(lpd(y, mu, phi), naive, 1e-10);
  Eigen::MatrixXd mu_r = mu.colwise().reverse();
  Eigen::VectorXd phi_r = phi.reverse();
  EXPECT_NEAR(lpd(y, mu_r, phi_r), lpd(y, mu, phi), 1e-12);
  EXPECT_THROW(lpd(y, Eigen::MatrixXd(0, 4), Eigen::VectorXd(0)), InvalidInput);
}

TEST(Coverage, MedianCoveredOutsideNot) {
  std::mt19937_64 gen(6);
  Eigen::MatrixXd draws(101, 3);
  for (Eigen::Index i = 0; i < draws.rows(); ++i) draws.row(i) = fixtures::random_interior(3, gen, 0.01).parts().transpose();
  Eigen::Vector3d med;
  for (Eigen::Index j = 0; j < 3; ++j) {
    Eigen::VectorXd c = draws.col(j);
    std::vector<double> v(c.data(), c.data() + c.size());
    med[j] = quantile(v, 0.5);
  }
  const auto all = coverage_95(Composition(Eigen::VectorXd(med / med.sum())), draws);
  // Closing the medians moves them slightly; the interval is wide enough.
  EXPECT_TRUE(all[0] && all[1] && all[2]);
  Eigen::MatrixXd tight = Eigen::MatrixXd::Constant(50, 3, 0.0);
  tight.col(0).setConstant(0.5);
  tight.col(1).setConstant(0.3);
  tight.col(2).setConstant(0.2);
  const auto c = coverage_95(Composition{0.9, 0.05, 0.05}, tight);
  EXPECT_FALSE(c[0]);
  EXPECT_THROW(coverage_95(Composition{0.5, 0.3, 0.2}, tight.topRows(39)), InvalidInput);
}

TEST(Coverage, SelfSimulationCalibration) {
  const Eigen::Vector4d alpha(3.0, 8.0, 12.0, 5.0);
  std::mt19937_64 gen(7);
  Rng rng(8);
  std::size_t covered = 0, total = 0;
  Eigen::MatrixXd draws(400, 4);
  Eigen::VectorXd buf(4);
  for (int rep = 0; rep < 2000; ++rep) {
    for (Eigen::Index i = 0; i < draws.rows(); ++i) {
      detail::dirichlet_draw_into(alpha.data(), 4, rng, buf.data());
      draws.row(i) = buf.transpose();
    }
    const Eigen::VectorXd truth = fixtures::std_dirichlet(alpha, gen);
    for (bool c : coverage_95(Composition(truth), draws)) {
      covered += c;
      ++total;
    }
  }
  const double rate = static_cast<double>(covered) / static_cast<double>(total);
  EXPECT_GE(rate, 0.93);
  EXPECT_LE(rate, 0.97);
}

TEST(Quantile, TypeSevenInterpolation) {
  EXPECT_DOUBLE_EQ(quantile({4, 1, 3, 2}, 0.25), 1.75);
  EXPECT_DOUBLE_EQ(quantile({4, 1, 3, 2}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile({4, 1, 3, 2}, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(quantile({7}, 0.975), 7.0);
  EXPECT_THROW(quantile({}, 0.5), InvalidInput);
}

TEST(PointErrors, ClosedFormsAndNaiveOracle) {
  Eigen::MatrixXd truth(1, 4);
  truth << 0.1, 0.2, 0.3, 0.4;
  EXPECT_EQ(point_errors(truth, truth).rmse, 0.0);
  EXPECT_EQ(point_errors(truth, truth).mae, 0.0);
  const double c = 0.05;
  Eigen::MatrixXd f = truth;
  f(0, 0) += c;
  f(0, 2) -= c;
  EXPECT_NEAR(point_errors(f, truth).rmse, c / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(point_errors(f, truth).mae, c / 2.0, 1e-15);

  std::mt19937_64 gen(9);
  Eigen::MatrixXd a(30, 4), b(30, 4);
  for (int t = 0; t < 30; ++t) {
    a.row(t) = fixtures::random_interior(4, gen, 0.01).parts().transpose();
    b.row(t) = fixtures::random_interior(4, gen, 0.01).parts().transpose();
  }
  double ss = 0, sa = 0;
  for (int t = 0; t < 30; ++t)
    for (int j = 0; j < 4; ++j) {
      ss += (a(t, j) - b(t, j)) * (a(t, j) - b(t, j));
      sa += std::abs(a(t, j) - b(t, j));
    }
  EXPECT_NEAR(point_errors(a, b).rmse, std::sqrt(ss / 120), 1e-12);
  EXPECT_NEAR(point_errors(a, b).mae, sa / 120, 1e-12);
  EXPECT_THROW(point_errors(a, b.topRows(29)), InvalidInput);
}

TEST(ScoreAccumulator, ElpdIsSumOfWeeklyValues) {
  ScoreAccumulator acc;
  std::mt19937_64 gen(10);
  std::normal_distribution<double> nd(2.0, 1.0);
  double sum = 0.0;
  for (int t = 0; t < 37; ++t) {
    const double v = nd(gen);
    sum += v;
    acc.add(v, {true, false, true}, Eigen::Vector3d(0.2, 0.3, 0.5), Eigen::Vector3d(0.25, 0.25, 0.5));
  }
  const ScorePanel s = acc.finish();
  EXPECT_NEAR(s.elpd_sum, sum, 1e-10);
  EXPECT_NEAR(s.coverage, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(s.mae, 0.1 / 3.0, 1e-15);
}

TEST(Subsample, DistinctReproducibleAndBounded) {
  const auto a = subsample_rows(50, 20, 3), b = subsample_rows(50, 20, 3);
  EXPECT_EQ(a, b);
  std::vector<std::size_t> s = a;
  std::sort(s.begin(), s.end());
  EXPECT_TRUE(std::adjacent_find(s.begin(), s.end()) == s.end());
  EXPECT_LT(s.back(), 50u);
  EXPECT_NE(subsample_rows(50, 20, 4), a);
  EXPECT_THROW(subsample_rows(5, 6, 1), InvalidInput);
}

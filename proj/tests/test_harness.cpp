#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "bdarma/harness.hpp"
#include "bdarma/synthetic.hpp"
#include "test_support.hpp"

using namespace bdarma;

namespace {

DarmaSpec small_spec(std::size_t Q = 1) {
  DarmaSpec s;
  s.P = 1;
  s.Q = Q;
  s.J = 3;
  s.ref = 2;
  return s;
}

SeriesPanel small_panel(std::size_t T, std::uint64_t seed, std::size_t Q = 1) {
  DarmaSpec spec = small_spec(Q);
  std::mt19937_64 gen(seed);
  DarmaParams p = fixtures::random_params(spec, gen, 0.3, 0.3, std::log(60.0));
  p.gamma[1] = 0.2;
  return synthetic_panel(spec, p, T, seed);
}

EvalConfig quick_config(Design d, std::size_t Q = 1) {
  EvalConfig c;
  c.design = d;
  c.spec = small_spec(Q);
  SamplerConfig s;
  s.chains = 1;
  s.iterations = 90;
  s.warmup = 40;
  s.max_treedepth = 6;
  c.sampler_full = s;
  c.sampler_light = s;
  c.refit.max_attempts = 1;
  c.holdout_draws = 40;
  c.rolling_draws = 40;
  c.n_origins = 3;
  c.seed = 7;
  return c;
}

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST(FixedHoldout, SplitRule) {
  const EvalReport r = run_fixed_holdout(small_panel(200, 1), quick_config(Design::FixedHoldout));
  EXPECT_EQ(r.T_test, 50u);
  EXPECT_EQ(r.T_train, 150u);
  ASSERT_EQ(r.steps.size(), 50u);
  EXPECT_EQ(r.steps.front().t, 150u);
  EXPECT_EQ(r.fits.size(), 2u);
  EXPECT_EQ(r.wins + r.losses + r.ties, 50u);
  EXPECT_NEAR(r.cum_elpd.back(), r.totals[1].elpd_sum - r.totals[0].elpd_sum, 1e-10);
  for (const auto& s : r.steps) {
    EXPECT_TRUE(std::isfinite(s.lpd[0]) && std::isfinite(s.lpd[1]));
    EXPECT_GE(s.coverage[1], 0.0);
    EXPECT_LE(s.coverage[1], 1.0);
  }
  EXPECT_EQ(holdout_weeks(416), 104u);
}

TEST(FixedHoldout, IdenticalVariantsGiveIdenticalScores) {
  // Without MA terms the two variants are the same model.
  const EvalReport r = run_fixed_holdout(small_panel(120, 2, 0), quick_config(Design::FixedHoldout, 0));
  EXPECT_EQ(r.ties, r.steps.size());
  for (const auto& s : r.steps) {
    EXPECT_EQ(s.lpd[0], s.lpd[1]);
    EXPECT_EQ(s.rmse[0], s.rmse[1]);
    EXPECT_EQ(s.coverage[0], s.coverage[1]);
  }
}

TEST(Rolling, OriginsAndPartition) {
  EvalConfig c = quick_config(Design::Rolling);
  EXPECT_EQ(rolling_origins(110, c), (std::vector<std::size_t>{107, 108, 109}));
  c.n_origins = 50;
  EXPECT_EQ(rolling_origins(110, c).front(), 104u);
  c.min_train = 108;
  EXPECT_EQ(rolling_origins(110, c), (std::vector<std::size_t>{108, 109}));
  EXPECT_THROW(rolling_origins(104, c), InvalidInput);

  const EvalReport r = run_rolling(small_panel(110, 3), quick_config(Design::Rolling));
  ASSERT_EQ(r.steps.size(), 3u);
  EXPECT_EQ(r.wins + r.losses + r.ties, 3u);
  double sum = 0.0;
  for (const auto& s : r.steps) sum += s.diff();
  EXPECT_NEAR(r.cum_elpd.back(), sum, 1e-10);
  EXPECT_NEAR(r.cum_elpd.back(), r.totals[1].elpd_sum - r.totals[0].elpd_sum, 1e-10);
  EXPECT_EQ(r.fits.size(), 6u);
  EXPECT_EQ(r.totals[0].fits, 3u);
}

TEST(Rolling, ForecastIgnoresLaterRows) {
  const SeriesPanel base = small_panel(112, 4);
  SeriesPanel changed = base;
  const std::size_t t0 = 108;
  changed.Y.row(t0 + 1) << 0.7, 0.2, 0.1;
  changed.z_raw.tail(3).array() += 5.0;
  changed.Z.bottomRows(3).col(1).array() -= 3.0;
  const EvalConfig c = quick_config(Design::Rolling);
  std::vector<FitRecord> fa, fb;
  const StepRecord a = run_origin(base, t0, c, &fa), b = run_origin(changed, t0, c, &fb);
  for (std::size_t v = 0; v < 2; ++v) {
    EXPECT_EQ(a.lpd[v], b.lpd[v]);
    EXPECT_EQ(a.rmse[v], b.rmse[v]);
    EXPECT_EQ(a.coverage[v], b.coverage[v]);
  }
}

TEST(Rolling, RestandardizesOnTrainingRows) {
  SeriesPanel p = small_panel(120, 5);
  SeriesPanel view = p.head(111);
  restandardize(view, 110);
  EXPECT_NEAR(view.Z.col(1).head(110).mean(), 0.0, 1e-12);
}

TEST(Report, EmptyRollingReportWritesHeaders) {
  EvalReport r;
  summarize(r);
  const auto dir = fresh_dir("bdarma_report_empty");
  const auto out = emit_report(r, dir);
  EXPECT_EQ(out.parent_path(), dir);
  EXPECT_EQ(out.filename().string().rfind("results_", 0), 0u);
  for (const char* f : {"summary.json", "rolling_origins.csv", "cum_elpd.csv", "rolling_rmse.csv", "holdout_bars.csv",
                        "table2.md", "diagnostics.csv"})
    EXPECT_TRUE(std::filesystem::exists(out / f)) << f;
  const csv::Table t = csv::read_file((out / "rolling_origins.csv").string());
  EXPECT_EQ(t.header, step_columns());
  EXPECT_TRUE(t.rows.empty());
  EXPECT_TRUE(csv::read_file((out / "cum_elpd.csv").string()).rows.empty());
  const auto again = emit_report(r, dir);
  EXPECT_NE(again, out);
}

TEST(Report, StepCsvRoundTrip) {
  std::mt19937_64 gen(6);
  std::normal_distribution<double> nd;
  std::vector<StepRecord> steps(5);
  for (std::size_t i = 0; i < steps.size(); ++i) {
    auto& s = steps[i];
    s.t = 100 + i;
    s.date = "2020-01-0" + std::to_string(i + 1);
    for (int v = 0; v < 2; ++v) {
      s.lpd[v] = nd(gen) * 10;
      s.rmse[v] = std::abs(nd(gen)) / 3;
      s.mae[v] = std::abs(nd(gen)) / 7;
      s.coverage[v] = 0.25 * static_cast<double>(i % 5);
      s.divergences[v] = i * 3 + static_cast<std::size_t>(v);
      s.attempts[v] = 1 + i % 3;
      s.failed[v] = (i + static_cast<std::size_t>(v)) % 2 == 0;
    }
  }
  steps[3].status = "skipped: filter: non-finite state at row 4, 'x'";
  std::istringstream in(steps_to_csv(steps));
  const auto back = steps_from_csv(csv::parse(in));
  ASSERT_EQ(back.size(), steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    EXPECT_EQ(back[i].t, steps[i].t);
    EXPECT_EQ(back[i].date, steps[i].date);
    EXPECT_EQ(back[i].status, steps[i].status);
    for (int v = 0; v < 2; ++v) {
      EXPECT_EQ(back[i].lpd[v], steps[i].lpd[v]);
      EXPECT_EQ(back[i].rmse[v], steps[i].rmse[v]);
      EXPECT_EQ(back[i].mae[v], steps[i].mae[v]);
      EXPECT_EQ(back[i].coverage[v], steps[i].coverage[v]);
      EXPECT_EQ(back[i].divergences[v], steps[i].divergences[v]);
      EXPECT_EQ(back[i].attempts[v], steps[i].attempts[v]);
      EXPECT_EQ(back[i].failed[v], steps[i].failed[v]);
    }
  }
}

TEST(Report, Table2RowsAndDeterministicFiles) {
  const EvalConfig c = quick_config(Design::Rolling);
  const SeriesPanel p = small_panel(108, 8);
  const EvalReport a = run_rolling(p, c), b = run_rolling(p, c);
  const std::string md = table2_markdown(a);
  for (const char* row : {"| ELPD (sum) |", "| Wins on ELPD |", "| RMSE (mean) |", "| MAE (mean) |",
                          "| 95% Coverage (mean) |", "| Divergences (total) |", "| Any divergence |",
                          "| Avg attempts / origin |"})
    EXPECT_NE(md.find(row), std::string::npos) << row;
  const auto da = fresh_dir("bdarma_report_a"), db = fresh_dir("bdarma_report_b");
  write_report_files(a, da);
  write_report_files(b, db);
  for (const char* f : {"summary.json", "rolling_origins.csv", "cum_elpd.csv", "rolling_rmse.csv", "holdout_bars.csv",
                        "table2.md", "diagnostics.csv"})
    EXPECT_EQ(csv::read_text((da / f).string()), csv::read_text((db / f).string())) << f;
  const auto back = steps_from_csv(csv::read_file((da / "rolling_origins.csv").string()));
  ASSERT_EQ(back.size(), a.steps.size());
  for (std::size_t i = 0; i < back.size(); ++i) EXPECT_EQ(back[i].lpd[1], a.steps[i].lpd[1]);
  const auto summary = read_json((da / "summary.json").string());
  EXPECT_EQ(summary.at("design"), "rolling");
  EXPECT_EQ(summary.at("steps"), a.steps.size());
}

TEST(Report, FixedDesignFillsHoldoutBars) {
  const EvalReport r = run_fixed_holdout(small_panel(120, 9), quick_config(Design::FixedHoldout));
  const auto dir = fresh_dir("bdarma_report_fixed");
  write_report_files(r, dir);
  const csv::Table bars = csv::read_file((dir / "holdout_bars.csv").string());
  ASSERT_EQ(bars.rows.size(), 4u);
  EXPECT_EQ(bars.rows[0][0], "elpd");
  EXPECT_EQ(csv::parse_double(bars.rows[0][1]), r.totals[1].elpd_sum);
  EXPECT_TRUE(csv::read_file((dir / "rolling_origins.csv").string()).rows.empty());
  EXPECT_EQ(csv::read_file((dir / "holdout_weeks.csv").string()).rows.size(), r.T_test);
  EXPECT_EQ(csv::read_file((dir / "diagnostics.csv").string()).rows.size(), 2u);
}

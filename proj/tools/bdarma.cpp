// bdarma: ingest, simulate, fit and evaluate from the command line.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>

#include "bdarma/bdarma.hpp"
#include "bdarma/fetch.hpp"

namespace fs = std::filesystem;
using namespace bdarma;

namespace {

enum Exit { kOk = 0, kInvalid = 2, kIntegrity = 3, kSampler = 4, kIo = 5 };

struct Common {
  std::string config_path;
  std::size_t jobs = 1;
  std::uint64_t seed = 1;
  std::string out;
};

/// Flags given on the command line, as a config layer.
class FlagLayer {
 public:
  template <class T>
  void set(const CLI::Option* opt, const std::string& section, const std::string& key, const T& value) {
    if (opt->count() == 0) return;
    if (section.empty())
      j_[key] = value;
    else
      j_[section][key] = value;
  }
  const json& get() const { return j_; }

 private:
  json j_ = json::object();
};

json resolve(const Common& c, const FlagLayer& flags) {
  json cfg = default_run_config();
  if (!c.config_path.empty()) cfg = merge_config(cfg, read_json(c.config_path));
  return merge_config(cfg, flags.get());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

// ---------------------------------------------------------------- ingest

struct IngestArgs {
  std::string series_dir;
  bool fetch = false;
  std::string endpoint;
  int years = 10;
  std::size_t train_len = 0;
};

ResolvedSeries load_series(const json& ing) {
  const std::string dir = ing.at("series_dir").get<std::string>();
  const bool fetch = ing.at("fetch").get<bool>();
  if (dir.empty() == !fetch) throw InvalidInput("ingest: give exactly one of --series-dir or --fetch");
  if (!dir.empty()) {
    if (!fs::is_directory(dir)) throw IoError("ingest: not a directory: " + dir);
    // Role-named files override id lookup.
    bool all_roles = true;
    for (const auto& role : series_roles()) all_roles = all_roles && fs::exists(fs::path(dir) / (role + ".csv"));
    if (all_roles) {
      ResolvedSeries r;
      r.mode = "files";
      for (const auto& role : series_roles())
        r.by_role[role] = parse_series_csv(csv::read_text((fs::path(dir) / (role + ".csv")).string()), role);
      return r;
    }
    FetchOptions opt;
    opt.endpoint = (fs::path(dir) / "{id}.csv").string();
    return resolve_series([&](const std::string& id) { return fetch_series(id, opt); });
  }
  FetchOptions opt;
  opt.endpoint = ing.at("endpoint").get<std::string>();
  opt.timeout_seconds = ing.at("timeout_seconds").get<int>();
  opt.retries = ing.at("retries").get<int>();
  return resolve_series([&](const std::string& id) { return fetch_series(id, opt); });
}

int cmd_ingest(const json& cfg, const Common& c) {
  const json& ing = cfg.at("ingest");
  const ResolvedSeries rs = load_series(ing);
  BuildConfig bc;
  bc.years = ing.at("years").get<int>();
  bc.train_len = ing.at("train_len").get<std::size_t>();
  bc.ref = cfg.at("spec").at("ref").get<std::size_t>();
  const SeriesPanel panel = build_panel(rs.by_role, bc, rs.mode);
  const fs::path out(c.out);
  if (out.has_parent_path()) ensure_dir(out.parent_path());
  write_panel(panel, out.string());
  write_json((out.has_parent_path() ? out.parent_path() : fs::path(".")).append("resolved_config.json").string(), cfg);
  if (panel.meta.negative_other_fraction > 0.0)
    std::cerr << "warning: residual 'other' negative in a fraction " << panel.meta.negative_other_fraction
              << " of weeks (clamped to zero)\n";
  std::cerr << "ingest: " << panel.rows() << " weeks (" << rs.mode << ") " << panel.dates.front() << " to "
            << panel.dates.back() << " -> " << out.string() << "\n";
  return kOk;
}

// -------------------------------------------------------------- simulate

/// `variant_flag` is empty unless --variant was given; it beats the spec file.
int cmd_simulate(json cfg, const Common& c, const std::string& spec_path, const std::string& params_path,
                 const std::string& variant_flag) {
  if (!spec_path.empty()) {
    cfg = merge_config(cfg, {{"spec", read_json(spec_path)}});
    if (!variant_flag.empty()) cfg["spec"]["variant"] = variant_flag;
  }
  const DarmaSpec spec = spec_from_json(cfg.at("spec"));
  const DarmaParams params = params_from_json(read_json(params_path), spec);
  const auto T = cfg.at("simulate").at("T").get<std::size_t>();
  const SeriesPanel panel = synthetic_panel(spec, params, T, cfg.at("seed").get<std::uint64_t>());
  const fs::path out(c.out);
  ensure_dir(out);
  write_panel(panel, (out / "panel.csv").string());
  write_json((out / "truth_params.json").string(), to_json(params));
  write_json((out / "spec.json").string(), to_json(spec));
  write_json((out / "resolved_config.json").string(), cfg);
  std::cerr << "simulate: " << T << " rows -> " << (out / "panel.csv").string() << "\n";
  return kOk;
}

// ------------------------------------------------------------------- fit

std::string posterior_summary_csv(const PosteriorDraws& d) {
  std::ostringstream out;
  out << "name,mean,sd,q2.5,q97.5\n";
  for (std::size_t i = 0; i < d.dimension(); ++i) {
    const Eigen::VectorXd col = d.draws.col(static_cast<Eigen::Index>(i));
    const double mean = col.mean();
    const double sd = col.size() > 1 ? std::sqrt((col.array() - mean).square().sum() / static_cast<double>(col.size() - 1)) : 0.0;
    const std::vector<double> v(col.data(), col.data() + col.size());
    out << csv::join({d.names[i], csv::format(mean), csv::format(sd), csv::format(quantile(v, 0.025)),
                      csv::format(quantile(v, 0.975))})
        << '\n';
  }
  return out.str();
}

int cmd_fit(const json& cfg, const Common& c, const std::string& panel_path) {
  const SeriesPanel panel = read_panel(panel_path);
  const DarmaSpec spec = spec_for_panel(cfg, panel);
  const SamplerConfig sc = sampler_from(cfg.at("sampler"), cfg.at("seed").get<std::uint64_t>(), cfg.at("jobs").get<std::size_t>());
  const PosteriorDraws d = detail::fit_variant(spec, panel, prior_from(cfg.at("prior")), sc, refit_from(cfg.at("refit")));
  const fs::path out(c.out);
  ensure_dir(out);
  csv::write_text((out / "draws.csv").string(), draws_to_csv(d));
  csv::write_text((out / "posterior_summary.csv").string(), posterior_summary_csv(d));
  json diag = to_json(d.diagnostics, d.names);
  diag["variant"] = to_string(spec.variant);
  diag["spec"] = to_json(spec);
  write_json((out / "diagnostics.json").string(), diag);
  write_json((out / "resolved_config.json").string(), cfg);
  std::cerr << "fit: " << d.size() << " draws, " << d.diagnostics.divergences << " divergences, "
            << d.diagnostics.attempts << " attempt(s)" << (d.diagnostics.failed ? ", refit attempts exhausted" : "")
            << " -> " << out.string() << "\n";
  return kOk;
}

// -------------------------------------------------------------- evaluate

int cmd_evaluate(const json& cfg, const Common& c, const std::string& panel_path) {
  const SeriesPanel panel = read_panel(panel_path);
  const EvalConfig ec = eval_from(cfg, panel);
  const EvalReport report = run_evaluation(panel, ec);
  ensure_dir(c.out);
  const fs::path dir = emit_report(report, c.out);
  write_json((dir / "resolved_config.json").string(), cfg);
  std::cerr << "evaluate: " << report.steps.size() << " scored weeks, cumulative ELPD diff "
            << (report.cum_elpd.empty() ? 0.0 : report.cum_elpd.back()) << " -> " << dir.string() << "\n";
  std::cout << dir.string() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dirichlet ARMA models for compositional time series"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  auto* config_opt = app.add_option("--config", common.config_path, "JSON config file (flags override it)");
  auto* jobs_opt = app.add_option("--jobs", common.jobs, "Worker threads for chains or origins")->check(CLI::PositiveNumber);
  (void)config_opt;

  FlagLayer flags;
  std::string spec_path, params_path, panel_path, variant, design, init;
  std::size_t T = 0, chains = 0, iters = 0, warmup = 0, treedepth = 0, origins = 0;
  double adapt_delta = 0.0;
  IngestArgs ia;

  auto add_seed = [&](CLI::App* sub) { return sub->add_option("--seed", common.seed, "Random seed"); };

  auto* ingest = app.add_subcommand("ingest", "Build the bank-asset share panel");
  auto* o_dir = ingest->add_option("--series-dir", ia.series_dir, "Directory of series CSVs");
  auto* o_fetch = ingest->add_flag("--fetch", ia.fetch, "Download the series");
  auto* o_endpoint = ingest->add_option("--endpoint", ia.endpoint, "Download URL pattern with {id}");
  auto* o_years = ingest->add_option("--years", ia.years, "Years kept before the last common week");
  auto* o_train = ingest->add_option("--train-len", ia.train_len, "Rows used to standardize z (0: all but the holdout)");
  ingest->add_option("--out", common.out, "Panel CSV path")->required();

  auto* simulate = app.add_subcommand("simulate", "Simulate a synthetic panel");
  simulate->add_option("--spec", spec_path, "Spec JSON (P, Q, J, ref, variant, M, R)");
  simulate->add_option("--params", params_path, "Parameter JSON")->required();
  auto* o_T = simulate->add_option("--T", T, "Number of rows");
  auto* o_sim_var = simulate->add_option("--variant", variant, "raw or centered");
  auto* o_sim_seed = add_seed(simulate);
  simulate->add_option("--out", common.out, "Output directory")->required();

  auto* fit = app.add_subcommand("fit", "Fit one variant to a panel");
  fit->add_option("--panel", panel_path, "Panel CSV")->required();
  auto* o_fit_var = fit->add_option("--variant", variant, "raw or centered");
  auto* o_chains = fit->add_option("--chains", chains, "Chains");
  auto* o_iters = fit->add_option("--iters", iters, "Iterations per chain, warmup included");
  auto* o_warmup = fit->add_option("--warmup", warmup, "Warmup iterations");
  auto* o_delta = fit->add_option("--adapt-delta", adapt_delta, "Target acceptance rate");
  auto* o_depth = fit->add_option("--max-treedepth", treedepth, "Maximum tree depth");
  auto* o_init = fit->add_option("--init", init, "zero or random");
  auto* o_fit_seed = add_seed(fit);
  fit->add_option("--out", common.out, "Output directory")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Compare the raw and centered variants");
  evaluate->add_option("--panel", panel_path, "Panel CSV")->required();
  auto* o_design = evaluate->add_option("--design", design, "fixed or rolling");
  auto* o_origins = evaluate->add_option("--origins", origins, "Rolling origins (the last n eligible weeks)");
  auto* o_eval_seed = add_seed(evaluate);
  evaluate->add_option("--out", common.out, "Directory that receives results_<timestamp>/")->required();


  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    flags.set(jobs_opt, "", "jobs", common.jobs);
    flags.set(o_dir, "ingest", "series_dir", ia.series_dir);
    flags.set(o_fetch, "ingest", "fetch", ia.fetch);
    flags.set(o_endpoint, "ingest", "endpoint", ia.endpoint);
    flags.set(o_years, "ingest", "years", ia.years);
    flags.set(o_train, "ingest", "train_len", ia.train_len);
    flags.set(o_T, "simulate", "T", T);
    flags.set(o_sim_var, "spec", "variant", variant);
    flags.set(o_fit_var, "spec", "variant", variant);
    flags.set(o_chains, "sampler", "chains", chains);
    flags.set(o_iters, "sampler", "iterations", iters);
    flags.set(o_warmup, "sampler", "warmup", warmup);
    flags.set(o_delta, "sampler", "adapt_delta", adapt_delta);
    flags.set(o_depth, "sampler", "max_treedepth", treedepth);
    flags.set(o_init, "sampler", "init", init);
    flags.set(o_design, "evaluate", "design", design);
    flags.set(o_origins, "evaluate", "n_origins", origins);
    for (auto* s : {o_sim_seed, o_fit_seed, o_eval_seed}) flags.set(s, "", "seed", common.seed);

    json cfg = resolve(common, flags);
    if (ingest->parsed()) return cmd_ingest(cfg, common);
    if (simulate->parsed()) return cmd_simulate(cfg, common, spec_path, params_path, o_sim_var->count() ? variant : "");
    if (fit->parsed()) return cmd_fit(cfg, common, panel_path);
    if (evaluate->parsed()) return cmd_evaluate(cfg, common, panel_path);
  } catch (const IntegrityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIntegrity;
  } catch (const SamplerError& e) {
    std::cerr << "sampler error: " << e.what() << "\n";
    return kSampler;
  } catch (const FetchError& e) {
    std::cerr << "fetch error: " << e.what() << "\n";
    return kIo;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kIo;
  } catch (const Error& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kInvalid;
  } catch (const json::exception& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kInvalid;
  }
  return kInvalid;
}

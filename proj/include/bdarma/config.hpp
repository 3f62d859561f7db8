#pragma once

// Run configuration as one JSON document: defaults, then a config file,
// then command-line flags, each layer merged over the previous one.

#include <string>

#include "bdarma/darma.hpp"
#include "bdarma/error.hpp"
#include "bdarma/ingest.hpp"
#include "bdarma/harness.hpp"
#include "bdarma/inference.hpp"
#include "bdarma/io.hpp"
#include "json.hpp"

namespace bdarma {

inline json sampler_json(const SamplerConfig& c) {
  json j = to_json(c);
  j.erase("seed");
  return j;
}

inline json default_run_config() {
  const RefitPolicy r;
  const EvalConfig e;
  return {{"seed", 1},
          {"jobs", 1},
          {"spec", {{"P", 1}, {"Q", 1}, {"J", 4}, {"ref", 2}, {"variant", "centered"}, {"M", 1}, {"R", 2}}},
          {"prior", {{"ar", 0.5}, {"ma", 0.5}, {"beta", 1.0}, {"gamma", 1.0}}},
          {"sampler", sampler_json(SamplerConfig::full())},
          {"sampler_light", sampler_json(SamplerConfig::light())},
          {"refit",
           {{"max_attempts", r.max_attempts},
            {"rhat_threshold", r.rhat_threshold},
            {"ess_threshold", r.ess_threshold},
            {"accept_increment", r.accept_increment},
            {"accept_cap", r.accept_cap}}},
          {"evaluate",
           {{"design", "rolling"},
            {"min_train", e.min_train},
            {"n_origins", e.n_origins},
            {"holdout_draws", e.holdout_draws},
            {"rolling_draws", e.rolling_draws}}},
          {"ingest",
           {{"series_dir", ""},
            {"fetch", false},
            {"endpoint", kDefaultEndpoint},
            {"years", 10},
            {"train_len", 0},
            {"timeout_seconds", 30},
            {"retries", 2}}},
          {"simulate", {{"T", 500}}}};
}

namespace detail {

/// Every key of `layer` must exist in `schema` with a compatible kind.
inline void check_keys(const json& layer, const json& schema, const std::string& where) {
  if (!layer.is_object()) throw InvalidInput("config" + where + ": expected an object");
  for (auto it = layer.begin(); it != layer.end(); ++it) {
    const std::string path = where + "." + it.key();
    if (!schema.contains(it.key())) throw InvalidInput("config: unknown key '" + path.substr(1) + "'");
    const json& ref = schema.at(it.key());
    if (ref.is_object()) {
      check_keys(it.value(), ref, path);
    } else if (ref.is_number() != it.value().is_number() || ref.is_string() != it.value().is_string() ||
               ref.is_boolean() != it.value().is_boolean()) {
      throw InvalidInput("config: '" + path.substr(1) + "' has the wrong type");
    }
  }
}

template <class T>
T get(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("config: ") + key + ": " + e.what());
  }
}

}  // namespace detail

/// Merges `layer` over `base` after checking it against the default schema.
inline json merge_config(json base, const json& layer) {
  if (layer.is_null()) return base;
  detail::check_keys(layer, default_run_config(), "");
  base.merge_patch(layer);
  return base;
}

inline SamplerConfig sampler_from(const json& j, std::uint64_t seed, std::size_t jobs) {
  SamplerConfig c;
  c.chains = detail::get<std::size_t>(j, "chains");
  c.iterations = detail::get<std::size_t>(j, "iterations");
  c.warmup = detail::get<std::size_t>(j, "warmup");
  c.target_accept = detail::get<double>(j, "adapt_delta");
  c.max_treedepth = detail::get<std::size_t>(j, "max_treedepth");
  const std::string init = detail::get<std::string>(j, "init");
  if (init != "zero" && init != "random") throw InvalidInput("config: init must be 'zero' or 'random'");
  c.init = init == "zero" ? InitMode::Zero : InitMode::Random;
  c.seed = seed;
  c.jobs = jobs;
  c.validate();
  return c;
}

inline RefitPolicy refit_from(const json& j) {
  RefitPolicy r;
  r.max_attempts = detail::get<std::size_t>(j, "max_attempts");
  r.rhat_threshold = detail::get<double>(j, "rhat_threshold");
  r.ess_threshold = detail::get<double>(j, "ess_threshold");
  r.accept_increment = detail::get<double>(j, "accept_increment");
  r.accept_cap = detail::get<double>(j, "accept_cap");
  if (r.max_attempts < 1) throw InvalidInput("config: refit.max_attempts must be >= 1");
  return r;
}

inline PriorScales prior_from(const json& j) {
  PriorScales p;
  p.ar = detail::get<double>(j, "ar");
  p.ma = detail::get<double>(j, "ma");
  p.beta = detail::get<double>(j, "beta");
  p.gamma = detail::get<double>(j, "gamma");
  if (!(p.ar > 0 && p.ma > 0 && p.beta > 0 && p.gamma > 0)) throw InvalidInput("config: prior scales must be positive");
  return p;
}

/// Spec from the config with J, M and R taken from the panel.
inline DarmaSpec spec_for_panel(const json& cfg, const SeriesPanel& panel) {
  DarmaSpec s = spec_from_json(cfg.at("spec"));
  s.J = panel.parts();
  s.M = static_cast<std::size_t>(panel.X.cols());
  s.R = static_cast<std::size_t>(panel.Z.cols());
  s.validate();
  return s;
}

inline EvalConfig eval_from(const json& cfg, const SeriesPanel& panel) {
  EvalConfig e;
  const std::uint64_t seed = detail::get<std::uint64_t>(cfg, "seed");
  const std::size_t jobs = detail::get<std::size_t>(cfg, "jobs");
  const json& ev = cfg.at("evaluate");
  e.design = parse_design(detail::get<std::string>(ev, "design"));
  e.spec = spec_for_panel(cfg, panel);
  e.prior = prior_from(cfg.at("prior"));
  e.sampler_full = sampler_from(cfg.at("sampler"), seed, jobs);
  e.sampler_light = sampler_from(cfg.at("sampler_light"), seed, 1);
  e.refit = refit_from(cfg.at("refit"));
  e.min_train = detail::get<std::size_t>(ev, "min_train");
  e.n_origins = detail::get<std::size_t>(ev, "n_origins");
  e.holdout_draws = detail::get<std::size_t>(ev, "holdout_draws");
  e.rolling_draws = detail::get<std::size_t>(ev, "rolling_draws");
  e.seed = seed;
  e.jobs = jobs;
  return e;
}

}  // namespace bdarma

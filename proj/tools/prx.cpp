// prx — weight-localized predictive recursion for conditional densities.
//
// Grammar:  prx <subcommand> [input.csv] [config=FILE] [key=value ...]
//
// Subcommands:
//   simulate   draw a synthetic dataset and write it as CSV
//   fit        estimate parameters (optional) and fit mixing measures at a
//              set of covariate evaluation points; writes a fit directory
//   estimate   read a fit directory and emit conditional-density CSVs on a
//              y-grid at the fitted evaluation points
//   prmlx      evaluate or maximize the marginal pseudo-likelihood alone
//   cv-check   k-fold cross-validated check (pinball) scores at quantile
//              levels tau
//   fdr        two-groups multiple testing with a covariate-localized prior
//
// Configuration comes from key=value tokens; a config=FILE token loads the
// same key=value lines from a file first, with command-line tokens taking
// precedence. Unknown keys are usage errors that list the valid keys. Every
// run writes a manifest recording the tool version, the resolved
// configuration, and the seed, sufficient to reproduce the run bit-exactly.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "prx/csv.hpp"
#include "prx/errors.hpp"
#include "prx/eval.hpp"
#include "prx/fdr.hpp"
#include "prx/parallel.hpp"
#include "prx/pipeline.hpp"
#include "prx/points.hpp"
#include "prx/recursion.hpp"
#include "prx/sim.hpp"
#include "prx/version.hpp"

namespace {

namespace fs = std::filesystem;

double parse_num(const std::string& key, const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end == s.c_str() || *end != '\0')
    throw prx::UsageError("key '" + key + "': expected a number, got '" + s +
                          "'");
  if (!std::isfinite(v))
    throw prx::UsageError("key '" + key + "': value must be finite");
  return v;
}

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string tok;
  std::istringstream ss(s);
  while (std::getline(ss, tok, sep)) out.push_back(tok);
  return out;
}

/// Key/value configuration with a per-subcommand schema. Every value the
/// program actually consults is recorded (with its resolved default) so the
/// manifest reflects the run completely.
class Config {
 public:
  Config(std::string subcommand, const std::vector<std::string>& tokens,
         std::map<std::string, std::string> schema, bool accepts_input)
      : subcommand_(std::move(subcommand)), schema_(std::move(schema)) {
    std::map<std::string, std::string> cli;
    for (const auto& tok : tokens) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) {
        if (!accepts_input)
          throw prx::UsageError("subcommand '" + subcommand_ +
                                "' takes no input path; got '" + tok + "'");
        if (!input_.empty())
          throw prx::UsageError("two input paths given: '" + input_ +
                                "' and '" + tok + "'");
        input_ = tok;
        continue;
      }
      cli[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    if (auto it = cli.find("config"); it != cli.end()) {
      for (const auto& [k, v] : prx::read_manifest(it->second)) kv_[k] = v;
      note("config", it->second);
      cli.erase(it);
    }
    for (const auto& [k, v] : cli) kv_[k] = v;
    for (const auto& [k, v] : kv_) {
      (void)v;
      if (!schema_.count(k)) {
        std::string valid = "config";
        for (const auto& [sk, help] : schema_) {
          (void)help;
          valid += ", " + sk;
        }
        throw prx::UsageError("unknown key '" + k + "' for subcommand '" +
                              subcommand_ + "'; valid keys: " + valid);
      }
    }
  }

  const std::string& input() const { return input_; }
  const std::string& require_input() const {
    if (input_.empty())
      throw prx::UsageError("subcommand '" + subcommand_ +
                            "' needs an input CSV path");
    return input_;
  }

  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  std::string str(const std::string& key, const std::string& def = "") {
    check(key);
    const auto it = kv_.find(key);
    const std::string v = it == kv_.end() ? def : it->second;
    note(key, v);
    return v;
  }
  std::string require_str(const std::string& key) {
    check(key);
    const auto it = kv_.find(key);
    if (it == kv_.end())
      throw prx::UsageError("subcommand '" + subcommand_ +
                            "' requires key '" + key + "'");
    note(key, it->second);
    return it->second;
  }
  double num(const std::string& key, double def) {
    check(key);
    const auto it = kv_.find(key);
    const double v = it == kv_.end() ? def : parse_num(key, it->second);
    note(key, prx::format_double(v));
    return v;
  }
  long integer(const std::string& key, long def) {
    const double v = num(key, static_cast<double>(def));
    const long r = static_cast<long>(v);
    if (static_cast<double>(r) != v)
      throw prx::UsageError("key '" + key + "': expected an integer");
    return r;
  }
  std::uint64_t seed(const std::string& key = "seed", std::uint64_t def = 0) {
    check(key);
    const auto it = kv_.find(key);
    std::uint64_t v = def;
    if (it != kv_.end()) {
      char* end = nullptr;
      v = std::strtoull(it->second.c_str(), &end, 10);
      if (it->second.empty() || end == it->second.c_str() || *end != '\0')
        throw prx::UsageError("key '" + key +
                              "': expected an unsigned integer");
    }
    note(key, std::to_string(v));
    return v;
  }
  std::optional<double> opt_num(const std::string& key) {
    check(key);
    const auto it = kv_.find(key);
    if (it == kv_.end()) {
      note(key, "");
      return std::nullopt;
    }
    const double v = parse_num(key, it->second);
    note(key, prx::format_double(v));
    return v;
  }
  std::vector<double> num_list(const std::string& key) {
    check(key);
    const auto it = kv_.find(key);
    std::vector<double> out;
    if (it != kv_.end() && !it->second.empty())
      for (const auto& tok : split_list(it->second, ','))
        out.push_back(parse_num(key, tok));
    note(key, it == kv_.end() ? "" : it->second);
    return out;
  }
  /// Points as "c0,c1;c0,c1;..." — semicolons between points, commas between
  /// coordinates.
  prx::Matrix point_list(const std::string& key) {
    check(key);
    const auto it = kv_.find(key);
    prx::Matrix pts;
    if (it != kv_.end() && !it->second.empty()) {
      for (const auto& point_tok : split_list(it->second, ';')) {
        std::vector<double> pt;
        for (const auto& c : split_list(point_tok, ','))
          pt.push_back(parse_num(key, c));
        if (pt.empty())
          throw prx::UsageError("key '" + key + "': empty point");
        pts.push_back(std::move(pt));
      }
    }
    note(key, it == kv_.end() ? "" : it->second);
    return pts;
  }

  /// All keys consulted during the run, with their resolved values.
  prx::Manifest resolved() const {
    prx::Manifest out;
    for (const auto& [k, v] : resolved_) out.emplace_back("config_" + k, v);
    return out;
  }

 private:
  void check(const std::string& key) const {
    if (!schema_.count(key) && key != "config")
      throw prx::UsageError("internal: key '" + key + "' missing from the '" +
                            subcommand_ + "' schema");
  }
  void note(const std::string& key, const std::string& value) {
    resolved_[key] = value;
  }

  std::string subcommand_;
  std::string input_;
  std::map<std::string, std::string> kv_;
  std::map<std::string, std::string> schema_;
  std::map<std::string, std::string> resolved_;
};

// --- shared schema fragments -------------------------------------------------

std::map<std::string, std::string> pipeline_schema() {
  return {
      {"out", "output directory or file"},
      {"outcome", "outcome column name (default y)"},
      {"tag_col", "per-row kernel tag column (skew_normal only)"},
      {"exclude", "comma list of columns to drop from the covariates"},
      {"kernel", "gaussian | skew_normal | null_point_gaussian"},
      {"sigma", "gaussian kernel scale (fixed value or init)"},
      {"psi", "skew_normal kernel scale"},
      {"alpha", "skew_normal shape intercept"},
      {"beta", "skew_normal shape slope on the tag"},
      {"theta0", "null_point_gaussian null location"},
      {"sigma0", "null_point_gaussian null scale"},
      {"estimate", "comma list of sigma|psi|alpha|beta|bandwidths, or none"},
      {"bandwidths", "comma list of bandwidths (fixed values or inits)"},
      {"bandwidth_init", "shared bandwidth init (default 10)"},
      {"gamma", "weight-decay exponent in (1/2, 1] (default 2/3)"},
      {"n_grid", "mixing-measure grid size (default 200)"},
      {"support_lo", "mixing support lower end (default: from data)"},
      {"support_hi", "mixing support upper end (default: from data)"},
      {"atom", "spike location for a point mass in the mixing measure"},
      {"atom_init", "initial spike mass (default 0.5 when atom is set)"},
      {"n_perm", "data orderings averaged per fit (default 30)"},
      {"seed", "64-bit seed driving all randomness (default 0)"},
      {"max_evals", "objective evaluation budget (default 500)"},
      {"tol", "simplex convergence tolerance (default 1e-6)"},
      {"subsample", "objective subsample size (default min(n, 2000))"},
      {"threads", "worker thread cap; 0 = all cores (default 0)"},
  };
}

prx::PipelineConfig pipeline_config(Config& c, bool uses_n_perm = true) {
  prx::PipelineConfig p;
  const std::string fam = c.str("kernel", "gaussian");
  if (fam == "gaussian") {
    p.kernel.family = prx::KernelFamily::gaussian;
  } else if (fam == "skew_normal") {
    p.kernel.family = prx::KernelFamily::skew_normal;
  } else if (fam == "null_point_gaussian") {
    p.kernel.family = prx::KernelFamily::null_point_gaussian;
  } else {
    throw prx::UsageError(
        "kernel: expected gaussian, skew_normal, or null_point_gaussian; "
        "got '" + fam + "'");
  }
  p.kernel.sigma = c.num("sigma", 1.0);
  p.kernel.psi = c.num("psi", 1.0);
  p.kernel.alpha = c.num("alpha", 0.0);
  p.kernel.beta = c.num("beta", 0.0);
  p.kernel.theta0 = c.num("theta0", 0.0);
  p.kernel.sigma0 = c.num("sigma0", 1.0);

  p.estimate_bandwidths = false;
  for (const auto& tok : split_list(c.str("estimate", "bandwidths"), ',')) {
    if (tok == "sigma") p.estimate_sigma = true;
    else if (tok == "psi") p.estimate_psi = true;
    else if (tok == "alpha") p.estimate_alpha = true;
    else if (tok == "beta") p.estimate_beta = true;
    else if (tok == "bandwidths") p.estimate_bandwidths = true;
    else if (tok == "none" || tok.empty()) {}
    else
      throw prx::UsageError(
          "estimate: expected a comma list of "
          "sigma|psi|alpha|beta|bandwidths or none; got '" + tok + "'");
  }

  p.bandwidths = c.num_list("bandwidths");
  p.bandwidth_init = c.num("bandwidth_init", 10.0);
  p.gamma = c.num("gamma", 2.0 / 3.0);
  p.n_grid = static_cast<int>(c.integer("n_grid", 200));
  p.support_lo = c.opt_num("support_lo");
  p.support_hi = c.opt_num("support_hi");
  p.atom = c.opt_num("atom");
  p.atom_init = c.opt_num("atom_init");
  if (uses_n_perm) p.n_perm = static_cast<int>(c.integer("n_perm", 30));
  p.seed = c.seed();
  p.max_evals = static_cast<int>(c.integer("max_evals", 500));
  p.tol = c.num("tol", 1e-6);
  if (c.has("subsample"))
    p.subsample = static_cast<std::size_t>(c.integer("subsample", 0));
  else
    c.str("subsample", "");
  p.threads = static_cast<int>(
      prx::resolve_threads(static_cast<unsigned>(c.integer("threads", 0))));
  return p;
}

prx::Observations load_observations(Config& c, const std::string& input,
                                    const std::string& default_outcome,
                                    std::vector<std::string>* covariate_names,
                                    std::vector<std::string> extra_exclude = {},
                                    bool with_tag = true) {
  const prx::Dataset ds = prx::ingest_csv(input);
  const std::string outcome = c.str("outcome", default_outcome);
  const std::string tag_col = with_tag ? c.str("tag_col", "") : std::string();
  std::vector<std::string> exclude;
  for (const auto& name : split_list(c.str("exclude", ""), ','))
    if (!name.empty()) exclude.push_back(name);
  for (auto& name : extra_exclude)
    if (!name.empty()) exclude.push_back(std::move(name));
  const prx::Observations obs =
      prx::to_observations(ds, outcome, tag_col, exclude);
  if (covariate_names) {
    std::set<std::string> dropped(exclude.begin(), exclude.end());
    dropped.insert(outcome);
    covariate_names->clear();
    for (const auto& name : ds.columns)
      if (!dropped.count(name)) covariate_names->push_back(name);
  }
  std::cout << "read " << obs.size() << " rows, "
            << (obs.size() ? obs.x[0].size() : 0) << " covariate column(s) from "
            << input << "\n";
  return obs;
}

prx::Manifest run_header(const std::string& subcommand,
                         const std::string& input, const Config& c) {
  prx::Manifest kv;
  kv.emplace_back("tool", "prx");
  kv.emplace_back("tool_version", PRX_VERSION);
  kv.emplace_back("subcommand", subcommand);
  if (!input.empty()) kv.emplace_back("input", input);
  for (auto& e : c.resolved()) kv.push_back(std::move(e));
  return kv;
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

// --- simulate ----------------------------------------------------------------

prx::ScenarioKind scenario_from_name(const std::string& name) {
  if (name == "location_shift") return prx::ScenarioKind::location_shift;
  if (name == "mixture_transition")
    return prx::ScenarioKind::mixture_transition;
  if (name == "beta_concentration")
    return prx::ScenarioKind::beta_concentration;
  if (name == "high_dim20") return prx::ScenarioKind::high_dim20;
  if (name == "two_groups_fdr") return prx::ScenarioKind::two_groups_fdr;
  if (name == "skew_synthetic") return prx::ScenarioKind::skew_synthetic;
  throw prx::UsageError(
      "scenario: expected one of location_shift, mixture_transition, "
      "beta_concentration, high_dim20, two_groups_fdr, skew_synthetic; got '" +
      name + "'");
}

int cmd_simulate(const std::vector<std::string>& tokens) {
  Config c("simulate", tokens,
           {{"scenario",
             "location_shift | mixture_transition | beta_concentration | "
             "high_dim20 | two_groups_fdr | skew_synthetic"},
            {"n", "sample size (default 500)"},
            {"seed", "64-bit seed (default 0)"},
            {"out", "output CSV path (default sim.csv)"}},
           false);
  prx::Scenario sc;
  sc.kind = scenario_from_name(c.str("scenario", "location_shift"));
  sc.n = static_cast<std::size_t>(c.integer("n", 500));
  sc.seed = c.seed();
  const std::string out = c.str("out", "sim.csv");

  const prx::SimData sim = prx::generate(sc);
  const std::size_t p = sim.obs.x.empty() ? 0 : sim.obs.x[0].size();

  std::vector<std::string> header;
  if (sc.kind == prx::ScenarioKind::skew_synthetic) {
    header = {"x", "t", "y"};
  } else {
    if (p == 1) {
      header.push_back("x");
    } else {
      for (std::size_t j = 0; j < p; ++j)
        header.push_back("x" + std::to_string(j));
    }
    header.push_back(sc.kind == prx::ScenarioKind::two_groups_fdr ? "z" : "y");
    if (sc.kind == prx::ScenarioKind::two_groups_fdr)
      header.push_back("is_null");
  }

  prx::Matrix rows;
  rows.reserve(sim.obs.size());
  for (std::size_t i = 0; i < sim.obs.size(); ++i) {
    std::vector<double> row = sim.obs.x[i];
    row.push_back(sim.obs.y[i]);
    if (sc.kind == prx::ScenarioKind::two_groups_fdr)
      row.push_back(static_cast<double>(sim.is_null[i]));
    rows.push_back(std::move(row));
  }
  prx::write_csv(out, header, rows);

  prx::Manifest kv = run_header("simulate", "", c);
  for (const auto& [k, v] : sim.meta) kv.emplace_back("note_" + k, v);
  prx::write_manifest(out + ".manifest", kv);
  std::cout << "wrote " << rows.size() << " rows to " << out << "\n";
  return 0;
}

// --- fit ----------------------------------------------------------------------

int cmd_fit(const std::vector<std::string>& tokens) {
  auto schema = pipeline_schema();
  schema["eval_x"] =
      "evaluation points, raw units: coords comma-separated, points "
      "semicolon-separated (default: a built-in design)";
  schema["eval_count"] = "size of the default evaluation design (default 21)";
  Config c("fit", tokens, schema, true);
  const std::string input = c.require_input();
  const std::string out = c.str("out", "fit_out");

  prx::PipelineConfig pcfg = pipeline_config(c);
  pcfg.eval_count = static_cast<int>(c.integer("eval_count", 21));
  const prx::Matrix eval_raw = c.point_list("eval_x");

  std::vector<std::string> cov_names;
  const prx::Observations obs =
      load_observations(c, input, "y", &cov_names);
  const prx::PipelineOutput po = prx::run_pipeline(obs, eval_raw, pcfg);
  print_warnings(po.warnings);

  prx::Manifest extra = run_header("fit", input, c);
  std::string names;
  for (std::size_t j = 0; j < cov_names.size(); ++j)
    names += (j ? "," : "") + cov_names[j];
  extra.emplace_back("covariates", names);
  if (po.optimum) {
    for (std::size_t j = 0; j < po.free_param_names.size(); ++j) {
      extra.emplace_back(po.free_param_names[j] + "_hat",
                         prx::format_double(po.optimum->argmax[j]));
      std::cout << "estimated " << po.free_param_names[j] << " = "
                << prx::format_double(po.optimum->argmax[j]) << "\n";
    }
    extra.emplace_back("log_prmlx", prx::format_double(po.optimum->log_value));
    extra.emplace_back("objective_evaluations",
                       std::to_string(po.optimum->optimizer.evaluations));
    extra.emplace_back("optimizer_converged",
                       po.optimum->optimizer.converged ? "1" : "0");
    std::cout << "log marginal pseudo-likelihood = "
              << prx::format_double(po.optimum->log_value) << "\n";
  }
  for (std::size_t w = 0; w < po.warnings.size(); ++w)
    extra.emplace_back("warning_" + std::to_string(w), po.warnings[w]);

  prx::fit_to_dir(out, po.fit, po.kernel, po.loc, po.scaler, extra);
  std::cout << "fit written to " << out << " ("
            << po.fit.eval_points.size() << " evaluation points, "
            << po.fit.permutations_used << " orderings)\n";
  return 0;
}

// --- estimate -------------------------------------------------------------------

int cmd_estimate(const std::vector<std::string>& tokens) {
  Config c("estimate", tokens,
           {{"fit", "fit directory produced by `prx fit`"},
            {"out", "output directory (default estimate_out)"},
            {"x",
             "evaluation points to emit, raw units (subset of the fitted "
             "points); default: all"},
            {"y_n", "y-grid size (default 401)"},
            {"y_lo", "y-grid lower end (default: mixing support)"},
            {"y_hi", "y-grid upper end (default: mixing support)"},
            {"tag", "kernel tag value (required for skew_normal kernels)"}},
           false);
  const std::string fitdir = c.require_str("fit");
  const std::string out = c.str("out", "estimate_out");
  const prx::LoadedFit lf = prx::fit_from_dir(fitdir);
  if (lf.fit.measures.empty())
    throw prx::IngestError("fit directory holds no fitted measures");
  const prx::CovariateScaler scaler =
      prx::CovariateScaler::from_bounds(lf.scaler_min, lf.scaler_range);

  const long y_n = c.integer("y_n", 401);
  if (y_n < 2) throw prx::UsageError("y_n: need at least 2 grid points");
  const double y_lo = c.num("y_lo", lf.fit.measures[0].dom.lo);
  const double y_hi = c.num("y_hi", lf.fit.measures[0].dom.hi);
  if (!(y_lo < y_hi)) throw prx::UsageError("y_lo must be below y_hi");
  std::vector<double> y_grid(static_cast<std::size_t>(y_n));
  for (long i = 0; i < y_n; ++i)
    y_grid[static_cast<std::size_t>(i)] =
        y_lo + (y_hi - y_lo) * static_cast<double>(i) /
                   static_cast<double>(y_n - 1);

  std::optional<double> tag = c.opt_num("tag");
  if (lf.kernel.needs_tag() && !tag)
    throw prx::UsageError(
        "this fit uses a skew_normal kernel; pass tag=<value>");

  auto raw_of = [&](const std::vector<double>& norm) {
    std::vector<double> raw(norm.size());
    for (std::size_t j = 0; j < norm.size(); ++j)
      raw[j] = scaler.mins()[j] + scaler.ranges()[j] * norm[j];
    return raw;
  };

  std::vector<std::size_t> selected;
  const prx::Matrix requested = c.point_list("x");
  if (requested.empty()) {
    for (std::size_t e = 0; e < lf.fit.eval_points.size(); ++e)
      selected.push_back(e);
  } else {
    for (const auto& pt : requested) {
      const std::vector<double> norm = scaler.transform(pt);
      bool found = false;
      for (std::size_t e = 0; e < lf.fit.eval_points.size() && !found; ++e) {
        const auto& cand = lf.fit.eval_points[e];
        if (cand.size() != norm.size()) continue;
        bool close = true;
        for (std::size_t j = 0; j < norm.size(); ++j)
          if (std::abs(cand[j] - norm[j]) > 1e-9) close = false;
        if (close) {
          selected.push_back(e);
          found = true;
        }
      }
      if (!found) {
        std::string avail;
        for (std::size_t e = 0; e < lf.fit.eval_points.size(); ++e) {
          const auto raw = raw_of(lf.fit.eval_points[e]);
          avail += (e ? "; " : "");
          for (std::size_t j = 0; j < raw.size(); ++j)
            avail += (j ? "," : "") + prx::format_double(raw[j]);
        }
        std::string want;
        for (std::size_t j = 0; j < pt.size(); ++j)
          want += (j ? "," : "") + prx::format_double(pt[j]);
        throw prx::UsageError("x=" + want +
                              " is not among the fitted evaluation points; "
                              "refit with eval_x=... or pick one of: " + avail);
      }
    }
  }

  fs::create_directories(out);
  prx::Matrix index_rows;
  for (const std::size_t e : selected) {
    const std::vector<double> dens =
        prx::conditional_density(lf.fit, e, lf.kernel, y_grid, tag);
    prx::Matrix rows(y_grid.size());
    for (std::size_t i = 0; i < y_grid.size(); ++i)
      rows[i] = {y_grid[i], dens[i]};
    const auto raw = raw_of(lf.fit.eval_points[e]);
    std::string at;
    for (std::size_t j = 0; j < raw.size(); ++j)
      at += (j ? "," : "") + prx::format_double(raw[j]);
    char name[32];
    std::snprintf(name, sizeof name, "density_%03zu.csv", e);
    prx::write_csv((fs::path(out) / name).string(), {"y", "density"}, rows,
                   {"# x = " + at});
    std::vector<double> idx_row{static_cast<double>(e)};
    for (double r : raw) idx_row.push_back(r);
    index_rows.push_back(std::move(idx_row));
  }
  {
    std::vector<std::string> hdr{"point"};
    const std::size_t p = lf.scaler_min.size();
    for (std::size_t j = 0; j < p; ++j) hdr.push_back("x" + std::to_string(j));
    prx::write_csv((fs::path(out) / "index.csv").string(), hdr, index_rows,
                   {"# row k describes density_<point>.csv, coordinates in "
                    "raw units"});
  }
  prx::Manifest kv = run_header("estimate", "", c);
  kv.emplace_back("fit_dir", fitdir);
  kv.emplace_back("densities_written", std::to_string(selected.size()));
  prx::write_manifest((fs::path(out) / "manifest.txt").string(), kv);
  std::cout << "wrote " << selected.size() << " density file(s) to " << out
            << "\n";
  return 0;
}

// --- prmlx ---------------------------------------------------------------------

int cmd_prmlx(const std::vector<std::string>& tokens) {
  auto schema = pipeline_schema();
  schema.erase("n_perm");  // the objective is a single fixed-order pass
  Config c("prmlx", tokens, schema, true);
  const std::string input = c.require_input();
  const std::string out = c.str("out", "prmlx_out");
  prx::PipelineConfig pcfg = pipeline_config(c, /*uses_n_perm=*/false);

  prx::Observations data = load_observations(c, input, "y", nullptr);
  const prx::CovariateScaler scaler = prx::CovariateScaler::fit(data.x);
  data.x = scaler.transform(data.x);

  const prx::EstimationPlan plan =
      prx::plan_estimation(scaler, data.y, pcfg);
  print_warnings(plan.warnings);
  const prx::PrmlxObjectiveSpec obj = plan.objective(data, pcfg);

  fs::create_directories(out);
  prx::Manifest kv = run_header("prmlx", input, c);
  for (std::size_t w = 0; w < plan.warnings.size(); ++w)
    kv.emplace_back("warning_" + std::to_string(w), plan.warnings[w]);

  if (plan.free.empty()) {
    prx::PrmlxDiagnostics diag;
    const double lv = prx::log_prmlx({}, obj, &diag,
                                     static_cast<unsigned>(pcfg.threads));
    std::cout << "log marginal pseudo-likelihood = " << prx::format_double(lv)
              << " (no free parameters)\n";
    kv.emplace_back("log_prmlx", prx::format_double(lv));
    kv.emplace_back("underflowed_factors",
                    std::to_string(diag.underflow_factors));
  } else {
    const prx::PrmlxMaxResult r =
        prx::maximize_prmlx(obj, plan.init_values, pcfg.max_evals, pcfg.tol,
                            static_cast<unsigned>(pcfg.threads));
    for (std::size_t j = 0; j < plan.names.size(); ++j) {
      std::cout << "estimated " << plan.names[j] << " = "
                << prx::format_double(r.argmax[j]) << "\n";
      kv.emplace_back(plan.names[j] + "_hat",
                      prx::format_double(r.argmax[j]));
    }
    std::cout << "log marginal pseudo-likelihood = "
              << prx::format_double(r.log_value) << " ("
              << r.optimizer.evaluations << " evaluations)\n";
    kv.emplace_back("log_prmlx", prx::format_double(r.log_value));
    kv.emplace_back("objective_evaluations",
                    std::to_string(r.optimizer.evaluations));
    kv.emplace_back("optimizer_converged",
                    r.optimizer.converged ? "1" : "0");
    kv.emplace_back("underflowed_factors",
                    std::to_string(r.diagnostics.underflow_factors));

    prx::Matrix trace_rows;
    for (const auto& [params, value] : r.optimizer.trace) {
      std::vector<double> row = params;
      row.push_back(value);
      trace_rows.push_back(std::move(row));
    }
    std::vector<std::string> hdr = plan.names;
    hdr.push_back("log_prmlx");
    prx::write_csv((fs::path(out) / "trace.csv").string(), hdr, trace_rows);
  }
  prx::write_manifest((fs::path(out) / "manifest.txt").string(), kv);
  std::cout << "report written to " << out << "\n";
  return 0;
}

// --- cv-check --------------------------------------------------------------------

int cmd_cv_check(const std::vector<std::string>& tokens) {
  auto schema = pipeline_schema();
  schema["folds"] = "cross-validation folds (default 5)";
  schema["tau"] = "comma list of quantile levels (default 0.1,0.25,0.5,0.75,0.9)";
  schema["y_n"] = "y-grid size for quantile inversion (default 401)";
  Config c("cv-check", tokens, schema, true);
  const std::string input = c.require_input();
  const std::string out = c.str("out", "cv_table.csv");
  prx::PipelineConfig pcfg = pipeline_config(c);

  prx::CvPlan plan;
  plan.n_folds = static_cast<int>(c.integer("folds", 5));
  const std::vector<double> taus = c.num_list("tau");
  if (!taus.empty()) plan.tau_levels = taus;
  plan.seed = pcfg.seed;
  const long y_n = c.integer("y_n", 401);

  const prx::Observations obs = load_observations(c, input, "y", nullptr);
  const prx::CvTable table = prx::cross_validate(
      obs, plan, prx::make_fit_procedure(pcfg, static_cast<int>(y_n)));

  prx::Matrix rows;
  for (const auto& cell : table.cells)
    rows.push_back({static_cast<double>(cell.fold), cell.tau, cell.score,
                    static_cast<double>(cell.n_test)});
  for (std::size_t ti = 0; ti < table.tau_levels.size(); ++ti)
    rows.push_back({-1.0, table.tau_levels[ti], table.fold_avg[ti], 0.0});
  prx::write_csv(out, {"fold", "tau", "score", "n_test"}, rows,
                 {"# fold = -1 rows carry the across-fold average check "
                  "score per tau"});

  for (std::size_t ti = 0; ti < table.tau_levels.size(); ++ti)
    std::cout << "CS(tau=" << table.tau_levels[ti]
              << ") = " << prx::format_double(table.fold_avg[ti]) << "\n";
  prx::write_manifest(out + ".manifest", run_header("cv-check", input, c));
  std::cout << "cross-validation table written to " << out << "\n";
  return 0;
}

// --- fdr -----------------------------------------------------------------------

int cmd_fdr(const std::vector<std::string>& tokens) {
  Config c("fdr", tokens,
           {{"out", "output directory (default fdr_out)"},
            {"outcome", "z-value column name (default z)"},
            {"is_null_col",
             "0/1 truth column for scoring (default: is_null when present)"},
            {"exclude", "comma list of columns to drop from the covariates"},
            {"alpha", "target false-discovery level (default 0.1)"},
            {"seed", "64-bit seed (default 0)"},
            {"n_perm", "orderings averaged per fit (default 5)"},
            {"subsample", "bandwidth-objective subsample (default 300)"},
            {"max_evals", "bandwidth-objective budget (default 120)"},
            {"n_grid", "slab grid size (default 401)"},
            {"slab_lo", "slab support lower end (default -8)"},
            {"slab_hi", "slab support upper end (default 8)"},
            {"pi0_init", "initial spike mass (default 0.75)"},
            {"bandwidth_init", "bandwidth search start (default 10)"},
            {"null", "fixed | estimate (default fixed)"},
            {"null_theta", "null location (default 0)"},
            {"null_sigma", "null scale (default 1)"},
            {"threads", "worker thread cap; 0 = all cores (default 0)"}},
           true);
  const std::string input = c.require_input();
  const std::string out = c.str("out", "fdr_out");
  const double alpha = c.num("alpha", 0.1);
  const std::uint64_t seed = c.seed();

  prx::FdrSimConfig knobs;
  knobs.n_perm = static_cast<int>(c.integer("n_perm", knobs.n_perm));
  knobs.prmlx_subsample = static_cast<std::size_t>(
      c.integer("subsample", static_cast<long>(knobs.prmlx_subsample)));
  knobs.prmlx_max_evals =
      static_cast<int>(c.integer("max_evals", knobs.prmlx_max_evals));
  knobs.n_grid = static_cast<int>(c.integer("n_grid", knobs.n_grid));
  knobs.slab_lo = c.num("slab_lo", knobs.slab_lo);
  knobs.slab_hi = c.num("slab_hi", knobs.slab_hi);
  knobs.pi0_init = c.num("pi0_init", knobs.pi0_init);
  knobs.bandwidth_init = c.num("bandwidth_init", knobs.bandwidth_init);
  knobs.threads =
      prx::resolve_threads(static_cast<unsigned>(c.integer("threads", 0)));
  const std::string null_mode = c.str("null", "fixed");
  if (null_mode == "estimate") knobs.estimate_null = true;
  else if (null_mode != "fixed")
    throw prx::UsageError("null: expected fixed or estimate, got '" +
                          null_mode + "'");
  prx::NullSpec ns;
  ns.theta = c.num("null_theta", 0.0);
  ns.sigma = c.num("null_sigma", 1.0);

  const prx::Dataset ds = prx::ingest_csv(input);
  std::string is_null_col = c.str(
      "is_null_col",
      [&] {
        for (const auto& col : ds.columns)
          if (col == "is_null") return std::string("is_null");
        return std::string();
      }());
  std::vector<std::string> cov_names;
  const prx::Observations obs = load_observations(
      c, input, "z", &cov_names, {is_null_col}, /*with_tag=*/false);

  const prx::FdrReplicateOutput rep =
      prx::fdr_analyze(obs, alpha, seed, knobs, ns);

  fs::create_directories(out);
  const std::size_t n = obs.size();
  prx::Matrix rows(n);
  long n_rej_prx = 0, n_rej_bh = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row{obs.y[i]};
    for (double xj : obs.x[i]) row.push_back(xj);
    row.push_back(rep.lfdr[i]);
    row.push_back(rep.reject_prx[i] ? 1.0 : 0.0);
    row.push_back(prx::two_sided_p(obs.y[i]));
    row.push_back(rep.reject_bh[i] ? 1.0 : 0.0);
    rows[i] = std::move(row);
    n_rej_prx += rep.reject_prx[i] ? 1 : 0;
    n_rej_bh += rep.reject_bh[i] ? 1 : 0;
  }
  std::vector<std::string> hdr{"z"};
  for (const auto& nm : cov_names) hdr.push_back(nm);
  hdr.insert(hdr.end(), {"lfdr", "rejected_prx", "p_value", "rejected_bh"});
  prx::write_csv((fs::path(out) / "decisions.csv").string(), hdr, rows);

  prx::Manifest summary;
  summary.emplace_back("n", std::to_string(n));
  summary.emplace_back("alpha", prx::format_double(alpha));
  summary.emplace_back("n_reject_prx", std::to_string(n_rej_prx));
  summary.emplace_back("n_reject_bh", std::to_string(n_rej_bh));
  summary.emplace_back("bandwidth_hat", prx::format_double(rep.bandwidth));
  summary.emplace_back("null_theta_used",
                       prx::format_double(rep.null_used.theta));
  summary.emplace_back("null_sigma_used",
                       prx::format_double(rep.null_used.sigma));
  summary.emplace_back("lfdr_overshoots",
                       std::to_string(rep.lfdr_overshoots));

  if (!is_null_col.empty()) {
    const std::size_t null_idx = prx::column_index(ds, is_null_col);
    long fp_prx = 0, tp_prx = 0, fp_bh = 0, tp_bh = 0, n_alt = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool is_null = ds.rows[i][null_idx] != 0.0;
      if (!is_null) ++n_alt;
      if (rep.reject_prx[i]) (is_null ? fp_prx : tp_prx)++;
      if (rep.reject_bh[i]) (is_null ? fp_bh : tp_bh)++;
    }
    const auto fdp = [](long fp, long total) {
      return total > 0 ? static_cast<double>(fp) / static_cast<double>(total)
                       : 0.0;
    };
    summary.emplace_back("fdp_prx", prx::format_double(fdp(fp_prx, n_rej_prx)));
    summary.emplace_back(
        "power_prx",
        prx::format_double(n_alt ? static_cast<double>(tp_prx) / n_alt : 0.0));
    summary.emplace_back("fdp_bh", prx::format_double(fdp(fp_bh, n_rej_bh)));
    summary.emplace_back(
        "power_bh",
        prx::format_double(n_alt ? static_cast<double>(tp_bh) / n_alt : 0.0));
  }
  prx::write_manifest((fs::path(out) / "summary.txt").string(), summary);

  if (!rep.pi0_curve.empty()) {
    prx::Matrix curve;
    // The curve grid lives in normalized units; report raw covariate values.
    const prx::CovariateScaler scaler = prx::CovariateScaler::fit(obs.x);
    for (std::size_t g = 0; g < rep.pi0_curve.size(); ++g) {
      const double norm = static_cast<double>(g) /
                          static_cast<double>(rep.pi0_curve.size() - 1);
      curve.push_back(
          {scaler.mins()[0] + scaler.ranges()[0] * norm, rep.pi0_curve[g]});
    }
    prx::write_csv((fs::path(out) / "pi0_curve.csv").string(), {"x", "pi0"},
                   curve);
  }
  prx::write_manifest((fs::path(out) / "manifest.txt").string(),
                      run_header("fdr", input, c));

  for (const auto& [k, v] : summary) std::cout << k << " = " << v << "\n";
  std::cout << "decisions written to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "prx " PRX_VERSION
      " — conditional density estimation by weight-localized predictive "
      "recursion.\nGrammar: prx <subcommand> [input.csv] [config=FILE] "
      "[key=value ...]"};
  app.require_subcommand(1);
  app.set_version_flag("--version", PRX_VERSION);

  std::map<std::string, std::vector<std::string>> tokens;
  const std::pair<const char*, const char*> subs[] = {
      {"simulate", "draw a synthetic dataset and write it as CSV"},
      {"fit", "fit localized mixing measures (writes a fit directory)"},
      {"estimate", "emit conditional-density CSVs from a fit directory"},
      {"prmlx", "evaluate or maximize the marginal pseudo-likelihood"},
      {"cv-check", "cross-validated check scores at quantile levels"},
      {"fdr", "two-groups multiple testing with covariate localization"},
  };
  for (const auto& [name, help] : subs) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("tokens", tokens[name],
                    "input path and key=value settings");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(prx::ExitCode::usage);
  }

  try {
    if (app.got_subcommand("simulate")) return cmd_simulate(tokens["simulate"]);
    if (app.got_subcommand("fit")) return cmd_fit(tokens["fit"]);
    if (app.got_subcommand("estimate")) return cmd_estimate(tokens["estimate"]);
    if (app.got_subcommand("prmlx")) return cmd_prmlx(tokens["prmlx"]);
    if (app.got_subcommand("cv-check")) return cmd_cv_check(tokens["cv-check"]);
    if (app.got_subcommand("fdr")) return cmd_fdr(tokens["fdr"]);
    throw prx::UsageError("no subcommand given");
  } catch (const prx::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return static_cast<int>(prx::ExitCode::usage);
  } catch (const prx::IngestError& e) {
    std::cerr << "ingest error: " << e.what() << "\n";
    return static_cast<int>(prx::ExitCode::ingest);
  } catch (const prx::DomainError& e) {
    std::cerr << "domain error: " << e.what() << "\n";
    return static_cast<int>(prx::ExitCode::numeric_domain);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(prx::ExitCode::failure);
  }
}

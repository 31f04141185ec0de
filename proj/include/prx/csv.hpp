#pragma once

// CSV ingestion and emission, plus plain-text manifests. Input files carry a
// header row naming the columns; ingestion checks every cell is a finite
// number and reports the offending row and column otherwise. Output uses '.'
// decimals, RFC-style quoting for text cells, and %.17g for doubles so a
// round trip preserves the value bit-for-bit.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "prx/errors.hpp"
#include "prx/kernels.hpp"
#include "prx/localization.hpp"
#include "prx/mixing_measure.hpp"
#include "prx/recursion.hpp"

namespace prx {

struct Dataset {
  std::vector<std::string> columns;
  Matrix rows;  ///< numeric cells, one inner vector per data row
};

namespace detail {

// Split one CSV record; supports quoted fields with doubled-quote escapes.
inline std::vector<std::string> split_csv_line(const std::string& line,
                                               std::size_t line_no) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cell);
      cell.clear();
    } else {
      cell += c;
    }
  }
  if (quoted)
    throw IngestError("unterminated quote at line " + std::to_string(line_no));
  out.push_back(cell);
  return out;
}

inline double parse_cell(const std::string& cell, std::size_t line_no,
                         const std::string& column) {
  const char* s = cell.c_str();
  char* end = nullptr;
  const double v = std::strtod(s, &end);
  while (end && *end == ' ') ++end;
  if (cell.empty() || end == s || (end && *end != '\0'))
    throw IngestError("non-numeric cell at line " + std::to_string(line_no) +
                      ", column " + column + ": '" + cell + "'");
  if (!std::isfinite(v))
    throw IngestError("non-finite value at line " + std::to_string(line_no) +
                      ", column " + column);
  return v;
}

}  // namespace detail

/// Read a headered numeric CSV. Lines starting with '#' are comments and are
/// skipped (the writers here emit such lines); blank lines and ragged rows
/// are errors that name the line.
inline Dataset ingest_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open input file: " + path);
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty() && line[0] == '#') continue;  // comment line
    if (line.empty())
      throw IngestError("blank line at line " + std::to_string(line_no));
    const auto cells = detail::split_csv_line(line, line_no);
    if (!header_seen) {
      ds.columns = cells;
      header_seen = true;
      if (ds.columns.empty()) throw IngestError("empty header row");
      continue;
    }
    if (cells.size() != ds.columns.size())
      throw IngestError("row at line " + std::to_string(line_no) + " has " +
                        std::to_string(cells.size()) + " cells, expected " +
                        std::to_string(ds.columns.size()));
    std::vector<double> row(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j)
      row[j] = detail::parse_cell(cells[j], line_no, ds.columns[j]);
    ds.rows.push_back(std::move(row));
  }
  if (ds.columns.empty()) throw IngestError("empty input file: " + path);
  return ds;
}

inline std::size_t column_index(const Dataset& ds, const std::string& name) {
  for (std::size_t j = 0; j < ds.columns.size(); ++j)
    if (ds.columns[j] == name) return j;
  std::string have;
  for (const auto& c : ds.columns) have += (have.empty() ? "" : ", ") + c;
  throw IngestError("missing column '" + name + "' (file has: " + have + ")");
}

/// Split a dataset into covariates and outcome. The outcome column and any
/// columns named in `exclude` are dropped from the covariates; the tag
/// column, when named, is copied into `tags` but stays a covariate (a
/// treatment indicator is still a localization variable) unless excluded.
inline Observations to_observations(const Dataset& ds,
                                    const std::string& outcome_col,
                                    const std::string& tag_col = "",
                                    const std::vector<std::string>& exclude = {}) {
  const std::size_t y_idx = column_index(ds, outcome_col);
  std::optional<std::size_t> tag_idx;
  if (!tag_col.empty()) tag_idx = column_index(ds, tag_col);
  std::vector<bool> drop(ds.columns.size(), false);
  drop[y_idx] = true;
  for (const auto& name : exclude) drop[column_index(ds, name)] = true;

  Observations obs;
  for (const auto& row : ds.rows) {
    std::vector<double> x;
    for (std::size_t j = 0; j < row.size(); ++j)
      if (!drop[j]) x.push_back(row[j]);
    obs.x.push_back(std::move(x));
    obs.y.push_back(row[y_idx]);
    if (tag_idx) obs.tags.push_back(row[*tag_idx]);
  }
  return obs;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string quote_csv(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

/// Write a numeric CSV with a header row; optional comment lines (already
/// including their leading '#') go first.
inline void write_csv(const std::string& path,
                      const std::vector<std::string>& header,
                      const Matrix& rows,
                      const std::vector<std::string>& comments = {}) {
  std::ofstream out(path);
  if (!out) throw IngestError("cannot open output file: " + path);
  for (const auto& c : comments) out << c << '\n';
  for (std::size_t j = 0; j < header.size(); ++j)
    out << (j ? "," : "") << quote_csv(header[j]);
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < row.size(); ++j)
      out << (j ? "," : "") << format_double(row[j]);
    out << '\n';
  }
}

// --- manifests -------------------------------------------------------------

using Manifest = std::vector<std::pair<std::string, std::string>>;

inline void write_manifest(const std::string& path, const Manifest& kv) {
  std::ofstream out(path);
  if (!out) throw IngestError("cannot open manifest for writing: " + path);
  for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
}

inline Manifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open manifest: " + path);
  Manifest kv;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw IngestError("manifest line without '=': " + line);
    kv.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  return kv;
}

inline std::optional<std::string> manifest_get(const Manifest& kv,
                                               const std::string& key) {
  for (const auto& [k, v] : kv)
    if (k == key) return v;
  return std::nullopt;
}

inline std::string manifest_require(const Manifest& kv,
                                    const std::string& key) {
  if (auto v = manifest_get(kv, key)) return *v;
  throw IngestError("manifest missing key: " + key);
}

// --- domain-object serialization -------------------------------------------

/// Mixing measure as a two-column CSV; the spike, when present, rides in a
/// comment line so the numeric block stays a plain density table.
inline void measure_to_csv(const std::string& path, const MixingMeasure& m) {
  std::vector<std::string> comments;
  if (m.atom_mass)
    comments.push_back("# atom_location=" + format_double(*m.dom.atom) +
                       " atom_mass=" + format_double(*m.atom_mass));
  Matrix rows;
  rows.reserve(m.density.size());
  for (std::size_t g = 0; g < m.density.size(); ++g)
    rows.push_back({m.dom.theta(static_cast<int>(g)), m.density[g]});
  write_csv(path, {"theta", "density"}, rows, comments);
}

inline MixingMeasure measure_from_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open measure file: " + path);
  MixingMeasure m;
  std::string line;
  std::size_t line_no = 0;
  std::vector<double> thetas;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ss(line.substr(1));
      std::string token;
      while (ss >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = token.substr(0, eq);
        const double val =
            detail::parse_cell(token.substr(eq + 1), line_no, key);
        if (key == "atom_location") m.dom.atom = val;
        if (key == "atom_mass") m.atom_mass = val;
      }
      continue;
    }
    if (!header_seen) {
      header_seen = true;  // "theta,density"
      continue;
    }
    const auto cells = detail::split_csv_line(line, line_no);
    if (cells.size() != 2)
      throw IngestError("measure row at line " + std::to_string(line_no) +
                        " needs 2 cells");
    thetas.push_back(detail::parse_cell(cells[0], line_no, "theta"));
    m.density.push_back(detail::parse_cell(cells[1], line_no, "density"));
  }
  if (thetas.size() < 2) throw IngestError("measure file too short: " + path);
  m.dom.lo = thetas.front();
  m.dom.hi = thetas.back();
  m.dom.n_grid = static_cast<int>(thetas.size());
  return m;
}

inline Manifest kernel_manifest(const KernelSpec& k) {
  Manifest kv;
  switch (k.family) {
    case KernelFamily::gaussian:
      kv.emplace_back("kernel", "gaussian");
      kv.emplace_back("sigma", format_double(k.sigma));
      break;
    case KernelFamily::skew_normal:
      kv.emplace_back("kernel", "skew_normal");
      kv.emplace_back("psi", format_double(k.psi));
      kv.emplace_back("alpha", format_double(k.alpha));
      kv.emplace_back("beta", format_double(k.beta));
      break;
    case KernelFamily::null_point_gaussian:
      kv.emplace_back("kernel", "null_point_gaussian");
      kv.emplace_back("theta0", format_double(k.theta0));
      kv.emplace_back("sigma0", format_double(k.sigma0));
      break;
    case KernelFamily::custom:
      kv.emplace_back("kernel", "custom");
      break;
  }
  return kv;
}

inline KernelSpec kernel_from_manifest(const Manifest& kv) {
  KernelSpec k;
  const std::string fam = manifest_require(kv, "kernel");
  auto num = [&](const std::string& key) {
    return detail::parse_cell(manifest_require(kv, key), 0, key);
  };
  if (fam == "gaussian") {
    k.family = KernelFamily::gaussian;
    k.sigma = num("sigma");
  } else if (fam == "skew_normal") {
    k.family = KernelFamily::skew_normal;
    k.psi = num("psi");
    k.alpha = num("alpha");
    k.beta = num("beta");
  } else if (fam == "null_point_gaussian") {
    k.family = KernelFamily::null_point_gaussian;
    k.theta0 = num("theta0");
    k.sigma0 = num("sigma0");
  } else {
    throw IngestError("manifest names unknown kernel family: " + fam);
  }
  return k;
}

/// Serialize a fit as a directory: one measure CSV per evaluation point, the
/// evaluation points themselves, and a manifest with everything needed to
/// reproduce and reuse the fit (kernel, bandwidths, scaler constants, seed).
inline void fit_to_dir(const std::string& dir, const FitResult& fit,
                       const KernelSpec& kernel, const LocalizationConfig& cfg,
                       const CovariateScaler& scaler,
                       const Manifest& extra = {}) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  Manifest kv;
  kv.emplace_back("format", "prx-fit-v1");
  for (auto& e : kernel_manifest(kernel)) kv.push_back(e);
  std::string bands;
  for (std::size_t j = 0; j < cfg.bandwidths.size(); ++j)
    bands += (j ? "," : "") + format_double(cfg.bandwidths[j]);
  kv.emplace_back("bandwidths", bands);
  kv.emplace_back("gamma", format_double(cfg.gamma));
  kv.emplace_back("n_perm", std::to_string(fit.permutations_used));
  kv.emplace_back("seed", std::to_string(fit.seed));
  kv.emplace_back("n_eval_points", std::to_string(fit.eval_points.size()));
  kv.emplace_back("underflow_skips", std::to_string(fit.underflow_skips));
  std::string mins, ranges;
  for (std::size_t j = 0; j < scaler.dim(); ++j) {
    mins += (j ? "," : "") + format_double(scaler.mins()[j]);
    ranges += (j ? "," : "") + format_double(scaler.ranges()[j]);
  }
  kv.emplace_back("scaler_min", mins);
  kv.emplace_back("scaler_range", ranges);
  for (auto& e : extra) kv.push_back(e);
  write_manifest((fs::path(dir) / "manifest.txt").string(), kv);

  {
    std::vector<std::string> header;
    const std::size_t dim =
        fit.eval_points.empty() ? 0 : fit.eval_points.front().size();
    for (std::size_t j = 0; j < dim; ++j)
      header.push_back("x" + std::to_string(j));
    write_csv((fs::path(dir) / "eval_points.csv").string(), header,
              fit.eval_points,
              {"# one evaluation point per row, normalized covariate units"});
  }
  {
    Matrix w;
    for (double s : fit.weight_sums) w.push_back({s});
    write_csv((fs::path(dir) / "weight_sums.csv").string(), {"weight_sum"}, w);
  }
  for (std::size_t e = 0; e < fit.measures.size(); ++e) {
    char name[32];
    std::snprintf(name, sizeof name, "point_%03zu.csv", e);
    measure_to_csv((fs::path(dir) / name).string(), fit.measures[e]);
  }
}

struct LoadedFit {
  FitResult fit;
  KernelSpec kernel;
  LocalizationConfig cfg;
  std::vector<double> scaler_min, scaler_range;
  Manifest manifest;
};

inline std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  if (s.empty()) return out;
  std::istringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(detail::parse_cell(tok, 0, "list"));
  return out;
}

inline LoadedFit fit_from_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  LoadedFit lf;
  lf.manifest = read_manifest((fs::path(dir) / "manifest.txt").string());
  if (manifest_require(lf.manifest, "format") != "prx-fit-v1")
    throw IngestError("unrecognized fit directory format");
  lf.kernel = kernel_from_manifest(lf.manifest);
  lf.cfg.bandwidths = parse_double_list(manifest_require(lf.manifest, "bandwidths"));
  lf.cfg.gamma = detail::parse_cell(manifest_require(lf.manifest, "gamma"), 0, "gamma");
  lf.scaler_min = parse_double_list(manifest_require(lf.manifest, "scaler_min"));
  lf.scaler_range = parse_double_list(manifest_require(lf.manifest, "scaler_range"));
  lf.fit.permutations_used = static_cast<int>(
      detail::parse_cell(manifest_require(lf.manifest, "n_perm"), 0, "n_perm"));
  lf.fit.seed = static_cast<std::uint64_t>(
      detail::parse_cell(manifest_require(lf.manifest, "seed"), 0, "seed"));
  const auto n_points = static_cast<std::size_t>(detail::parse_cell(
      manifest_require(lf.manifest, "n_eval_points"), 0, "n_eval_points"));

  {  // evaluation points (headerless rows after a comment)
    std::ifstream in((fs::path(dir) / "eval_points.csv").string());
    if (!in) throw IngestError("fit directory missing eval_points.csv");
    std::string line;
    std::size_t line_no = 0;
    bool header_skipped = false;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      if (!header_skipped) {
        header_skipped = true;
        continue;
      }
      const auto cells = detail::split_csv_line(line, line_no);
      std::vector<double> row;
      for (const auto& c : cells)
        if (!c.empty()) row.push_back(detail::parse_cell(c, line_no, "x"));
      if (!row.empty()) lf.fit.eval_points.push_back(std::move(row));
    }
  }
  for (std::size_t e = 0; e < n_points; ++e) {
    char name[32];
    std::snprintf(name, sizeof name, "point_%03zu.csv", e);
    lf.fit.measures.push_back(
        measure_from_csv((fs::path(dir) / name).string()));
  }
  lf.fit.weight_sums.assign(n_points, 0.0);
  return lf;
}

}  // namespace prx

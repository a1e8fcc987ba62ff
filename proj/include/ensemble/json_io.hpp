#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "ensemble/errors.hpp"
#include "ensemble/system.hpp"
#include "ensemble/targets.hpp"

namespace ensemble {

struct LoadedSystem {
  EnsembleSystem system;
  std::optional<TargetProfile> target;
  std::optional<SourceProfile> x0;
  std::string name;
};

struct RunConfig {
  std::filesystem::path config_dir;  // directory of the config file, for relative paths
  std::string system_file;
  std::string method;  // collocation | weak | strong | averaging
  std::vector<int> N_list;
  int eval_points = 201;
  int time_panels = 32;
  double t_final = 200.0;
  double step = 0.01;
  double tol = 1e-6;
  double eta_c = 1.0;
  double eta_p = 1.0;
  std::string output_dir = "out";
  long seed = 0;
  double tikhonov_lambda = 0.0;
};

namespace detail {

using nlohmann::json;

[[noreturn]] inline void config_fail(const std::string& where, const std::string& what) {
  throw ConfigError("schema violation at " + (where.empty() ? "/" : where) + ": " + what);
}

// Strict schema: every present key must be known, every required key present.
inline void check_fields(const json& obj, const std::string& where,
                         const std::set<std::string>& required,
                         const std::set<std::string>& optional) {
  if (!obj.is_object()) config_fail(where, "expected an object");
  for (const auto& item : obj.items()) {
    if (!required.count(item.key()) && !optional.count(item.key()))
      config_fail(where + "/" + item.key(), "unknown field");
  }
  for (const auto& key : required)
    if (!obj.contains(key)) config_fail(where, "missing required field '" + key + "'");
}

inline double get_number(const json& v, const std::string& where) {
  if (!v.is_number()) config_fail(where, "expected a number");
  return v.get<double>();
}

inline int get_integer(const json& v, const std::string& where) {
  if (!v.is_number_integer()) config_fail(where, "expected an integer");
  return v.get<int>();
}

inline std::string get_string(const json& v, const std::string& where) {
  if (!v.is_string()) config_fail(where, "expected a string");
  return v.get<std::string>();
}

inline Polynomial get_polynomial(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) config_fail(where, "expected a nonempty coefficient array");
  std::vector<double> coeffs;
  coeffs.reserve(v.size());
  for (size_t i = 0; i < v.size(); ++i)
    coeffs.push_back(get_number(v[i], where + "/" + std::to_string(i)));
  return Polynomial(std::move(coeffs));
}

// Row-major matrix of polynomial entries with fixed shape.
inline std::vector<Polynomial> get_poly_matrix(const json& v, const std::string& where, int rows,
                                               int cols) {
  if (!v.is_array() || static_cast<int>(v.size()) != rows)
    config_fail(where, "expected an array of " + std::to_string(rows) + " rows");
  std::vector<Polynomial> entries;
  entries.reserve(static_cast<size_t>(rows) * cols);
  for (int i = 0; i < rows; ++i) {
    const std::string row_where = where + "/" + std::to_string(i);
    if (!v[i].is_array() || static_cast<int>(v[i].size()) != cols)
      config_fail(row_where, "expected a row of " + std::to_string(cols) + " entries");
    for (int j = 0; j < cols; ++j)
      entries.push_back(get_polynomial(v[i][j], row_where + "/" + std::to_string(j)));
  }
  return entries;
}

inline std::vector<Polynomial> get_poly_vector(const json& v, const std::string& where, int n) {
  if (!v.is_array() || static_cast<int>(v.size()) != n)
    config_fail(where, "expected an array of " + std::to_string(n) + " component polynomials");
  std::vector<Polynomial> comps;
  comps.reserve(n);
  for (int i = 0; i < n; ++i)
    comps.push_back(get_polynomial(v[i], where + "/" + std::to_string(i)));
  return comps;
}

inline json parse_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read file: " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    size_t line = 1;
    for (size_t i = 0; i + 1 < e.byte && i < text.size(); ++i)
      if (text[i] == '\n') ++line;
    throw ConfigError(path.string() + ":" + std::to_string(line) + ": " + e.what());
  }
}

inline TargetProfile parse_target(const json& v, const std::string& where, int n) {
  check_fields(v, where, {"kind"}, {"components", "points", "values", "g"});
  const std::string kind = get_string(v.at("kind"), where + "/kind");
  if (kind == "polynomial") {
    check_fields(v, where, {"kind", "components"}, {});
    return TargetProfile::polynomial(get_poly_vector(v.at("components"), where + "/components", n));
  }
  if (kind == "tabulated") {
    check_fields(v, where, {"kind", "points", "values"}, {});
    const json& pts = v.at("points");
    const json& vals = v.at("values");
    if (!pts.is_array() || pts.size() < 2)
      config_fail(where + "/points", "expected an array of >= 2 points");
    std::vector<double> points;
    points.reserve(pts.size());
    for (size_t i = 0; i < pts.size(); ++i)
      points.push_back(get_number(pts[i], where + "/points/" + std::to_string(i)));
    if (!vals.is_array() || vals.size() != pts.size())
      config_fail(where + "/values", "expected one value row per point");
    Eigen::MatrixXd values(n, static_cast<Eigen::Index>(points.size()));
    for (size_t i = 0; i < vals.size(); ++i) {
      const std::string vw = where + "/values/" + std::to_string(i);
      if (!vals[i].is_array() || static_cast<int>(vals[i].size()) != n)
        config_fail(vw, "expected " + std::to_string(n) + " components");
      for (int r = 0; r < n; ++r)
        values(r, static_cast<Eigen::Index>(i)) =
            get_number(vals[i][r], vw + "/" + std::to_string(r));
    }
    return TargetProfile::tabulated(std::move(points), std::move(values));
  }
  if (kind == "kernel_generated") {
    check_fields(v, where, {"kind", "g"}, {});
    return TargetProfile::kernel_generated(SourceProfile(get_poly_vector(v.at("g"), where + "/g", n)));
  }
  config_fail(where + "/kind", "unknown target kind '" + kind + "'");
}

}  // namespace detail

// Loads a system description. Schema (unknown fields rejected):
//   { "n": int, "m": int, "T": number, "interval": [lo, hi],
//     "A": n x n coefficient lists, "B": n x m coefficient lists,
//     "target": { "kind": "polynomial" | "tabulated" | "kernel_generated", ... },
//     "x0": n coefficient lists, "name": string }
inline LoadedSystem load_system(const std::filesystem::path& path) {
  const detail::json j = detail::parse_json_file(path);
  detail::check_fields(j, "", {"n", "m", "T", "interval", "A", "B"}, {"target", "x0", "name"});

  const int n = detail::get_integer(j.at("n"), "/n");
  const int m = detail::get_integer(j.at("m"), "/m");
  if (n < 1) detail::config_fail("/n", "state dimension must be >= 1");
  if (m < 1) detail::config_fail("/m", "input dimension must be >= 1");
  const double T = detail::get_number(j.at("T"), "/T");
  if (!(T > 0.0)) detail::config_fail("/T", "horizon must be positive");

  const detail::json& iv = j.at("interval");
  if (!iv.is_array() || iv.size() != 2)
    detail::config_fail("/interval", "expected [lo, hi]");
  const double lo = detail::get_number(iv[0], "/interval/0");
  const double hi = detail::get_number(iv[1], "/interval/1");
  if (!(lo < hi)) detail::config_fail("/interval", "requires lo < hi");

  auto A = detail::get_poly_matrix(j.at("A"), "/A", n, n);
  auto B = detail::get_poly_matrix(j.at("B"), "/B", n, m);

  LoadedSystem loaded{
      EnsembleSystem(n, m, std::move(A), std::move(B), T, ParameterInterval(lo, hi)),
      std::nullopt, std::nullopt, ""};
  if (j.contains("name")) loaded.name = detail::get_string(j.at("name"), "/name");
  if (j.contains("target")) loaded.target = detail::parse_target(j.at("target"), "/target", n);
  if (j.contains("x0"))
    loaded.x0 = SourceProfile(detail::get_poly_vector(j.at("x0"), "/x0", n));
  return loaded;
}

// Loads a run/sweep configuration. Schema (unknown fields rejected):
//   { "system_file": path, "method": string, "N": int | [ints],
//     "eval_points": int, "time_panels": int, "t_final": number,
//     "step": number, "tol": number, "eta": {"c": number, "p": number},
//     "output_dir": path, "seed": int, "tikhonov_lambda": number }
inline RunConfig load_run_config(const std::filesystem::path& path) {
  const detail::json j = detail::parse_json_file(path);
  detail::check_fields(j, "", {"system_file", "method", "N"},
                       {"eval_points", "time_panels", "t_final", "step", "tol", "eta",
                        "output_dir", "seed", "tikhonov_lambda"});

  RunConfig cfg;
  cfg.config_dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  cfg.system_file = detail::get_string(j.at("system_file"), "/system_file");
  cfg.method = detail::get_string(j.at("method"), "/method");
  if (cfg.method != "collocation" && cfg.method != "weak" && cfg.method != "strong" &&
      cfg.method != "averaging")
    detail::config_fail("/method", "unknown method '" + cfg.method + "'");

  const detail::json& Nv = j.at("N");
  if (Nv.is_array()) {
    if (Nv.empty()) detail::config_fail("/N", "sweep list must be nonempty");
    for (size_t i = 0; i < Nv.size(); ++i)
      cfg.N_list.push_back(detail::get_integer(Nv[i], "/N/" + std::to_string(i)));
  } else {
    cfg.N_list.push_back(detail::get_integer(Nv, "/N"));
  }
  for (int N : cfg.N_list)
    if (N < 1) detail::config_fail("/N", "moment count must be >= 1");

  if (j.contains("eval_points"))
    cfg.eval_points = detail::get_integer(j.at("eval_points"), "/eval_points");
  if (cfg.eval_points < 2) detail::config_fail("/eval_points", "must be >= 2");
  if (j.contains("time_panels"))
    cfg.time_panels = detail::get_integer(j.at("time_panels"), "/time_panels");
  if (cfg.time_panels < 1) detail::config_fail("/time_panels", "must be >= 1");
  if (j.contains("t_final")) cfg.t_final = detail::get_number(j.at("t_final"), "/t_final");
  if (!(cfg.t_final > 0.0)) detail::config_fail("/t_final", "must be positive");
  if (j.contains("step")) cfg.step = detail::get_number(j.at("step"), "/step");
  if (!(cfg.step > 0.0)) detail::config_fail("/step", "must be positive");
  if (j.contains("tol")) cfg.tol = detail::get_number(j.at("tol"), "/tol");
  if (!(cfg.tol > 0.0)) detail::config_fail("/tol", "must be positive");

  if (j.contains("eta")) {
    const detail::json& eta = j.at("eta");
    detail::check_fields(eta, "/eta", {}, {"c", "p"});
    if (eta.contains("c")) cfg.eta_c = detail::get_number(eta.at("c"), "/eta/c");
    if (eta.contains("p")) cfg.eta_p = detail::get_number(eta.at("p"), "/eta/p");
    if (!(cfg.eta_c > 0.0)) detail::config_fail("/eta/c", "must be positive");
    if (!(cfg.eta_p > 0.0 && cfg.eta_p <= 1.0)) detail::config_fail("/eta/p", "must be in (0, 1]");
  }

  if (j.contains("output_dir"))
    cfg.output_dir = detail::get_string(j.at("output_dir"), "/output_dir");
  if (j.contains("seed")) cfg.seed = detail::get_integer(j.at("seed"), "/seed");
  if (j.contains("tikhonov_lambda"))
    cfg.tikhonov_lambda = detail::get_number(j.at("tikhonov_lambda"), "/tikhonov_lambda");
  if (cfg.tikhonov_lambda < 0.0) detail::config_fail("/tikhonov_lambda", "must be >= 0");
  return cfg;
}

}  // namespace ensemble

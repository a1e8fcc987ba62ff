#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "ensemble/errors.hpp"
#include "ensemble/flows.hpp"
#include "ensemble/time_grid.hpp"

namespace ensemble {

// Fixed scientific formatting with 17 significant digits, so identical values
// always serialize to identical bytes.
inline std::string format_float(double x) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.16e", x);
  return std::string(buf);
}

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open output file: " + path.string());
  return out;
}

}  // namespace detail

// Signal CSV: columns s, u_1(s), ..., u_m(s), one row per grid node.
inline void write_input_csv(const std::filesystem::path& path, const InputSignal& u) {
  auto out = detail::open_output(path);
  out << "s";
  for (int i = 0; i < u.m(); ++i) out << ",u_" << (i + 1);
  out << "\n";
  for (int j = 0; j < u.grid.size(); ++j) {
    out << format_float(u.grid.nodes(j));
    for (int i = 0; i < u.m(); ++i) out << "," << format_float(u.samples(i, j));
    out << "\n";
  }
}

// Error-curve CSV: theta, err_norm.
inline void write_error_csv(const std::filesystem::path& path,
                            const std::vector<std::pair<double, double>>& curve) {
  auto out = detail::open_output(path);
  out << "theta,err_norm\n";
  for (const auto& [theta, err] : curve)
    out << format_float(theta) << "," << format_float(err) << "\n";
}

// Flow trajectory CSV: t, V, max_residual, spread.
inline void write_flow_log_csv(const std::filesystem::path& path,
                               const std::vector<FlowSample>& samples) {
  auto out = detail::open_output(path);
  out << "t,V,max_residual,spread\n";
  for (const auto& s : samples)
    out << format_float(s.t) << "," << format_float(s.V) << "," << format_float(s.max_residual)
        << "," << format_float(s.spread) << "\n";
}

struct SweepRow {
  int N = 0;
  double delta_N = 0.0;
  double delta_max = 0.0;
  double sup_error = 0.0;
  std::optional<double> l2_error_vs_oracle;
  std::optional<double> rate_bound;
  double wall_ms = 0.0;
};

// Convergence table CSV; oracle columns stay empty when no oracle source is
// configured.
inline void write_sweep_csv(const std::filesystem::path& path,
                            const std::vector<SweepRow>& rows) {
  auto out = detail::open_output(path);
  out << "N,delta_N,delta_max,sup_error,l2_error_vs_oracle,rate_bound,wall_ms\n";
  for (const auto& r : rows) {
    out << r.N << "," << format_float(r.delta_N) << "," << format_float(r.delta_max) << ","
        << format_float(r.sup_error) << ",";
    if (r.l2_error_vs_oracle) out << format_float(*r.l2_error_vs_oracle);
    out << ",";
    if (r.rate_bound) out << format_float(*r.rate_bound);
    out << "," << format_float(r.wall_ms) << "\n";
  }
}

}  // namespace ensemble

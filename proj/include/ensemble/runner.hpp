#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ensemble/analysis.hpp"
#include "ensemble/collocation.hpp"
#include "ensemble/csv.hpp"
#include "ensemble/errors.hpp"
#include "ensemble/flows.hpp"
#include "ensemble/json_io.hpp"
#include "ensemble/system.hpp"
#include "ensemble/targets.hpp"
#include "ensemble/time_grid.hpp"

namespace ensemble {

namespace detail {

inline double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
      .count();
}

// Target used for solving: the configured profile, shifted by the initial
// profile when one is present. The shifted tabulation includes the moments so
// moment matching stays exact.
inline TargetProfile resolve_target(const EnsembleSystem& system, const LoadedSystem& loaded,
                                    int eval_points, const MomentGrid& moments) {
  if (!loaded.target)
    throw ConfigError("system file defines no target profile; add a \"target\" entry");
  if (!loaded.x0) return *loaded.target;
  std::vector<double> pts = evaluation_grid(system.interval(), eval_points);
  for (int k = 0; k < moments.N(); ++k) pts.push_back(moments[k]);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return shift_target(system, *loaded.target, *loaded.x0, std::move(pts));
}

struct SolveResult {
  InputSignal input;
  std::optional<CollocationSolution> collocation;
  std::optional<FlowReport> flow;
};

inline SolveResult execute_method(const RunConfig& cfg, const EnsembleSystem& system,
                                  const TargetProfile& target, const MomentGrid& moments,
                                  const TimeGrid& grid) {
  const MomentVector F = moment_vector(system, target, moments);
  SolveResult res;
  if (cfg.method == "collocation") {
    CollocationSolution sol = solve_collocation(system, F, grid, cfg.tikhonov_lambda);
    res.input = sol.input;
    res.collocation = std::move(sol);
  } else if (cfg.method == "weak") {
    FlowReport r = weak_flow(system, moments, F, grid, cfg.t_final, cfg.step, cfg.tol);
    res.input = r.final_input;
    res.flow = std::move(r);
  } else if (cfg.method == "strong") {
    FlowReport r = strong_flow(system, moments, F, grid, cfg.t_final, cfg.step, cfg.tol,
                               EtaSchedule(cfg.eta_c, cfg.eta_p));
    res.input = r.final_input;
    res.flow = std::move(r);
  } else if (cfg.method == "averaging") {
    FlowReport r = averaging_flow(system, moments, F, grid, cfg.t_final, cfg.step, cfg.tol);
    res.input = r.final_input;
    res.flow = std::move(r);
  } else {
    throw ConfigError("unknown method '" + cfg.method + "'");
  }
  return res;
}

struct OracleMetrics {
  double g_norm = 0.0;
  double l2_error = 0.0;
  std::optional<double> bound;  // requires delta_max > 0
  RateConstants constants;
};

// Oracle comparisons are available when the configured target is
// kernel-generated (f = R R* g) and no initial-profile shift is applied.
inline bool oracle_available(const LoadedSystem& loaded) {
  return loaded.target && !loaded.x0 &&
         loaded.target->kind() == TargetProfile::Kind::kernel_generated;
}

inline OracleMetrics oracle_metrics(const EnsembleSystem& system, const TargetProfile& target,
                                    const TimeGrid& grid, const InputSignal& input,
                                    const DeltaMetrics& deltas, const RateConstants& constants) {
  OracleMetrics m;
  m.constants = constants;
  m.g_norm = target.source().l2_norm(system.interval());
  m.l2_error = l2_norm(input - target.kernel_input(system, grid));
  if (deltas.delta_max > 0.0)
    m.bound = rate_bound(system.n(), constants, deltas.delta_max, m.g_norm);
  return m;
}

}  // namespace detail

// Executes a single configuration: writes input.csv, error.csv, report.txt
// (and flow_log.csv for flow methods) into the output directory.
inline void run_command(const RunConfig& cfg, const std::optional<std::string>& output_override,
                        bool verbose, std::ostream& log) {
  if (cfg.N_list.size() != 1)
    throw ConfigError("'run' expects a single N; use 'sweep' for an N list");
  const auto t_start = std::chrono::steady_clock::now();

  const LoadedSystem loaded = load_system(cfg.config_dir / cfg.system_file);
  const EnsembleSystem& system = loaded.system;
  const TimeGrid grid = TimeGrid::gauss_legendre(system.horizon(), cfg.time_panels, 4);
  const int N = cfg.N_list.front();
  const MomentGrid moments = MomentGrid::equidistant(system.interval(), N);
  const TargetProfile target = detail::resolve_target(system, loaded, cfg.eval_points, moments);

  const detail::SolveResult res = detail::execute_method(cfg, system, target, moments, grid);

  const auto curve =
      error_curve(system, res.input, target, evaluation_grid(system.interval(), cfg.eval_points));
  SupError sup{curve.front().second, curve.front().first};
  for (const auto& [theta, err] : curve)
    if (err > sup.value) sup = {err, theta};
  const DeltaMetrics deltas = delta_metrics(moments, system.interval());

  std::optional<detail::OracleMetrics> oracle;
  if (detail::oracle_available(loaded))
    oracle = detail::oracle_metrics(system, target, grid, res.input, deltas,
                                    estimate_constants(system, 128, grid));
  const double wall = detail::elapsed_ms(t_start);

  const std::filesystem::path outdir = output_override ? *output_override : cfg.output_dir;
  std::filesystem::create_directories(outdir);
  write_input_csv(outdir / "input.csv", res.input);
  write_error_csv(outdir / "error.csv", curve);
  if (res.flow) write_flow_log_csv(outdir / "flow_log.csv", res.flow->samples);

  std::ostringstream rep;
  rep << "method: " << cfg.method << "\n";
  rep << "system_file: " << cfg.system_file << "\n";
  if (!loaded.name.empty()) rep << "system_name: " << loaded.name << "\n";
  rep << "N: " << N << "\n";
  rep << "time_panels: " << cfg.time_panels << "\n";
  rep << "eval_points: " << cfg.eval_points << "\n";
  rep << "sup_error: " << format_float(sup.value) << "\n";
  rep << "sup_error_argmax: " << format_float(sup.argmax) << "\n";
  rep << "delta_N: " << format_float(deltas.delta_N) << "\n";
  rep << "delta_max: " << format_float(deltas.delta_max)
      << (deltas.single_moment ? " (single moment)" : "") << "\n";
  if (cfg.tikhonov_lambda > 0.0)
    rep << "tikhonov_lambda: " << format_float(cfg.tikhonov_lambda) << "\n";
  if (res.collocation) {
    rep << "collocation_residual: " << format_float(res.collocation->residual) << "\n";
    if (res.collocation->residual_warning)
      rep << "residual_warning: true (relative residual above 1e-6)\n";
    rep << "condition_estimate: " << format_float(res.collocation->condition_estimate) << "\n";
  }
  if (res.flow) {
    const FlowReport& fr = *res.flow;
    rep << "flow_converged: " << (fr.converged ? "true" : "false") << "\n";
    rep << "flow_iterations: " << fr.iterations << "\n";
    rep << "flow_final_max_residual: " << format_float(fr.samples.back().max_residual) << "\n";
    rep << "flow_final_spread: " << format_float(fr.samples.back().spread) << "\n";
  }
  if (oracle) {
    rep << "oracle_g_norm: " << format_float(oracle->g_norm) << "\n";
    rep << "l2_error_vs_oracle: " << format_float(oracle->l2_error) << "\n";
    if (oracle->bound)
      rep << "rate_bound: " << format_float(*oracle->bound) << " (estimated constants)\n";
    rep << "rate_constants: M_Q=" << format_float(oracle->constants.M_Q)
        << " L_Q=" << format_float(oracle->constants.L_Q)
        << " R_norm=" << format_float(oracle->constants.R_norm)
        << " resolution=" << oracle->constants.resolution << "\n";
  }
  rep << "wall_ms: " << format_float(wall) << "\n";

  {
    std::ofstream out(outdir / "report.txt", std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open output file: " + (outdir / "report.txt").string());
    out << rep.str();
  }
  if (verbose) log << rep.str();
}

// Executes a convergence sweep over the configured N list; writes sweep.csv.
inline void sweep_command(const RunConfig& cfg, const std::optional<std::string>& output_override,
                          bool verbose, std::ostream& log) {
  for (size_t i = 0; i + 1 < cfg.N_list.size(); ++i)
    if (!(cfg.N_list[i] < cfg.N_list[i + 1]))
      throw ConfigError("sweep requires a strictly ascending N list");

  const LoadedSystem loaded = load_system(cfg.config_dir / cfg.system_file);
  const EnsembleSystem& system = loaded.system;
  const TimeGrid grid = TimeGrid::gauss_legendre(system.horizon(), cfg.time_panels, 4);

  std::optional<RateConstants> constants;
  if (detail::oracle_available(loaded)) constants = estimate_constants(system, 128, grid);

  // Without an initial-profile shift the target is moment-independent; resolve
  // it once so the kernel-generated representer cache is shared across rows.
  std::optional<TargetProfile> shared_target;
  if (!loaded.x0)
    shared_target = detail::resolve_target(system, loaded, cfg.eval_points,
                                           MomentGrid::equidistant(system.interval(), 1));

  std::vector<SweepRow> rows;
  rows.reserve(cfg.N_list.size());
  for (int N : cfg.N_list) {
    const auto t_start = std::chrono::steady_clock::now();
    const MomentGrid moments = MomentGrid::equidistant(system.interval(), N);
    std::optional<TargetProfile> shifted;
    if (!shared_target)
      shifted = detail::resolve_target(system, loaded, cfg.eval_points, moments);
    const TargetProfile& target = shared_target ? *shared_target : *shifted;
    const detail::SolveResult res = detail::execute_method(cfg, system, target, moments, grid);
    const SupError sup = sup_error(system, res.input, target, cfg.eval_points);
    const DeltaMetrics deltas = delta_metrics(moments, system.interval());

    SweepRow row;
    row.N = N;
    row.delta_N = deltas.delta_N;
    row.delta_max = deltas.delta_max;
    row.sup_error = sup.value;
    if (constants) {
      const detail::OracleMetrics m =
          detail::oracle_metrics(system, target, grid, res.input, deltas, *constants);
      row.l2_error_vs_oracle = m.l2_error;
      row.rate_bound = m.bound;
    }
    row.wall_ms = detail::elapsed_ms(t_start);
    rows.push_back(row);
    if (verbose)
      log << "N=" << N << " sup_error=" << format_float(sup.value)
          << (row.l2_error_vs_oracle
                  ? " l2_error_vs_oracle=" + format_float(*row.l2_error_vs_oracle)
                  : std::string())
          << "\n";
  }

  const std::filesystem::path outdir = output_override ? *output_override : cfg.output_dir;
  std::filesystem::create_directories(outdir);
  write_sweep_csv(outdir / "sweep.csv", rows);
}

}  // namespace ensemble

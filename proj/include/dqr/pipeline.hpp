#ifndef DQR_PIPELINE_HPP
#define DQR_PIPELINE_HPP

#include "dqr/ingest.hpp"

namespace dqr {

// ---------------------------------------------------------------------------
// Run directory layout:
//   spec.json                      resolved configuration echo (fit)
//   fits/u{d}_tau{l}.csv|.bin      retained draws per task
//   summary.csv                    posterior coefficient table
//   failures.json                  failed tasks, possibly empty
//   adjust/u{d}.csv                per-direction adjusted quantiles
//   adjust/bandwidths.csv          chosen bandwidth per direction
//   adjust/check_points.csv        hull check points
//   contour/tau{l}_point{i}.json   region boundaries in original units
//   contour/point{i}.svg           2D overlays across tau
//   check/subgradient*.csv         level calibration per direction
//   check/nesting.json             region inclusion report

inline std::string fits_base(const std::string& out_dir, int d, int l) {
  return out_dir + "/fits/u" + std::to_string(d) + "_tau" + std::to_string(l);
}

inline void require_artifact(const std::string& path, const std::string& hint) {
  if (!fs::exists(path))
    throw InvalidStateError("missing artifact " + path + "; " + hint);
}

/// Deterministic scaffolding shared by every stage: ingested data, response
/// scaling, direction grid, spline terms, and the design layout.
struct Workspace {
  RunConfig cfg;
  IngestedData data;
  Mat scaled_responses;
  Vec response_sds;
  std::vector<Direction> directions;
  std::vector<SplineTerm> splines;
  DesignLayout layout;
  std::vector<std::string> precision_names;

  long n() const { return scaled_responses.rows(); }
  int k() const { return int(scaled_responses.cols()); }
};

inline Workspace make_workspace(const RunConfig& cfg) {
  Workspace ws;
  ws.cfg = cfg;
  ws.data = ingest(cfg);
  const int k = ws.data.input.k();
  if (k < 2 || k > 3)
    throw std::invalid_argument("run configuration needs 2 or 3 response columns");

  ws.scaled_responses = ws.data.input.responses;
  ws.response_sds = Vec::Ones(k);
  if (cfg.scale_responses) {
    for (int j = 0; j < k; ++j) {
      const double sd = sd_of(ws.scaled_responses.col(j));
      if (!(sd > 0.0))
        throw std::invalid_argument("response column '" + cfg.responses[size_t(j)] +
                                    "' has zero variance; cannot scale");
      ws.response_sds[j] = sd;
      ws.scaled_responses.col(j) /= sd;
    }
  }

  ws.directions = k == 2 ? direction_grid_2d(cfg.directions) : direction_grid_3d(cfg.directions);
  for (size_t s = 0; s < cfg.splines.size(); ++s) {
    const auto& sp = cfg.splines[s];
    ws.splines.push_back(make_spline_term(sp.variable, ws.data.input.spline_values.col(long(s)),
                                          sp.degree, sp.n_knots, sp.range));
  }
  auto assembled = assemble_design(project(ws.scaled_responses, ws.directions.front()),
                                   ws.data.input.linear, ws.data.input.linear_names, ws.splines);
  ws.layout = assembled.layout;
  ws.precision_names.push_back("zeta");
  for (size_t b = 0; b < ws.splines.size(); ++b)
    ws.precision_names.push_back("nu" + std::to_string(b + 1));
  return ws;
}

inline RunConfig load_run_config(const std::string& out_dir) {
  const std::string spec_path = out_dir + "/spec.json";
  require_artifact(spec_path, "run `dqr fit` first");
  std::ifstream in(spec_path);
  json j;
  in >> j;
  RunConfig cfg = config_from_json(j["config"]);
  cfg.out_dir = out_dir;
  return cfg;
}

// ---------------------------------------------------------------------------
// simulate

inline void cmd_simulate(const RunConfig& cfg) {
  GeneratorSpec gen = cfg.sim.to_generator(cfg.seed);
  GeneratedData data = generate(gen);

  std::vector<std::string> header;
  for (int j = 0; j < gen.k; ++j) header.push_back("y" + std::to_string(j + 1));
  for (const auto& n : data.covariate_names) header.push_back(n);
  std::vector<std::vector<std::string>> rows;
  rows.reserve(size_t(gen.n));
  for (long i = 0; i < gen.n; ++i) {
    std::vector<std::string> row;
    for (int j = 0; j < gen.k; ++j) row.push_back(format_double(data.responses(i, j)));
    for (long c = 0; c < data.covariates.cols(); ++c)
      row.push_back(format_double(data.covariates(i, c)));
    rows.push_back(std::move(row));
  }
  write_csv(cfg.out_dir + "/data.csv", header, rows);

  json echo;
  echo["config"] = config_to_json(cfg);
  echo["output"] = cfg.out_dir + "/data.csv";
  echo["rows"] = gen.n;
  write_json(cfg.out_dir + "/simulate.json", echo);
}

// ---------------------------------------------------------------------------
// fit

inline void cmd_fit(const RunConfig& cfg_in) {
  RunConfig cfg = cfg_in;
  Workspace ws = make_workspace(cfg);
  // Resolve data-dependent spline ranges into the echoed configuration so the
  // run directory fully describes the model.
  for (size_t s = 0; s < ws.splines.size(); ++s) cfg.splines[s].range = ws.splines[s].range;
  ws.cfg = cfg;

  RunResult run = run_all(cfg.to_model_spec(), ws.data.input);

  json spec;
  spec["config"] = config_to_json(cfg);
  spec["derived"]["n"] = run.n;
  spec["derived"]["k"] = ws.k();
  spec["derived"]["response_sds"] = std::vector<double>(
      run.response_sds.data(), run.response_sds.data() + run.response_sds.size());
  spec["derived"]["columns"] = run.layout.column_names;
  spec["derived"]["point_names"] = ws.data.point_names;
  spec["derived"]["tasks"] = long(run.fits.size());
  write_json(cfg.out_dir + "/spec.json", spec);

  std::vector<std::vector<std::string>> summary_rows;
  json failures = json::array();
  for (const auto& fit : run.fits) {
    const int d = fit.task.direction_index;
    const int l = fit.task.tau_index;
    if (fit.failed) {
      failures.push_back({{"direction", d},
                          {"tau_index", l},
                          {"tau", fit.task.tau},
                          {"type", fit.error_type},
                          {"message", fit.error_message}});
      continue;
    }
    write_draw_store(fits_base(cfg.out_dir, d, l), fit.draws);
    for (const auto& row : summarize(fit))
      summary_rows.push_back({std::to_string(d), format_double(fit.task.tau), row.name,
                              format_double(row.mean), format_double(row.sd),
                              format_double(row.q025), format_double(row.q975)});
  }
  write_csv(cfg.out_dir + "/summary.csv",
            {"direction", "tau", "parameter", "mean", "sd", "q025", "q975"}, summary_rows);
  write_json(cfg.out_dir + "/failures.json", failures);
}

// ---------------------------------------------------------------------------
// Loading fitted runs back

struct LoadedRun {
  Workspace ws;
  std::vector<DrawStore> stores;        // task-major, direction-major order
  std::vector<Vec> coef_means;
  std::vector<double> bandwidths;       // per direction; < 0 means raw pass-through

  long L() const { return long(ws.cfg.taus.size()); }
  const DrawStore& store(int d, int l) const { return stores[size_t(d) * size_t(L()) + size_t(l)]; }
  const Vec& coef_mean(int d, int l) const {
    return coef_means[size_t(d) * size_t(L()) + size_t(l)];
  }
  bool adjusted(int d) const { return bandwidths[size_t(d)] >= 0.0; }
};

inline LoadedRun load_run(const std::string& out_dir) {
  LoadedRun run;
  run.ws = make_workspace(load_run_config(out_dir));
  const auto& cfg = run.ws.cfg;
  require_artifact(fits_base(out_dir, 0, 0) + ".bin", "run `dqr fit` first");
  for (int d = 0; d < cfg.directions; ++d)
    for (size_t l = 0; l < cfg.taus.size(); ++l) {
      run.stores.push_back(read_draw_store(fits_base(out_dir, d, int(l)),
                                           run.ws.layout.column_names, run.ws.precision_names));
      run.coef_means.push_back(run.stores.back().coef.colwise().mean().transpose());
    }

  run.bandwidths.assign(size_t(cfg.directions), -1.0);
  const std::string bw_path = out_dir + "/adjust/bandwidths.csv";
  if (fs::exists(bw_path)) {
    DataTable t = read_csv_table(bw_path);
    Vec dir_col = numeric_column(t, "direction");
    Vec crossed = numeric_column(t, "crossed");
    Vec bw = numeric_column(t, "bandwidth");
    for (long i = 0; i < t.rows(); ++i)
      if (crossed[i] > 0.5) run.bandwidths[size_t(dir_col[i])] = bw[i];
  }
  return run;
}

/// Halfspaces at one covariate point and tau level, adjusted offsets where
/// the adjust stage selected a bandwidth for the direction.
inline std::vector<Halfspace> halfspaces_at(const LoadedRun& run, const CovariatePoint& pt,
                                            int level) {
  const auto& ws = run.ws;
  const Vec row = design_row_at(ws.layout, ws.splines, pt.linear, pt.spline_inputs);
  std::vector<Halfspace> out;
  for (int d = 0; d < ws.cfg.directions; ++d) {
    const Vec& mean = run.coef_mean(d, level);
    const Vec b = mean.segment(ws.layout.directional.start, ws.layout.directional.length);
    double offset = mean.dot(row);
    if (run.adjusted(d)) {
      std::vector<const DrawStore*> fits;
      for (long l = 0; l < run.L(); ++l) fits.push_back(&run.store(d, int(l)));
      const InducedQuantileGrid grid = make_induced_grid(fits, ws.cfg.taus, row);
      const long r = 2 * long(level);
      offset = gp_predict(grid.tau_grid, grid.means.row(r).transpose(),
                          grid.vars.row(r).transpose(), ws.cfg.gp, grid.p_grid[size_t(r)],
                          run.bandwidths[size_t(d)])
                   .mean;
    }
    out.push_back(make_halfspace(ws.directions[size_t(d)], b, offset, ws.cfg.taus[size_t(level)]));
  }
  return out;
}

inline double region_bound(const Workspace& ws) {
  return 10.0 * std::max(1e-8, ws.scaled_responses.cwiseAbs().maxCoeff());
}

// ---------------------------------------------------------------------------
// adjust

inline void cmd_adjust(const RunConfig& cfg_cli) {
  const std::string out = cfg_cli.out_dir;
  RunConfig cfg = load_run_config(out);
  Workspace ws = make_workspace(cfg);
  require_artifact(fits_base(out, 0, 0) + ".bin", "run `dqr fit` first");

  const auto points = check_points(ws.data.space);
  std::vector<CovariatePoint> pts;
  std::vector<Vec> rows;
  for (const auto& p : points) {
    pts.push_back(split_space_point(ws.data, p));
    rows.push_back(design_row_at(ws.layout, ws.splines, pts.back().linear,
                                 pts.back().spline_inputs));
  }

  {
    std::vector<std::vector<std::string>> cp_rows;
    for (size_t i = 0; i < pts.size(); ++i) {
      std::vector<std::string> row{std::to_string(i)};
      for (long c = 0; c < pts[i].full.size(); ++c) row.push_back(format_double(pts[i].full[c]));
      cp_rows.push_back(std::move(row));
    }
    std::vector<std::string> header{"point"};
    for (const auto& n : ws.data.point_names) header.push_back(n);
    write_csv(out + "/adjust/check_points.csv", header, cp_rows);
  }

  const long L = long(cfg.taus.size());
  double warm = 0.0;
  long crossed_count = 0;
  double bw_sum = 0.0, bw_max = 0.0;
  std::vector<std::vector<std::string>> bw_rows;

  for (int d = 0; d < cfg.directions; ++d) {
    std::vector<DrawStore> stores;
    for (long l = 0; l < L; ++l)
      stores.push_back(
          read_draw_store(fits_base(out, d, int(l)), ws.layout.column_names, ws.precision_names));
    std::vector<const DrawStore*> refs;
    for (const auto& s : stores) refs.push_back(&s);

    std::vector<InducedQuantileGrid> grids;
    for (const auto& row : rows) grids.push_back(make_induced_grid(refs, cfg.taus, row));

    AdjustedQuantiles adj = adjust_direction(grids, cfg.gp, warm);
    if (!adj.pass_through) {
      warm = adj.bandwidth;
      ++crossed_count;
      bw_sum += adj.bandwidth;
      bw_max = std::max(bw_max, adj.bandwidth);
    }

    std::vector<std::vector<std::string>> adj_rows;
    for (size_t p = 0; p < pts.size(); ++p)
      for (long l = 0; l < L; ++l)
        adj_rows.push_back({std::to_string(p), format_double(cfg.taus[size_t(l)]),
                            format_double(adj.unadjusted(long(p), l)),
                            format_double(adj.adjusted(long(p), 2 * l)),
                            format_double(std::sqrt(adj.predictive_var(long(p), 2 * l))),
                            format_double(adj.bandwidth)});
    write_csv(out + "/adjust/u" + std::to_string(d) + ".csv",
              {"point", "tau", "unadjusted", "adjusted", "predictive_sd", "bandwidth"}, adj_rows);
    bw_rows.push_back({std::to_string(d), adj.pass_through ? "0" : "1",
                       format_double(adj.bandwidth)});
  }
  write_csv(out + "/adjust/bandwidths.csv", {"direction", "crossed", "bandwidth"}, bw_rows);

  json echo;
  echo["config"] = config_to_json(cfg);
  echo["check_points"] = long(pts.size());
  echo["directions_adjusted"] = crossed_count;
  echo["mean_bandwidth_adjusted"] = crossed_count > 0 ? bw_sum / double(crossed_count) : 0.0;
  echo["max_bandwidth"] = bw_max;
  write_json(out + "/adjust/adjust.json", echo);
}

// ---------------------------------------------------------------------------
// contour

inline std::vector<CovariatePoint> contour_points(const LoadedRun& run) {
  std::vector<CovariatePoint> pts;
  for (const auto& spec : run.ws.cfg.contour_points)
    pts.push_back(resolve_point(run.ws.data, spec));
  if (pts.empty()) pts.push_back(default_point(run.ws.data));
  return pts;
}

inline void cmd_contour(const RunConfig& cfg_cli, bool cli_presentation = false) {
  const std::string out = cfg_cli.out_dir;
  LoadedRun run = load_run(out);
  if (cli_presentation) {
    run.ws.cfg.contour_points = cfg_cli.contour_points;
    run.ws.cfg.svg = cfg_cli.svg;
  }
  const auto pts = contour_points(run);
  const double bound = region_bound(run.ws);
  const auto& taus = run.ws.cfg.taus;

  long adjusted_dirs = 0;
  for (int d = 0; d < run.ws.cfg.directions; ++d) adjusted_dirs += run.adjusted(d) ? 1 : 0;

  for (size_t i = 0; i < pts.size(); ++i) {
    std::vector<Contour> overlays;
    std::vector<std::string> labels;
    for (size_t l = 0; l < taus.size(); ++l) {
      auto hss = halfspaces_at(run, pts[i], int(l));
      QuantileRegion region = intersect(hss, bound, taus[l]);
      region.covariate_point = pts[i].full;
      Contour contour = region_to_contour(region, run.ws.response_sds);
      write_json(out + "/contour/tau" + std::to_string(l) + "_point" + std::to_string(i) +
                     ".json",
                 contour_to_json(contour, run.ws.data.point_names));
      overlays.push_back(std::move(contour));
      labels.push_back("tau=" + format_double(taus[l]));
    }
    if (run.ws.k() == 2 && run.ws.cfg.svg)
      write_contour_svg(out + "/contour/point" + std::to_string(i) + ".svg", overlays, labels);
  }

  json echo;
  echo["config"] = config_to_json(run.ws.cfg);
  echo["points"] = long(pts.size());
  echo["bound"] = bound;
  echo["adjusted_directions"] = adjusted_dirs;
  write_json(out + "/contour/contour.json", echo);
}

// ---------------------------------------------------------------------------
// check

inline void cmd_check(const RunConfig& cfg_cli, bool cli_presentation = false) {
  const std::string out = cfg_cli.out_dir;
  LoadedRun run = load_run(out);
  if (cli_presentation) run.ws.cfg.contour_points = cfg_cli.contour_points;
  Workspace& ws = run.ws;
  const auto& taus = ws.cfg.taus;
  const long n = ws.n();
  const bool has_covariates = ws.data.space.values.cols() > 0;

  // Subgradient: share of observations strictly inside the lower open
  // halfspace of their own covariate row, per direction and level. Raw
  // offsets always; adjusted offsets only for covariate-free models, where
  // the adjustment is a constant shift per direction.
  std::vector<std::vector<std::string>> sg_rows, sg_summary;
  for (size_t l = 0; l < taus.size(); ++l) {
    double sum_raw = 0.0, dev_raw = 0.0, sum_adj = 0.0, dev_adj = 0.0;
    bool any_adj = false;
    for (int d = 0; d < ws.cfg.directions; ++d) {
      const auto& dir = ws.directions[size_t(d)];
      ProjectedSample proj = project(ws.scaled_responses, dir);
      auto assembled =
          assemble_design(proj, ws.data.input.linear, ws.data.input.linear_names, ws.splines);
      Vec eta = assembled.design * run.coef_mean(d, int(l));
      long below = 0;
      for (long i = 0; i < n; ++i)
        if (proj.y_u[i] < eta[i]) ++below;
      const double frac = double(below) / double(n);
      sum_raw += frac;
      dev_raw += std::abs(frac - taus[l]);

      std::string frac_adj_str;
      if (!has_covariates && run.adjusted(d)) {
        const auto hss = halfspaces_at(run, default_point(ws.data), int(l));
        long below_adj = 0;
        for (long i = 0; i < n; ++i)
          if (hss[size_t(d)].slack(ws.scaled_responses.row(i).transpose()) < 0.0) ++below_adj;
        const double fa = double(below_adj) / double(n);
        frac_adj_str = format_double(fa);
        sum_adj += fa;
        dev_adj += std::abs(fa - taus[l]);
        any_adj = true;
      } else if (!has_covariates) {
        frac_adj_str = format_double(frac);  // pass-through direction
        sum_adj += frac;
        dev_adj += std::abs(frac - taus[l]);
        any_adj = true;
      }
      sg_rows.push_back({format_double(taus[l]), std::to_string(d), format_double(frac),
                         frac_adj_str});
    }
    const double D = double(ws.cfg.directions);
    sg_summary.push_back({format_double(taus[l]), format_double(sum_raw / D),
                          format_double(dev_raw / D),
                          any_adj ? format_double(sum_adj / D) : std::string(),
                          any_adj ? format_double(dev_adj / D) : std::string()});
  }
  write_csv(out + "/check/subgradient.csv",
            {"tau", "direction", "fraction", "fraction_adjusted"}, sg_rows);
  write_csv(out + "/check/subgradient_summary.csv",
            {"tau", "mean_fraction", "mean_abs_deviation", "mean_fraction_adjusted",
             "mean_abs_deviation_adjusted"},
            sg_summary);

  // Nesting across the tau grid at the requested covariate points.
  const auto pts = contour_points(run);
  const double bound = region_bound(ws);
  json nesting = json::array();
  bool all_ok = true;
  for (size_t i = 0; i < pts.size(); ++i) {
    std::map<double, QuantileRegion> regions;
    for (size_t l = 0; l < taus.size(); ++l) {
      QuantileRegion region = intersect(halfspaces_at(run, pts[i], int(l)), bound, taus[l]);
      region.covariate_point = pts[i].full;
      regions[taus[l]] = std::move(region);
    }
    json entry;
    entry["point"] = long(i);
    if (taus.size() >= 2) {
      NestingReport report = nesting_check(regions);
      entry["pairs_checked"] = report.pairs_checked;
      entry["ok"] = report.ok();
      json viols = json::array();
      for (const auto& v : report.violations)
        viols.push_back({{"tau_low", v.tau_low},
                         {"tau_high", v.tau_high},
                         {"vertex", v.vertex},
                         {"halfspace", v.halfspace},
                         {"magnitude", v.magnitude}});
      entry["violations"] = viols;
      all_ok = all_ok && report.ok();
    } else {
      entry["pairs_checked"] = 0;
      entry["ok"] = true;
      entry["violations"] = json::array();
    }
    nesting.push_back(entry);
  }
  json nesting_doc;
  nesting_doc["points"] = nesting;
  nesting_doc["ok"] = all_ok;
  write_json(out + "/check/nesting.json", nesting_doc);

  json echo;
  echo["config"] = config_to_json(ws.cfg);
  echo["nesting_ok"] = all_ok;
  echo["subgradient"] = out + "/check/subgradient_summary.csv";
  write_json(out + "/check/check.json", echo);
}

}  // namespace dqr

#endif  // DQR_PIPELINE_HPP

#ifndef DQR_GP_ADJUST_HPP
#define DQR_GP_ADJUST_HPP

#include <algorithm>
#include <cmath>

#include "dqr/orchestrator.hpp"

namespace dqr {

// ---------------------------------------------------------------------------
// Induced quantiles

/// Quantile function of AL(mu, sigma, tau) evaluated at any level p: the
/// induced quantile of a fitted model at levels it was not fit at. Both
/// branches agree at p = tau, where the value is exactly mu.
inline double induced_quantile(double p, double mu, double sigma, double tau) {
  if (!(p > 0.0 && p < 1.0) || !(tau > 0.0 && tau < 1.0))
    throw std::invalid_argument("induced_quantile: levels must be in (0,1)");
  if (!(sigma > 0.0)) throw std::invalid_argument("induced_quantile: sigma must be positive");
  if (p <= tau) return mu + sigma / (1.0 - tau) * std::log(p / tau);
  return mu - sigma / tau * std::log((1.0 - p) / (1.0 - tau));
}

/// Per-model induced estimates at one covariate point: posterior mean and
/// variance over the retained draws of Q(p | draw) for each requested level.
struct InducedRow {
  Vec mean;  // one entry per p
  Vec var;
};

inline InducedRow induced_row(const DrawStore& draws, const Vec& design_row,
                              const std::vector<double>& p_grid) {
  const long T = draws.draws();
  if (T == 0) throw InvalidStateError("induced_row: empty draw store");
  if (design_row.size() != draws.coef.cols())
    throw std::invalid_argument("induced_row: design row length mismatch");
  Vec mus = draws.coef * design_row;
  InducedRow out;
  out.mean = Vec::Zero(long(p_grid.size()));
  out.var = Vec::Zero(long(p_grid.size()));
  for (size_t j = 0; j < p_grid.size(); ++j) {
    double s = 0.0, s2 = 0.0;
    for (long t = 0; t < T; ++t) {
      const double q = induced_quantile(p_grid[j], mus[t], draws.sigma[t], draws.tau);
      s += q;
      s2 += q * q;
    }
    const double m = s / double(T);
    out.mean[long(j)] = m;
    out.var[long(j)] = std::max(0.0, s2 / double(T) - m * m);
  }
  return out;
}

/// Induced posterior means and variances for one (direction, covariate
/// point): rows over the refined level grid, columns over the L fitted
/// models. The refined grid interleaves the fit levels with midpoints so the
/// monotonicity check also catches between-level crossings.
struct InducedQuantileGrid {
  std::vector<double> tau_grid;  // L fit levels, strictly increasing
  std::vector<double> p_grid;    // 2L-1 refined levels
  Mat means;                     // p_grid.size() x L
  Mat vars;                      // p_grid.size() x L

  /// Raw estimate of level tau_l from the model fit at tau_l.
  double raw_at(int l) const { return means(2 * l, l); }
  double raw_var_at(int l) const { return vars(2 * l, l); }
};

inline std::vector<double> refined_levels(const std::vector<double>& tau_grid) {
  std::vector<double> p;
  for (size_t l = 0; l < tau_grid.size(); ++l) {
    p.push_back(tau_grid[l]);
    if (l + 1 < tau_grid.size()) p.push_back(0.5 * (tau_grid[l] + tau_grid[l + 1]));
  }
  return p;
}

/// Assemble the grid from one direction's fits (direction-major slice) at a
/// covariate point given by its design row.
inline InducedQuantileGrid make_induced_grid(const std::vector<const DrawStore*>& fits,
                                             const std::vector<double>& tau_grid,
                                             const Vec& design_row) {
  if (fits.size() != tau_grid.size())
    throw std::invalid_argument("make_induced_grid: one fit per tau level required");
  InducedQuantileGrid grid;
  grid.tau_grid = tau_grid;
  grid.p_grid = refined_levels(tau_grid);
  const long R = long(grid.p_grid.size());
  const long L = long(tau_grid.size());
  grid.means.resize(R, L);
  grid.vars.resize(R, L);
  for (long l = 0; l < L; ++l) {
    InducedRow row = induced_row(*fits[size_t(l)], design_row, grid.p_grid);
    grid.means.col(l) = row.mean;
    grid.vars.col(l) = row.var;
  }
  return grid;
}

// ---------------------------------------------------------------------------
// Gaussian process prediction across levels

struct GpConfig {
  double sigma2_k = 100.0;    // kernel variance
  double bandwidth = 1e-3;    // ladder floor and default starting rung
  double jitter = 1e-8;
  double ladder_factor = 1.5;
  double ladder_cap = 1e5;

  void validate() const {
    if (!(sigma2_k > 0.0) || !(bandwidth > 0.0) || !(jitter > 0.0))
      throw std::invalid_argument("GpConfig: sigma2_k, bandwidth, jitter must be positive");
    if (!(ladder_factor > 1.0) || !(ladder_cap > bandwidth))
      throw std::invalid_argument("GpConfig: bad ladder");
  }
};

struct GpPrediction {
  double mean;
  double variance;   // predictive: residual kernel variance plus sigma^2(p | tau = p)
  Vec weights;       // the row vector W, one entry per fitted model
  bool sigma2_reduced = false;
};

namespace detail {

inline double sq_exp_kernel(double a, double b, double sigma2_k, double bandwidth) {
  const double d = a - b;
  return sigma2_k * std::exp(-d * d / (2.0 * bandwidth * bandwidth));
}

}  // namespace detail

/// Posterior predictive of the level-p quantile from the L induced estimates
/// of that level: mean = W q, W = k_p' (K + Sigma + jitter I)^{-1}, residual
/// variance k(p,p) - W k_p, plus the posterior variance of the model at
/// tau = p (interpolated between neighbors when p is a midpoint).
inline GpPrediction gp_predict(const std::vector<double>& tau_grid, const Vec& means_row,
                               const Vec& vars_row, const GpConfig& cfg, double p,
                               double bandwidth) {
  cfg.validate();
  const long L = long(tau_grid.size());
  if (means_row.size() != L || vars_row.size() != L)
    throw std::invalid_argument("gp_predict: row length must match tau grid");
  if (p < tau_grid.front() - 1e-12 || p > tau_grid.back() + 1e-12)
    throw std::invalid_argument("gp_predict: level outside the fitted range");

  double sigma2_k = cfg.sigma2_k;
  for (int attempt = 0;; ++attempt) {
    Mat K(L, L);
    for (long i = 0; i < L; ++i)
      for (long j = 0; j < L; ++j)
        K(i, j) = detail::sq_exp_kernel(tau_grid[size_t(i)], tau_grid[size_t(j)], sigma2_k,
                                        bandwidth);
    Vec k_p(L);
    for (long i = 0; i < L; ++i)
      k_p[i] = detail::sq_exp_kernel(tau_grid[size_t(i)], p, sigma2_k, bandwidth);

    Mat A = K;
    A.diagonal() += vars_row;
    A.diagonal().array() += cfg.jitter;

    Eigen::LDLT<Mat> ldlt(A);
    Vec w = ldlt.solve(k_p);
    if (ldlt.info() == Eigen::Success && w.allFinite()) {
      GpPrediction out;
      out.weights = w;
      out.mean = w.dot(means_row);
      const double resid = detail::sq_exp_kernel(p, p, sigma2_k, bandwidth) - w.dot(k_p);
      // sigma^2(p | tau = p): exact at fit levels, interpolated at midpoints.
      double var_at_p = 0.0;
      {
        auto hi = std::lower_bound(tau_grid.begin(), tau_grid.end(), p);
        if (hi == tau_grid.begin()) {
          var_at_p = vars_row[0];
        } else if (hi == tau_grid.end()) {
          var_at_p = vars_row[L - 1];
        } else {
          const long j = hi - tau_grid.begin();
          const double t0 = tau_grid[size_t(j - 1)], t1 = tau_grid[size_t(j)];
          const double wgt = (p - t0) / (t1 - t0);
          var_at_p = (1.0 - wgt) * vars_row[j - 1] + wgt * vars_row[j];
        }
      }
      out.variance = std::max(0.0, resid) + var_at_p;
      out.sigma2_reduced = attempt > 0;
      return out;
    }
    // Kernel variance too large for the conditioning: back it off.
    if (attempt >= 3)
      throw NumericalFailureError("gp_predict: kernel system unsolvable after variance backoff");
    sigma2_k /= 10.0;
  }
}

// ---------------------------------------------------------------------------
// Bandwidth search

/// Adjusted quantiles for one direction at every check point. `adjusted`
/// covers the refined level grid; exports normally report the fit levels
/// (the even rows).
struct AdjustedQuantiles {
  std::vector<double> tau_grid;
  std::vector<double> p_grid;
  Mat adjusted;        // n_points x p_grid.size()
  Mat predictive_var;  // n_points x p_grid.size()
  Mat unadjusted;      // n_points x L, raw estimates at their own levels
  std::vector<Mat> weights;  // per point: p_grid.size() x L
  double bandwidth = 0.0;
  bool pass_through = false;
};

/// True when the raw per-level estimates cross at any check point.
inline bool raw_crossing(const std::vector<InducedQuantileGrid>& grids) {
  for (const auto& g : grids)
    for (size_t l = 0; l + 1 < g.tau_grid.size(); ++l)
      if (g.raw_at(int(l) + 1) < g.raw_at(int(l))) return true;
  return false;
}

namespace detail {

struct LadderEval {
  Mat adjusted;
  Mat predictive_var;
  std::vector<Mat> weights;
  bool monotone = true;
  int worst_point = -1;
  double worst_gap = 0.0;
};

inline LadderEval eval_bandwidth(const std::vector<InducedQuantileGrid>& grids,
                                 const GpConfig& cfg, double bandwidth) {
  LadderEval ev;
  const auto& first = grids.front();
  const long R = long(first.p_grid.size());
  const long L = long(first.tau_grid.size());
  ev.adjusted.resize(long(grids.size()), R);
  ev.predictive_var.resize(long(grids.size()), R);
  for (size_t pt = 0; pt < grids.size(); ++pt) {
    const auto& g = grids[pt];
    Mat w(R, L);
    for (long r = 0; r < R; ++r) {
      const GpPrediction pred =
          gp_predict(g.tau_grid, g.means.row(r).transpose(), g.vars.row(r).transpose(), cfg,
                     g.p_grid[size_t(r)], bandwidth);
      ev.adjusted(long(pt), r) = pred.mean;
      ev.predictive_var(long(pt), r) = pred.variance;
      w.row(r) = pred.weights.transpose();
    }
    ev.weights.push_back(std::move(w));
    for (long r = 0; r + 1 < R; ++r) {
      const double gap = ev.adjusted(long(pt), r) - ev.adjusted(long(pt), r + 1);
      if (gap > 0.0) {
        ev.monotone = false;
        if (gap > ev.worst_gap) {
          ev.worst_gap = gap;
          ev.worst_point = int(pt);
        }
      }
    }
  }
  return ev;
}

}  // namespace detail

/// Smallest bandwidth on the geometric ladder at which the adjusted
/// quantiles are nondecreasing at every check point. A positive warm start
/// (typically the previous direction's bandwidth) starts the walk there and
/// first tries decreasing when already monotone.
inline AdjustedQuantiles bandwidth_search(const std::vector<InducedQuantileGrid>& grids,
                                          const GpConfig& cfg, double warm_start = 0.0) {
  cfg.validate();
  if (grids.empty()) throw std::invalid_argument("bandwidth_search: no check points");

  const double floor = cfg.bandwidth;
  double b = warm_start > 0.0 ? std::max(warm_start, floor) : floor;

  detail::LadderEval ev = detail::eval_bandwidth(grids, cfg, b);
  if (ev.monotone) {
    while (b / cfg.ladder_factor >= floor * (1.0 - 1e-12)) {
      const double lower = b / cfg.ladder_factor;
      detail::LadderEval trial = detail::eval_bandwidth(grids, cfg, lower);
      if (!trial.monotone) break;
      b = lower;
      ev = std::move(trial);
    }
  } else {
    for (;;) {
      b *= cfg.ladder_factor;
      if (b > cfg.ladder_cap)
        throw AdjustmentFailureError(
            "bandwidth_search: ladder cap reached with quantiles still crossing", ev.worst_point,
            ev.worst_gap);
      ev = detail::eval_bandwidth(grids, cfg, b);
      if (ev.monotone) break;
    }
  }

  AdjustedQuantiles out;
  out.tau_grid = grids.front().tau_grid;
  out.p_grid = grids.front().p_grid;
  out.adjusted = std::move(ev.adjusted);
  out.predictive_var = std::move(ev.predictive_var);
  out.weights = std::move(ev.weights);
  out.bandwidth = b;
  out.unadjusted.resize(long(grids.size()), long(out.tau_grid.size()));
  for (size_t pt = 0; pt < grids.size(); ++pt)
    for (size_t l = 0; l < out.tau_grid.size(); ++l)
      out.unadjusted(long(pt), long(l)) = grids[pt].raw_at(int(l));
  return out;
}

/// Direction-level driver: raw fits that do not cross pass through
/// unchanged; otherwise the bandwidth search runs.
inline AdjustedQuantiles adjust_direction(const std::vector<InducedQuantileGrid>& grids,
                                          const GpConfig& cfg, double warm_start = 0.0) {
  if (grids.empty()) throw std::invalid_argument("adjust_direction: no check points");
  if (!raw_crossing(grids)) {
    AdjustedQuantiles out;
    const auto& first = grids.front();
    out.tau_grid = first.tau_grid;
    out.p_grid = first.p_grid;
    const long R = long(first.p_grid.size());
    const long L = long(first.tau_grid.size());
    out.adjusted.resize(long(grids.size()), R);
    out.predictive_var.resize(long(grids.size()), R);
    out.unadjusted.resize(long(grids.size()), L);
    for (size_t pt = 0; pt < grids.size(); ++pt) {
      for (long l = 0; l < L; ++l) {
        out.unadjusted(long(pt), l) = grids[pt].raw_at(int(l));
        out.adjusted(long(pt), 2 * l) = grids[pt].raw_at(int(l));
        out.predictive_var(long(pt), 2 * l) = grids[pt].raw_var_at(int(l));
      }
      // Midpoint rows carry the neighbor average purely for reporting.
      for (long l = 0; l + 1 < L; ++l) {
        out.adjusted(long(pt), 2 * l + 1) =
            0.5 * (out.adjusted(long(pt), 2 * l) + out.adjusted(long(pt), 2 * l + 2));
        out.predictive_var(long(pt), 2 * l + 1) =
            0.5 * (out.predictive_var(long(pt), 2 * l) + out.predictive_var(long(pt), 2 * l + 2));
      }
    }
    out.bandwidth = 0.0;
    out.pass_through = true;
    return out;
  }
  return bandwidth_search(grids, cfg, warm_start);
}

// ---------------------------------------------------------------------------
// Check points in the covariate hull

/// Covariate columns split into continuous coordinates and groups of
/// category-indicator columns.
struct CovariateSpace {
  Mat values;                                        // n x m
  std::vector<int> continuous;                       // column indices
  std::vector<std::vector<int>> categorical_groups;  // disjoint column groups
};

namespace detail {

/// Andrew's monotone chain; returns hull vertices counterclockwise.
inline std::vector<std::pair<double, double>> convex_hull_2d(
    std::vector<std::pair<double, double>> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  const long n = long(pts.size());
  if (n <= 2) return pts;
  auto cross = [](const std::pair<double, double>& o, const std::pair<double, double>& a,
                  const std::pair<double, double>& b) {
    return (a.first - o.first) * (b.second - o.second) -
           (a.second - o.second) * (b.first - o.first);
  };
  std::vector<std::pair<double, double>> hull(2 * size_t(n));
  long k = 0;
  for (long i = 0; i < n; ++i) {
    while (k >= 2 && cross(hull[size_t(k - 2)], hull[size_t(k - 1)], pts[size_t(i)]) <= 0.0) --k;
    hull[size_t(k++)] = pts[size_t(i)];
  }
  const long lower = k + 1;
  for (long i = n - 2; i >= 0; --i) {
    while (k >= lower && cross(hull[size_t(k - 2)], hull[size_t(k - 1)], pts[size_t(i)]) <= 0.0)
      --k;
    hull[size_t(k++)] = pts[size_t(i)];
  }
  hull.resize(size_t(k - 1));
  return hull;
}

inline std::vector<Vec> farthest_point_subsample(const std::vector<Vec>& pts, int cap) {
  if (long(pts.size()) <= cap) return pts;
  std::vector<size_t> chosen{0};
  std::vector<double> dist(pts.size(), std::numeric_limits<double>::infinity());
  while (long(chosen.size()) < cap) {
    const Vec& last = pts[chosen.back()];
    size_t best = 0;
    double best_d = -1.0;
    for (size_t i = 0; i < pts.size(); ++i) {
      dist[i] = std::min(dist[i], (pts[i] - last).norm());
      if (dist[i] > best_d) {
        best_d = dist[i];
        best = i;
      }
    }
    if (best_d <= 0.0) break;
    chosen.push_back(best);
  }
  std::sort(chosen.begin(), chosen.end());
  std::vector<Vec> out;
  for (size_t i : chosen) out.push_back(pts[i]);
  return out;
}

}  // namespace detail

/// Covariate points spanning the hull of the sample space: convex-hull
/// vertices of the continuous coordinates (min/max in one dimension) crossed
/// with every observed combination of the categorical groups, capped by
/// farthest-point subsampling. With no covariates this is the single empty
/// point.
inline std::vector<Vec> check_points(const CovariateSpace& space, int cap = 256) {
  const long m = space.values.cols();
  if (space.values.rows() == 0 && m > 0)
    throw std::invalid_argument("check_points: empty data");

  // Continuous skeleton, as coordinate vectors over `continuous`.
  std::vector<Vec> cont_pts;
  const size_t cdim = space.continuous.size();
  if (cdim == 0) {
    cont_pts.push_back(Vec(0));
  } else if (cdim == 1) {
    const auto col = space.values.col(space.continuous[0]);
    Vec lo(1), hi(1);
    lo[0] = col.minCoeff();
    hi[0] = col.maxCoeff();
    cont_pts.push_back(lo);
    if (hi[0] != lo[0]) cont_pts.push_back(hi);
  } else if (cdim == 2) {
    std::vector<std::pair<double, double>> pts;
    for (long i = 0; i < space.values.rows(); ++i)
      pts.push_back({space.values(i, space.continuous[0]), space.values(i, space.continuous[1])});
    for (const auto& v : detail::convex_hull_2d(std::move(pts))) {
      Vec p(2);
      p << v.first, v.second;
      cont_pts.push_back(p);
    }
  } else {
    // Above two continuous dimensions: rows attaining per-coordinate extremes.
    std::vector<long> rows;
    for (size_t j = 0; j < cdim; ++j) {
      long imin = 0, imax = 0;
      const auto col = space.values.col(space.continuous[j]);
      for (long i = 1; i < col.size(); ++i) {
        if (col[i] < col[imin]) imin = i;
        if (col[i] > col[imax]) imax = i;
      }
      rows.push_back(imin);
      rows.push_back(imax);
    }
    std::sort(rows.begin(), rows.end());
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    for (long r : rows) {
      Vec p = Vec::Zero(long(cdim));
      for (size_t j = 0; j < cdim; ++j) p[long(j)] = space.values(r, space.continuous[j]);
      cont_pts.push_back(p);
    }
  }

  // Observed level combinations per categorical group, then their product.
  std::vector<std::vector<Vec>> group_levels;
  for (const auto& group : space.categorical_groups) {
    std::vector<Vec> levels;
    for (long i = 0; i < space.values.rows(); ++i) {
      Vec row(long(group.size()));
      for (size_t j = 0; j < group.size(); ++j) row[long(j)] = space.values(i, group[j]);
      bool seen = false;
      for (const auto& l : levels)
        if ((l - row).cwiseAbs().maxCoeff() == 0.0) {
          seen = true;
          break;
        }
      if (!seen) levels.push_back(row);
    }
    group_levels.push_back(std::move(levels));
  }
  std::vector<std::vector<Vec>> combos{{}};
  for (const auto& levels : group_levels) {
    std::vector<std::vector<Vec>> next;
    for (const auto& partial : combos)
      for (const auto& l : levels) {
        auto ext = partial;
        ext.push_back(l);
        next.push_back(std::move(ext));
      }
    combos = std::move(next);
  }

  std::vector<Vec> points;
  for (const auto& cp : cont_pts)
    for (const auto& combo : combos) {
      Vec full = Vec::Zero(m);
      for (size_t j = 0; j < cdim; ++j) full[space.continuous[j]] = cp[long(j)];
      for (size_t g = 0; g < combo.size(); ++g)
        for (size_t j = 0; j < space.categorical_groups[g].size(); ++j)
          full[space.categorical_groups[g][j]] = combo[g][long(j)];
      points.push_back(full);
    }
  return detail::farthest_point_subsample(points, cap);
}

}  // namespace dqr

#endif  // DQR_GP_ADJUST_HPP

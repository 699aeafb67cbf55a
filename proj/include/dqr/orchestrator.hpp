#ifndef DQR_ORCHESTRATOR_HPP
#define DQR_ORCHESTRATOR_HPP

#include <atomic>
#include <thread>

#include "dqr/sampler.hpp"

namespace dqr {

/// Spline request before data is seen; the term itself (knots, basis,
/// centering) is built from the data by run_all.
struct SplineSettings {
  std::string variable;
  int degree = 3;
  int n_knots = 20;
  std::pair<double, double> range{0.0, -1.0};  // unset unless lower < upper
};

/// Model configuration for a batch of (direction, tau) fits.
struct ModelSpec {
  std::vector<double> tau_grid;
  int direction_count = 64;
  PriorSpec priors;
  McmcSettings mcmc;         // mcmc.seed is the base seed for task derivation
  bool scale_responses = true;
  int workers = 1;

  void validate(int response_dim) const {
    if (response_dim < 2 || response_dim > 3)
      throw std::invalid_argument("ModelSpec: response dimension must be 2 or 3");
    if (tau_grid.empty()) throw std::invalid_argument("ModelSpec: empty tau grid");
    for (size_t l = 0; l < tau_grid.size(); ++l) {
      if (!(tau_grid[l] > 0.0 && tau_grid[l] < 1.0))
        throw std::invalid_argument("ModelSpec: tau values must lie in (0,1)");
      if (l > 0 && !(tau_grid[l] > tau_grid[l - 1]))
        throw std::invalid_argument("ModelSpec: tau grid must be strictly increasing");
    }
    if (direction_count < (response_dim == 2 ? 3 : 4))
      throw std::invalid_argument("ModelSpec: too few directions");
    if (workers < 1) throw std::invalid_argument("ModelSpec: workers must be >= 1");
    priors.validate();
    mcmc.validate();
  }
};

/// Data matrices for one run. Spline variables are carried separately from
/// the linear covariates; both may be empty.
struct ModelInput {
  Mat responses;                         // n x k
  Mat linear;                            // n x p
  std::vector<std::string> linear_names;
  Mat spline_values;                     // n x q
  std::vector<SplineSettings> spline_settings;

  long n() const { return responses.rows(); }
  int k() const { return int(responses.cols()); }
};

struct QuantileTask {
  int direction_index = 0;
  int tau_index = 0;
  double tau = 0.5;
  std::uint64_t seed = 0;
};

/// Fit of one (direction, tau) task. Failed tasks keep their slot so a run
/// never reorders; region construction refuses to use them.
struct FitResult {
  QuantileTask task;
  DrawStore draws;
  Vec coef_mean;
  Vec coef_sd;
  bool failed = false;
  std::string error_type;
  std::string error_message;
};

/// Expand the spec into direction-major tasks. The direction-major order is
/// what lets the bandwidth search stream one direction at a time with a warm
/// start from its predecessor.
inline std::vector<QuantileTask> plan(const ModelSpec& spec) {
  std::vector<QuantileTask> tasks;
  tasks.reserve(size_t(spec.direction_count) * spec.tau_grid.size());
  for (int d = 0; d < spec.direction_count; ++d)
    for (size_t l = 0; l < spec.tau_grid.size(); ++l)
      tasks.push_back({d, int(l), spec.tau_grid[l],
                       derive_seed(spec.mcmc.seed, std::uint64_t(d), std::uint64_t(l))});
  return tasks;
}

/// Everything produced by a run: directions, shared spline terms, the layout
/// (identical across directions), and one FitResult per task in task order.
struct RunResult {
  std::vector<Direction> directions;
  std::vector<double> tau_grid;
  Vec response_sds;               // ones when scaling is off
  std::vector<SplineTerm> splines;
  DesignLayout layout;
  std::vector<FitResult> fits;    // direction-major, matching plan()
  long n = 0;

  const FitResult& fit(int direction, int tau_index) const {
    return fits[size_t(direction) * tau_grid.size() + size_t(tau_index)];
  }
  long failed_count() const {
    long c = 0;
    for (const auto& f : fits) c += f.failed ? 1 : 0;
    return c;
  }
};

inline RunResult run_all(const ModelSpec& spec, const ModelInput& input) {
  spec.validate(input.k());
  const long n = input.n();
  if (input.linear.cols() > 0 && input.linear.rows() != n)
    throw std::invalid_argument("run_all: covariate rows do not match responses");
  if (input.linear_names.size() != size_t(input.linear.cols()))
    throw std::invalid_argument("run_all: covariate name count mismatch");
  if (input.spline_settings.size() != size_t(input.spline_values.cols()))
    throw std::invalid_argument("run_all: spline settings do not match spline columns");

  RunResult out;
  out.n = n;
  out.tau_grid = spec.tau_grid;

  // Response scaling: divide each response by its sample SD and remember the
  // factors so contours can be reported in original units.
  Mat y = input.responses;
  out.response_sds = Vec::Ones(input.k());
  if (spec.scale_responses) {
    for (int j = 0; j < input.k(); ++j) {
      const double sd = sd_of(y.col(j));
      if (!(sd > 0.0))
        throw std::invalid_argument("run_all: response column " + std::to_string(j + 1) +
                                    " has zero variance; cannot scale");
      out.response_sds[j] = sd;
      y.col(j) /= sd;
    }
  }

  out.directions = input.k() == 2 ? direction_grid_2d(spec.direction_count)
                                  : direction_grid_3d(spec.direction_count);

  for (size_t s = 0; s < input.spline_settings.size(); ++s) {
    const auto& cfg = input.spline_settings[s];
    out.splines.push_back(make_spline_term(cfg.variable, input.spline_values.col(long(s)),
                                           cfg.degree, cfg.n_knots, cfg.range));
  }

  // Check n >= P before any sampling starts.
  {
    int P = 1 + (input.k() - 1) + int(input.linear.cols());
    for (const auto& s : out.splines) P += s.n_basis();
    if (n < P)
      throw std::invalid_argument("run_all: need at least as many rows (" + std::to_string(n) +
                                  ") as design columns (" + std::to_string(P) + ")");
  }

  // The design differs across directions only through the projected blocks;
  // assemble each once and share it across that direction's tau tasks.
  struct DirectionDesign {
    Vec y_u;
    AssembledDesign assembled;
  };
  std::vector<DirectionDesign> designs;
  designs.reserve(out.directions.size());
  for (const auto& dir : out.directions) {
    ProjectedSample proj = project(y, dir);
    DirectionDesign dd;
    dd.y_u = proj.y_u;
    dd.assembled = assemble_design(proj, input.linear, input.linear_names, out.splines);
    designs.push_back(std::move(dd));
  }
  out.layout = designs.front().assembled.layout;

  const auto tasks = plan(spec);
  out.fits.resize(tasks.size());

  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      const auto& task = tasks[i];
      const auto& dd = designs[size_t(task.direction_index)];
      FitResult fr;
      fr.task = task;
      try {
        McmcSettings settings = spec.mcmc;
        settings.seed = task.seed;
        fr.draws = gibbs_run(dd.assembled.design, dd.y_u, task.tau, spec.priors,
                             dd.assembled.penalties, settings,
                             dd.assembled.layout.column_names);
        fr.coef_mean = fr.draws.coef.colwise().mean().transpose();
        fr.coef_sd = Vec(fr.draws.coef.cols());
        for (long c = 0; c < fr.draws.coef.cols(); ++c) fr.coef_sd[c] = sd_of(fr.draws.coef.col(c));
      } catch (const DivergedChainError& e) {
        fr.failed = true;
        fr.error_type = "diverged-chain";
        fr.error_message = e.what();
      } catch (const NumericalFailureError& e) {
        fr.failed = true;
        fr.error_type = "numerical-failure";
        fr.error_message = e.what();
      } catch (const std::exception& e) {
        fr.failed = true;
        fr.error_type = "error";
        fr.error_message = e.what();
      }
      out.fits[i] = std::move(fr);
    }
  };

  const int n_threads = std::max(1, spec.workers);
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads - 1; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Posterior summaries

struct SummaryRow {
  std::string name;
  double mean;
  double sd;
  double q025;
  double q975;
};

/// Per-parameter posterior table (coefficients plus the scale).
inline std::vector<SummaryRow> summarize(const FitResult& fit) {
  if (fit.failed) throw InvalidStateError("summarize: task failed: " + fit.error_message);
  if (fit.draws.draws() == 0) throw InvalidStateError("summarize: empty draw store");
  std::vector<SummaryRow> rows;
  auto add = [&](const std::string& name, const Vec& column) {
    std::vector<double> vals(column.data(), column.data() + column.size());
    rows.push_back({name, column.mean(), sd_of(column), quantile_of(vals, 0.025),
                    quantile_of(vals, 0.975)});
  };
  for (long c = 0; c < fit.draws.coef.cols(); ++c)
    add(fit.draws.coef_names[size_t(c)], fit.draws.coef.col(c));
  add("sigma", fit.draws.sigma);
  return rows;
}

}  // namespace dqr

#endif  // DQR_ORCHESTRATOR_HPP

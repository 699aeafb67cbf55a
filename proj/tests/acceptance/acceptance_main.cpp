// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Oracles are independent of the paths they check (rejection
// sampling, Gauss-Jordan solves, subgradient descent, prior simulation).
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>

#include "dqr/dqr.hpp"
#include "../oracles.hpp"

using namespace dqr;
namespace fs = std::filesystem;

namespace {

struct Harness {
  int failures = 0;
  void run(int id, const std::string& name, const std::function<std::string()>& body) {
    std::string detail;
    bool ok = true;
    try {
      detail = body();
    } catch (const std::exception& e) {
      ok = false;
      detail = std::string("exception: ") + e.what();
    }
    if (!ok || detail.rfind("FAIL", 0) == 0) {
      ++failures;
      std::printf("FAIL criterion %d (%s): %s\n", id, name.c_str(), detail.c_str());
    } else {
      std::printf("PASS criterion %d (%s): %s\n", id, name.c_str(), detail.c_str());
    }
    std::fflush(stdout);
  }
};

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), pattern, a, b, c);
  return buf;
}

// Shared Gaussian run for criteria 1, 2 and 4: standard bivariate normal,
// n = 5000, D = 64, tau grid {0.1, 0.2, 0.3}, adjusted offsets.
struct GaussianRun {
  RunResult run;
  Mat scaled;                       // responses after SD scaling
  std::vector<AdjustedQuantiles> adjusted;  // per direction
  std::vector<std::vector<Halfspace>> halfspaces_by_level;
  std::map<double, QuantileRegion> regions;
  Vec response_sds;
};

GaussianRun make_gaussian_run() {
  GeneratorSpec gen;
  gen.kind = GeneratorKind::SphericalGaussian;
  gen.n = 5000;
  gen.k = 2;
  gen.seed = 20240601;
  GeneratedData data = generate(gen);

  ModelSpec spec;
  spec.tau_grid = {0.1, 0.2, 0.3};
  spec.direction_count = 64;
  spec.mcmc = {1500, 300, 3, 20240601};
  spec.workers = 2;

  ModelInput input;
  input.responses = data.responses;
  input.linear = Mat(gen.n, 0);
  input.spline_values = Mat(gen.n, 0);

  GaussianRun g;
  g.run = run_all(spec, input);
  if (g.run.failed_count() > 0) throw Error("gaussian run had failed tasks");
  g.response_sds = g.run.response_sds;
  g.scaled = data.responses;
  for (int j = 0; j < 2; ++j) g.scaled.col(j) /= g.response_sds[j];

  // Adjustment at the single (empty) covariate point, warm-started across
  // directions in grid order.
  const Vec row = design_row_at(g.run.layout, g.run.splines, Vec(0), Vec(0));
  GpConfig gp;
  double warm = 0.0;
  for (int d = 0; d < spec.direction_count; ++d) {
    std::vector<const DrawStore*> fits;
    for (int l = 0; l < 3; ++l) fits.push_back(&g.run.fit(d, l).draws);
    std::vector<InducedQuantileGrid> grids{make_induced_grid(fits, spec.tau_grid, row)};
    AdjustedQuantiles adj = adjust_direction(grids, gp, warm);
    if (!adj.pass_through) warm = adj.bandwidth;
    g.adjusted.push_back(std::move(adj));
  }

  const double bound = 10.0 * g.scaled.cwiseAbs().maxCoeff();
  for (int l = 0; l < 3; ++l) {
    std::vector<Halfspace> hss;
    for (int d = 0; d < spec.direction_count; ++d) {
      const auto& fit = g.run.fit(d, l);
      const Vec b = fit.coef_mean.segment(g.run.layout.directional.start,
                                          g.run.layout.directional.length);
      const double offset = g.adjusted[size_t(d)].adjusted(0, 2 * l);
      hss.push_back(make_halfspace(g.run.directions[size_t(d)], b, offset, spec.tau_grid[size_t(l)]));
    }
    g.halfspaces_by_level.push_back(hss);
    g.regions[spec.tau_grid[size_t(l)]] = intersect(hss, bound, spec.tau_grid[size_t(l)]);
  }
  return g;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("missing artifact: " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

int main() {
  Harness h;
  GaussianRun gauss = [] {
    std::printf("running shared Gaussian pipeline (n=5000, D=64, 3 levels)...\n");
    std::fflush(stdout);
    return make_gaussian_run();
  }();

  // ------------------------------------------------------------------ 1
  h.run(1, "Gaussian depth-region oracle", [&]() -> std::string {
    const auto& region = gauss.regions.at(0.2);
    if (region.empty_region) return "FAIL: region empty";
    Contour contour = region_to_contour(region, gauss.response_sds);
    const double target = norm_quantile(0.8);
    double mare = 0.0;
    for (const auto& v : contour.vertices) mare += std::abs(v.norm() - target) / target;
    mare /= double(contour.vertices.size());
    if (mare > 0.06) return fmt("FAIL: vertex radius MARE %.4f > 0.06", mare);
    return fmt("vertex radius MARE %.4f (tolerance 0.06, target radius %.4f)", mare, target);
  });

  // ------------------------------------------------------------------ 2
  h.run(2, "subgradient condition", [&]() -> std::string {
    auto report = subgradient_check(gauss.scaled, gauss.halfspaces_by_level[1]);
    if (report.mean_abs_deviation > 0.02)
      return fmt("FAIL: mean |P(H-) - tau| = %.4f > 0.02", report.mean_abs_deviation);
    return fmt("mean |P(H-) - tau| = %.4f at tau = 0.2 (tolerance 0.02)",
               report.mean_abs_deviation);
  });

  // ------------------------------------------------------------------ 3
  h.run(3, "noncrossing guarantee", [&]() -> std::string {
    GeneratorSpec gen;
    gen.kind = GeneratorKind::LinearHeteroscedastic;
    gen.n = 1000;
    gen.k = 2;
    gen.gamma = 2.0;
    gen.seed = 777;
    GeneratedData data = generate(gen);

    ModelSpec spec;
    for (int i = 1; i <= 19; ++i) spec.tau_grid.push_back(0.05 * i);
    spec.direction_count = 32;
    spec.mcmc = {1200, 240, 3, 777};
    spec.workers = 2;

    ModelInput input;
    input.responses = data.responses;
    input.linear = data.covariates;
    input.linear_names = data.covariate_names;
    input.spline_values = Mat(gen.n, 0);

    RunResult run = run_all(spec, input);
    if (run.failed_count() > 0) return "FAIL: tasks failed";

    CovariateSpace space;
    space.values = data.covariates;
    space.continuous = {0};
    const auto points = check_points(space);
    std::vector<Vec> rows;
    for (const auto& p : points) {
      Vec lin = p;
      rows.push_back(design_row_at(run.layout, run.splines, lin, Vec(0)));
    }

    GpConfig gp;
    double warm = 0.0;
    long crossing_directions = 0;
    double max_bw = 0.0;
    for (int d = 0; d < spec.direction_count; ++d) {
      std::vector<const DrawStore*> fits;
      for (size_t l = 0; l < spec.tau_grid.size(); ++l) fits.push_back(&run.fit(d, int(l)).draws);
      std::vector<InducedQuantileGrid> grids;
      for (const auto& row : rows) grids.push_back(make_induced_grid(fits, spec.tau_grid, row));
      if (raw_crossing(grids)) ++crossing_directions;
      AdjustedQuantiles adj = adjust_direction(grids, gp, warm);  // throws at the ladder cap
      if (!adj.pass_through) {
        warm = adj.bandwidth;
        max_bw = std::max(max_bw, adj.bandwidth);
      }
      // Exact nondecreasing check at every check point over the refined grid.
      for (long pt = 0; pt < adj.adjusted.rows(); ++pt)
        for (long r = 0; r + 1 < adj.adjusted.cols(); ++r)
          if (adj.adjusted(pt, r) > adj.adjusted(pt, r + 1))
            return fmt("FAIL: adjusted quantiles decrease in direction %g", double(d));
    }
    if (crossing_directions == 0) return "FAIL: separate fits never crossed";
    return fmt("%.0f/32 directions crossed and were repaired; max bandwidth %.3f below cap 1e5",
               double(crossing_directions), max_bw);
  });

  // ------------------------------------------------------------------ 4
  h.run(4, "nesting after adjustment", [&]() -> std::string {
    auto report = nesting_check(gauss.regions, 1e-8);
    if (!report.ok())
      return fmt("FAIL: %g nesting violations", double(report.violations.size()));
    return fmt("0 violations over %g adjacent pairs at 1e-8 slack", double(report.pairs_checked));
  });

  // ------------------------------------------------------------------ 5
  h.run(5, "sampler correctness", [&]() -> std::string {
    // (a) Joint-distribution check: alternating Gibbs sweeps and data
    // redraws reproduce prior moments on a 5-observation problem.
    PriorSpec priors;
    priors.coef_precision_shape = 3.0;
    priors.coef_precision_rate = 2.0;
    priors.sigma_shape = 3.0;
    priors.sigma_rate = 2.0;
    const long n = 5;
    const double tau = 0.4;
    const auto mix = mixture_constants(tau);
    Rng xr(31337);
    Mat X(n, 2);
    X.col(0).setOnes();
    for (long i = 0; i < n; ++i) X(i, 1) = draw_uniform(xr);

    const long cycles = 100000;
    std::vector<double> sc_sigma, sc_coef, sc_coefsq, sc_zeta, sc_v;
    {
      GibbsSampler sampler(X, Vec::Zero(n), tau, priors, {}, 808808);
      Rng init(909909);
      GibbsState st;
      st.block_precisions = Vec(1);
      st.block_precisions[0] = draw_gamma(init, 3.0, 2.0);
      st.sigma = draw_inverse_gamma(init, 3.0, 2.0);
      st.coef = Vec(2);
      for (int j = 0; j < 2; ++j) st.coef[j] = draw_normal(init) / std::sqrt(st.block_precisions[0]);
      st.latent_v = Vec(n);
      for (long i = 0; i < n; ++i) st.latent_v[i] = draw_exponential_mean(init, st.sigma);
      sampler.state() = st;
      for (long c = 0; c < cycles; ++c) {
        Vec y(n);
        for (long i = 0; i < n; ++i) {
          const double eta = X.row(i).dot(sampler.state().coef);
          y[i] = eta + mix.theta * sampler.state().latent_v[i] +
                 std::sqrt(mix.psi2 * sampler.state().sigma * sampler.state().latent_v[i]) *
                     draw_normal(sampler.rng());
        }
        sampler.set_response(y);
        sampler.step();
        sc_sigma.push_back(sampler.state().sigma);
        sc_coef.push_back(sampler.state().coef[0]);
        sc_coefsq.push_back(sampler.state().coef[0] * sampler.state().coef[0]);
        sc_zeta.push_back(sampler.state().block_precisions[0]);
        sc_v.push_back(sampler.state().latent_v.mean());
      }
    }
    std::vector<double> mc_sigma, mc_coef, mc_coefsq, mc_zeta, mc_v;
    Rng prior_rng(707707);
    for (long c = 0; c < cycles; ++c) {
      const double zeta = draw_gamma(prior_rng, 3.0, 2.0);
      const double sigma = draw_inverse_gamma(prior_rng, 3.0, 2.0);
      const double coef = draw_normal(prior_rng) / std::sqrt(zeta);
      double vbar = 0.0;
      for (long i = 0; i < n; ++i) vbar += draw_exponential_mean(prior_rng, sigma);
      mc_sigma.push_back(sigma);
      mc_coef.push_back(coef);
      mc_coefsq.push_back(coef * coef);
      mc_zeta.push_back(zeta);
      mc_v.push_back(vbar / double(n));
    }
    auto zstat = [](const std::vector<double>& a, const std::vector<double>& b) {
      const double se_a = oracles::batch_means_se(a, 100);
      const double se_b = oracles::batch_means_se(b, 100);
      return std::abs(oracles::mean_of(a) - oracles::mean_of(b)) /
             std::sqrt(se_a * se_a + se_b * se_b);
    };
    double worst_z = 0.0;
    for (auto pair : {std::make_pair(&sc_sigma, &mc_sigma), {&sc_coef, &mc_coef},
                      {&sc_coefsq, &mc_coefsq}, {&sc_zeta, &mc_zeta}, {&sc_v, &mc_v}})
      worst_z = std::max(worst_z, zstat(*pair.first, *pair.second));
    if (worst_z >= 4.0) return fmt("FAIL: joint-distribution |z| = %.2f >= 4", worst_z);

    // (b) Posterior means against the check-loss minimizer.
    Rng dr(515151);
    const long m = 2000;
    Mat Xl(m, 2);
    Vec yl(m);
    for (long i = 0; i < m; ++i) {
      Xl(i, 0) = 1.0;
      Xl(i, 1) = draw_uniform(dr);
      yl[i] = 1.0 + 2.0 * Xl(i, 1) + draw_normal(dr);
    }
    double worst_ratio = 0.0;
    for (double t : {0.25, 0.5, 0.75}) {
      Vec ref = oracles::checkloss_minimizer(Xl, yl, t, 120000);
      auto store = gibbs_run(Xl, yl, t, PriorSpec{}, {}, McmcSettings{3000, 600, 3, 99});
      for (int j = 0; j < 2; ++j) {
        const double mean = store.coef.col(j).mean();
        const double sd = std::sqrt((store.coef.col(j).array() - mean).square().sum() /
                                    double(store.draws() - 1));
        worst_ratio = std::max(worst_ratio, std::abs(mean - ref[j]) / (3.0 * sd));
      }
    }
    if (worst_ratio > 1.0)
      return fmt("FAIL: posterior mean %.2f times the 3-SD budget from the minimizer",
                 worst_ratio);
    return fmt("joint check worst |z| = %.2f (< 4); minimizer gap at %.0f%% of the 3-SD budget",
               worst_z, 100.0 * worst_ratio);
  });

  // ------------------------------------------------------------------ 6
  h.run(6, "GP algebra against dense solves", [&]() -> std::string {
    GpConfig cfg;
    Rng rng(606060);
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
      const int L = 2 + int(draw_uniform(rng) * 9);
      std::vector<double> taus;
      for (int l = 0; l < L; ++l) taus.push_back(0.05 + 0.9 * double(l + 1) / double(L + 1));
      Vec means(L), vars(L);
      for (int l = 0; l < L; ++l) {
        means[l] = 3.0 * draw_normal(rng);
        vars[l] = 0.01 + draw_uniform(rng);
      }
      const double b = 0.05 + 2.0 * draw_uniform(rng);
      const double p = taus.front() + (taus.back() - taus.front()) * draw_uniform(rng);
      auto pred = gp_predict(taus, means, vars, cfg, p, b);
      Mat A(L, L);
      Vec kp(L);
      for (int i = 0; i < L; ++i) {
        for (int j = 0; j < L; ++j) {
          const double d = taus[size_t(i)] - taus[size_t(j)];
          A(i, j) = cfg.sigma2_k * std::exp(-d * d / (2.0 * b * b));
        }
        const double d = taus[size_t(i)] - p;
        kp[i] = cfg.sigma2_k * std::exp(-d * d / (2.0 * b * b));
        A(i, i) += vars[i] + cfg.jitter;
      }
      Vec w = oracles::gauss_solve(A, kp);
      worst = std::max(worst, std::abs(pred.mean - w.dot(means)));
    }
    if (worst > 1e-10) return fmt("FAIL: worst dense-solve gap %.2e > 1e-10", worst);

    // Small-bandwidth limit with zero noise reproduces grid entries.
    std::vector<double> taus{0.2, 0.5, 0.8};
    Vec means(3), vars(3);
    means << -1.0, 0.4, 2.0;
    vars.setZero();
    double worst_limit = 0.0;
    for (size_t l = 0; l < taus.size(); ++l)
      worst_limit = std::max(worst_limit,
                             std::abs(gp_predict(taus, means, vars, cfg, taus[l], 1e-8).mean -
                                      means[long(l)]));
    if (worst_limit > 1e-6) return fmt("FAIL: b->0 limit off by %.2e > 1e-6", worst_limit);
    return fmt("worst dense-solve gap %.2e (1e-10); b->0 limit gap %.2e (1e-6)", worst,
               worst_limit);
  });

  // ------------------------------------------------------------------ 7
  h.run(7, "geometry oracles", [&]() -> std::string {
    Rng rng(70707);
    double worst_rel = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
      const int D = 6 + int(draw_uniform(rng) * 10);
      std::vector<Halfspace> hss;
      for (int j = 0; j < D; ++j) {
        const double ang = 2.0 * M_PI * (j + 0.3 * (draw_uniform(rng) - 0.5)) / D;
        Halfspace hsp;
        hsp.normal = Vec(2);
        hsp.normal << std::cos(ang), std::sin(ang);
        hsp.offset = -0.5 - draw_uniform(rng);
        hss.push_back(hsp);
      }
      auto region = intersect(hss, 100.0);
      if (region.empty_region) return "FAIL: random feasible set came out empty";
      Vec lo = region.vertices.front(), hi = region.vertices.front();
      for (const auto& v : region.vertices) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
      }
      lo.array() -= 0.05;
      hi.array() += 0.05;
      auto inside = [&](const Vec& p) {
        for (const auto& hsp : hss)
          if (hsp.slack(p) < 0.0) return false;
        return true;
      };
      const double mc = oracles::mc_region_measure(inside, lo, hi, 400000, 1000 + rep);
      const double area = polygon_area(region.vertices);
      worst_rel = std::max(worst_rel, std::abs(mc - area) / area);
    }
    if (worst_rel > 0.02) return fmt("FAIL: worst MC area gap %.3f > 0.02", worst_rel);

    // Partition of unity on 1e4 interior points.
    Vec z(10000);
    for (long i = 0; i < z.size(); ++i) z[i] = -2.0 + 7.0 * double(i) / double(z.size() - 1);
    auto basis = bspline_basis(z, 3, 20, {-2.0, 5.0});
    double worst_pu = 0.0;
    for (long i = 0; i < z.size(); ++i)
      worst_pu = std::max(worst_pu, std::abs(basis.basis.row(i).sum() - 1.0));
    if (worst_pu > 1e-10) return fmt("FAIL: partition of unity off by %.2e", worst_pu);

    // RW2 null space exactly.
    for (int K : {3, 10, 22}) {
      Mat pen = rw2_penalty(K);
      Vec ones = Vec::Ones(K), ramp(K);
      for (int i = 0; i < K; ++i) ramp[i] = double(i + 1);
      if ((pen * ones).cwiseAbs().maxCoeff() != 0.0 || (pen * ramp).cwiseAbs().maxCoeff() != 0.0)
        return "FAIL: RW2 null space not exact";
    }
    return fmt("worst MC area gap %.3f (0.02); partition of unity %.1e (1e-10); RW2 exact",
               worst_rel, worst_pu);
  });

  // ------------------------------------------------------------------ 8
  h.run(8, "reproducibility across worker counts", [&]() -> std::string {
    const fs::path base = fs::temp_directory_path() / "dqr_acceptance_repro";
    fs::remove_all(base);
    auto run_with_workers = [&](int workers, const std::string& name) {
      RunConfig cfg;
      cfg.out_dir = (base / name).string();
      cfg.input_path = cfg.out_dir + "/data.csv";
      cfg.responses = {"y1", "y2"};
      cfg.taus = {0.2, 0.35};
      cfg.directions = 12;
      cfg.mcmc = {500, 100, 2, 1};
      cfg.mcmc_preset = "custom";
      cfg.seed = 2024;
      cfg.workers = workers;
      cfg.sim.kind = "spherical-gaussian";
      cfg.sim.n = 500;
      cfg.sim.k = 2;
      cmd_simulate(cfg);
      cmd_fit(cfg);
      cmd_adjust(cfg);
      cmd_contour(cfg);
      return cfg.out_dir;
    };
    const std::string a = run_with_workers(1, "w1");
    const std::string b = run_with_workers(8, "w8");
    if (slurp(a + "/summary.csv") != slurp(b + "/summary.csv"))
      return "FAIL: summary.csv differs between 1 and 8 workers";
    for (int l = 0; l < 2; ++l) {
      const std::string name = "/contour/tau" + std::to_string(l) + "_point0.json";
      if (slurp(a + name) != slurp(b + name))
        return "FAIL: contour artifact differs between 1 and 8 workers";
    }
    fs::remove_all(base);
    return "summary.csv and contour JSON byte-identical for 1 and 8 workers";
  });

  if (h.failures > 0) {
    std::printf("%d criterion(s) failed\n", h.failures);
    return 1;
  }
  std::printf("all acceptance criteria passed\n");
  return 0;
}

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "dqr/dqr.hpp"

using namespace dqr;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("dqr_pipe_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

RunConfig small_gaussian_config(const TempDir& tmp) {
  RunConfig cfg;
  cfg.out_dir = tmp.file("run");
  cfg.input_path = tmp.file("run/data.csv");
  cfg.responses = {"y1", "y2"};
  cfg.taus = {0.2, 0.4};
  cfg.directions = 16;
  cfg.mcmc = {800, 200, 3, 1};
  cfg.mcmc_preset = "custom";
  cfg.seed = 404;
  cfg.workers = 2;
  cfg.sim.kind = "spherical-gaussian";
  cfg.sim.n = 800;
  cfg.sim.k = 2;
  return cfg;
}

}  // namespace

TEST_CASE("full pipeline produces all artifact sets and a passing check") {
  TempDir tmp("full");
  RunConfig cfg = small_gaussian_config(tmp);

  cmd_simulate(cfg);
  CHECK(fs::exists(cfg.out_dir + "/data.csv"));
  CHECK(fs::exists(cfg.out_dir + "/simulate.json"));

  cmd_fit(cfg);
  CHECK(fs::exists(cfg.out_dir + "/spec.json"));
  CHECK(fs::exists(cfg.out_dir + "/summary.csv"));
  CHECK(fs::exists(cfg.out_dir + "/fits/u0_tau0.csv"));
  CHECK(fs::exists(cfg.out_dir + "/fits/u15_tau1.bin"));
  {
    std::ifstream in(cfg.out_dir + "/failures.json");
    json failures;
    in >> failures;
    CHECK(failures.empty());
  }

  cmd_adjust(cfg);
  CHECK(fs::exists(cfg.out_dir + "/adjust/u0.csv"));
  CHECK(fs::exists(cfg.out_dir + "/adjust/bandwidths.csv"));
  CHECK(fs::exists(cfg.out_dir + "/adjust/check_points.csv"));

  cmd_contour(cfg);
  CHECK(fs::exists(cfg.out_dir + "/contour/tau0_point0.json"));
  CHECK(fs::exists(cfg.out_dir + "/contour/tau1_point0.json"));
  CHECK(fs::exists(cfg.out_dir + "/contour/point0.svg"));

  cmd_check(cfg);
  CHECK(fs::exists(cfg.out_dir + "/check/subgradient.csv"));
  CHECK(fs::exists(cfg.out_dir + "/check/subgradient_summary.csv"));
  {
    std::ifstream in(cfg.out_dir + "/check/nesting.json");
    json nesting;
    in >> nesting;
    CHECK(nesting["ok"] == true);
  }

  // Contours are convex rings around the origin with the inner level inside
  // the outer one (tau 0.4 region inside tau 0.2 region).
  std::ifstream in0(cfg.out_dir + "/contour/tau0_point0.json");
  json outer;
  in0 >> outer;
  std::ifstream in1(cfg.out_dir + "/contour/tau1_point0.json");
  json inner;
  in1 >> inner;
  CHECK(outer["empty"] == false);
  CHECK(inner["empty"] == false);
  auto mean_radius = [](const json& contour) {
    double acc = 0.0;
    for (const auto& v : contour["vertices"])
      acc += std::hypot(v[0].get<double>(), v[1].get<double>());
    return acc / double(contour["vertices"].size());
  };
  CHECK(mean_radius(inner) < mean_radius(outer));
}

TEST_CASE("stage order violations name the missing artifact") {
  TempDir tmp("order");
  RunConfig cfg = small_gaussian_config(tmp);
  try {
    cmd_contour(cfg);
    FAIL("expected InvalidStateError");
  } catch (const InvalidStateError& e) {
    CHECK(std::string(e.what()).find("spec.json") != std::string::npos);
  }
  CHECK_THROWS_AS(cmd_adjust(cfg), InvalidStateError);
  CHECK_THROWS_AS(cmd_check(cfg), InvalidStateError);
}

TEST_CASE("refitting with the same seed is byte-identical") {
  TempDir tmp("deterministic");
  RunConfig cfg = small_gaussian_config(tmp);
  cfg.directions = 6;
  cfg.sim.n = 300;
  cfg.mcmc = {400, 100, 2, 1};
  cmd_simulate(cfg);

  cmd_fit(cfg);
  const std::string first = slurp(cfg.out_dir + "/summary.csv");
  cmd_fit(cfg);
  const std::string second = slurp(cfg.out_dir + "/summary.csv");
  CHECK(first == second);
}

TEST_CASE("cli binary drives the stages and reports errors") {
  TempDir tmp("cli");
  const std::string bin = DQR_CLI_PATH;
  const std::string out = tmp.file("run");

  {
    std::ofstream ini(tmp.file("run.ini"));
    ini << "[data]\ninput = " << out << "/data.csv\nresponses = y1, y2\n"
        << "[model]\ntaus = 0.25, 0.5\ndirections = 8\n"
        << "[mcmc]\niterations = 300\nburn_in = 100\nthin = 2\nseed = 9\nworkers = 2\n"
        << "[simulate]\nkind = spherical-gaussian\nn = 200\nk = 2\n";
  }
  const std::string base = bin + " --config " + tmp.file("run.ini") + " --out " + out;
  // Subcommand syntax: dqr <stage> --config ... --out ...
  auto run_stage = [&](const std::string& stage) {
    const std::string cmd = bin + " " + stage + " --config " + tmp.file("run.ini") + " --out " +
                            out + " >/dev/null 2>" + tmp.file(stage + ".err");
    return std::system(cmd.c_str());
  };
  (void)base;

  // Contour before fit must fail with a machine-readable report.
  CHECK(run_stage("contour") != 0);
  CHECK(fs::exists(out + "/error.json"));
  {
    std::ifstream in(out + "/error.json");
    json err;
    in >> err;
    CHECK(err["type"] == "invalid-state");
    CHECK(err["stage"] == "contour");
  }

  CHECK(run_stage("simulate") == 0);
  CHECK(run_stage("fit") == 0);
  CHECK(run_stage("adjust") == 0);
  CHECK(run_stage("contour") == 0);
  CHECK(run_stage("check") == 0);
  CHECK(fs::exists(out + "/check/nesting.json"));
}

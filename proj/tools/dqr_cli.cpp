// Batch front door: simulate | fit | adjust | contour | check.
#include <CLI11.hpp>

#include "dqr/dqr.hpp"

namespace {

struct CliOptions {
  std::string config_path;
  std::string input;
  std::string out;
  std::string taus;
  long seed = -1;
  int workers = 0;
  int directions = 0;
};

void add_common_flags(CLI::App* cmd, CliOptions& opt) {
  cmd->add_option("--config", opt.config_path, "declarative config file");
  cmd->add_option("--out", opt.out, "run directory");
  cmd->add_option("--input", opt.input, "input CSV (overrides config)");
  cmd->add_option("--seed", opt.seed, "base seed (overrides config)");
  cmd->add_option("--workers", opt.workers, "worker threads (overrides config)");
  cmd->add_option("--tau", opt.taus, "comma-separated quantile levels (overrides config)");
  cmd->add_option("--directions", opt.directions, "direction count (overrides config)");
}

dqr::RunConfig build_config(const CliOptions& opt) {
  dqr::RunConfig cfg;
  if (!opt.config_path.empty()) cfg = dqr::load_config(opt.config_path);
  if (!opt.out.empty()) cfg.out_dir = opt.out;
  if (!opt.input.empty()) cfg.input_path = opt.input;
  if (opt.seed >= 0) cfg.seed = std::uint64_t(opt.seed);
  if (opt.workers > 0) cfg.workers = opt.workers;
  if (!opt.taus.empty()) dqr::apply_config_key(cfg, "model.taus", opt.taus);
  if (opt.directions > 0) cfg.directions = opt.directions;
  return cfg;
}

std::string error_type_of(const std::exception& e) {
  if (dynamic_cast<const dqr::DivergedChainError*>(&e)) return "diverged-chain";
  if (dynamic_cast<const dqr::NumericalFailureError*>(&e)) return "numerical-failure";
  if (dynamic_cast<const dqr::AdjustmentFailureError*>(&e)) return "adjustment-failure";
  if (dynamic_cast<const dqr::InvalidStateError*>(&e)) return "invalid-state";
  if (dynamic_cast<const dqr::IngestError*>(&e)) return "ingestion-error";
  if (dynamic_cast<const std::invalid_argument*>(&e)) return "invalid-argument";
  return "error";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"directional multiple-output Bayesian quantile regression"};
  app.require_subcommand(1);

  CliOptions opt;
  std::string stage;
  for (const char* name : {"simulate", "fit", "adjust", "contour", "check"}) {
    auto* sub = app.add_subcommand(name, std::string(name) + " stage");
    add_common_flags(sub, opt);
    sub->callback([&stage, name]() { stage = name; });
  }
  CLI11_PARSE(app, argc, argv);

  dqr::RunConfig cfg;
  try {
    cfg = build_config(opt);
    const bool cli_presentation = !opt.config_path.empty();
    if (stage == "simulate") dqr::cmd_simulate(cfg);
    else if (stage == "fit") dqr::cmd_fit(cfg);
    else if (stage == "adjust") dqr::cmd_adjust(cfg);
    else if (stage == "contour") dqr::cmd_contour(cfg, cli_presentation);
    else if (stage == "check") dqr::cmd_check(cfg, cli_presentation);
    return 0;
  } catch (const std::exception& e) {
    dqr::json report;
    report["stage"] = stage;
    report["type"] = error_type_of(e);
    report["message"] = e.what();
    if (auto* div = dynamic_cast<const dqr::DivergedChainError*>(&e))
      report["iteration"] = div->iteration;
    if (auto* ing = dynamic_cast<const dqr::IngestError*>(&e)) {
      report["row"] = ing->row;
      report["column"] = ing->column;
    }
    std::cerr << report.dump(2) << "\n";
    try {
      if (!cfg.out_dir.empty()) dqr::write_json(cfg.out_dir + "/error.json", report);
    } catch (...) {
    }
    return 1;
  }
}

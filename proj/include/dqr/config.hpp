#ifndef DQR_CONFIG_HPP
#define DQR_CONFIG_HPP

#include "dqr/io.hpp"
#include "dqr/synthetic.hpp"

namespace dqr {

struct CategoricalSpec {
  std::string column;
  std::string reference;
};

struct SimulateConfig {
  std::string kind = "spherical-gaussian";
  long n = 1000;
  int k = 2;
  double beta0 = 1.0;
  double beta1 = 2.0;
  double gamma = 2.0;
  Mat cov_factor;  // elliptical only; identity when empty

  GeneratorSpec to_generator(std::uint64_t seed) const {
    GeneratorSpec g;
    g.kind = generator_kind_from_string(kind);
    g.n = n;
    g.k = k;
    g.cov_factor = cov_factor;
    g.beta0 = beta0;
    g.beta1 = beta1;
    g.gamma = gamma;
    g.seed = seed;
    return g;
  }
};

/// Fully resolved run configuration. One declarative file configures every
/// stage; command-line flags override individual keys.
struct RunConfig {
  std::string input_path;
  std::string out_dir = "dqr_out";
  std::vector<std::string> responses;
  std::vector<std::string> linear;
  std::vector<CategoricalSpec> categoricals;
  std::vector<SplineSettings> splines;
  std::vector<double> taus{0.1, 0.2, 0.3};
  int directions = 64;
  bool scale_responses = true;
  PriorSpec priors;
  std::string mcmc_preset = "small";
  McmcSettings mcmc = McmcSettings::preset_small();
  std::uint64_t seed = 1;
  int workers = 1;
  GpConfig gp;
  std::vector<std::string> contour_points;  // "name=value,name=value" specs
  bool svg = true;
  SimulateConfig sim;

  ModelSpec to_model_spec() const {
    ModelSpec spec;
    spec.tau_grid = taus;
    spec.direction_count = directions;
    spec.priors = priors;
    spec.mcmc = mcmc;
    spec.mcmc.seed = seed;
    spec.scale_responses = scale_responses;
    spec.workers = workers;
    return spec;
  }
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("");
    return x;
  } catch (...) {
    throw std::invalid_argument("config: key '" + key + "' expects a number, got '" + v + "'");
  }
}

inline long parse_long(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const long x = std::stol(v, &used);
    if (used != v.size()) throw std::invalid_argument("");
    return x;
  } catch (...) {
    throw std::invalid_argument("config: key '" + key + "' expects an integer, got '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument("config: key '" + key + "' expects a boolean, got '" + v + "'");
}

inline Mat parse_matrix(const std::string& key, const std::string& v) {
  auto rows = split_list(v, ';');
  if (rows.empty()) return Mat();
  Mat m;
  for (size_t r = 0; r < rows.size(); ++r) {
    auto cells = split_list(rows[r], ',');
    if (r == 0) m.resize(long(rows.size()), long(cells.size()));
    if (long(cells.size()) != m.cols())
      throw std::invalid_argument("config: ragged matrix for key '" + key + "'");
    for (size_t c = 0; c < cells.size(); ++c) m(long(r), long(c)) = parse_double(key, cells[c]);
  }
  return m;
}

}  // namespace detail

/// Apply one "section.key" assignment. Unknown keys are errors so typos do
/// not silently fall back to defaults.
inline void apply_config_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  using namespace detail;
  // Spline term attributes: model.spline.<var>.<attr>
  if (key.rfind("model.spline.", 0) == 0) {
    const std::string rest = key.substr(13);
    const size_t dot = rest.rfind('.');
    if (dot == std::string::npos)
      throw std::invalid_argument("config: malformed spline key '" + key + "'");
    const std::string var = rest.substr(0, dot);
    const std::string attr = rest.substr(dot + 1);
    for (auto& s : cfg.splines) {
      if (s.variable != var) continue;
      if (attr == "degree") {
        s.degree = int(parse_long(key, value));
      } else if (attr == "knots") {
        s.n_knots = int(parse_long(key, value));
      } else if (attr == "range") {
        auto parts = split_list(value);
        if (parts.size() != 2) throw std::invalid_argument("config: spline range needs two values");
        s.range = {parse_double(key, parts[0]), parse_double(key, parts[1])};
      } else {
        throw std::invalid_argument("config: unknown spline attribute '" + attr + "'");
      }
      return;
    }
    throw std::invalid_argument("config: spline key '" + key + "' names a variable not in model.splines");
  }

  if (key == "data.input") cfg.input_path = value;
  else if (key == "data.responses") cfg.responses = split_list(value);
  else if (key == "model.linear") cfg.linear = split_list(value);
  else if (key == "model.categorical") {
    cfg.categoricals.clear();
    for (const auto& item : split_list(value)) {
      const size_t colon = item.find(':');
      if (colon == std::string::npos)
        throw std::invalid_argument("config: categorical entries use name:reference, got '" +
                                    item + "'");
      cfg.categoricals.push_back({trim(item.substr(0, colon)), trim(item.substr(colon + 1))});
    }
  } else if (key == "model.splines") {
    cfg.splines.clear();
    for (const auto& var : split_list(value)) {
      SplineSettings s;
      s.variable = var;
      cfg.splines.push_back(s);
    }
  } else if (key == "model.taus") {
    cfg.taus.clear();
    for (const auto& t : split_list(value)) cfg.taus.push_back(parse_double(key, t));
  } else if (key == "model.directions") cfg.directions = int(parse_long(key, value));
  else if (key == "model.scale_responses") cfg.scale_responses = parse_bool(key, value);
  else if (key == "mcmc.preset") {
    if (value == "small") cfg.mcmc = McmcSettings::preset_small();
    else if (value == "large") cfg.mcmc = McmcSettings::preset_large();
    else throw std::invalid_argument("config: mcmc.preset must be 'small' or 'large'");
    cfg.mcmc_preset = value;
  } else if (key == "mcmc.iterations") {
    cfg.mcmc.iterations = parse_long(key, value);
    cfg.mcmc_preset = "custom";
  } else if (key == "mcmc.burn_in") {
    cfg.mcmc.burn_in = parse_long(key, value);
    cfg.mcmc_preset = "custom";
  } else if (key == "mcmc.thin") {
    cfg.mcmc.thin = parse_long(key, value);
    cfg.mcmc_preset = "custom";
  } else if (key == "mcmc.seed") cfg.seed = std::uint64_t(parse_long(key, value));
  else if (key == "mcmc.workers") cfg.workers = int(parse_long(key, value));
  else if (key == "priors.coef_shape") cfg.priors.coef_precision_shape = parse_double(key, value);
  else if (key == "priors.coef_rate") cfg.priors.coef_precision_rate = parse_double(key, value);
  else if (key == "priors.sigma_shape") cfg.priors.sigma_shape = parse_double(key, value);
  else if (key == "priors.sigma_rate") cfg.priors.sigma_rate = parse_double(key, value);
  else if (key == "priors.rw2_shape") cfg.priors.rw2_shape = parse_double(key, value);
  else if (key == "priors.rw2_rate") cfg.priors.rw2_rate = parse_double(key, value);
  else if (key == "gp.sigma2_k") cfg.gp.sigma2_k = parse_double(key, value);
  else if (key == "gp.jitter") cfg.gp.jitter = parse_double(key, value);
  else if (key == "gp.bandwidth_floor") cfg.gp.bandwidth = parse_double(key, value);
  else if (key == "gp.ladder_factor") cfg.gp.ladder_factor = parse_double(key, value);
  else if (key == "gp.ladder_cap") cfg.gp.ladder_cap = parse_double(key, value);
  else if (key == "contour.points") cfg.contour_points = split_list(value, ';');
  else if (key == "contour.svg") cfg.svg = parse_bool(key, value);
  else if (key == "simulate.kind") cfg.sim.kind = value;
  else if (key == "simulate.n") cfg.sim.n = parse_long(key, value);
  else if (key == "simulate.k") cfg.sim.k = int(parse_long(key, value));
  else if (key == "simulate.beta0") cfg.sim.beta0 = parse_double(key, value);
  else if (key == "simulate.beta1") cfg.sim.beta1 = parse_double(key, value);
  else if (key == "simulate.gamma") cfg.sim.gamma = parse_double(key, value);
  else if (key == "simulate.cov") cfg.sim.cov_factor = parse_matrix(key, value);
  else if (key == "output.dir") cfg.out_dir = value;
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

/// Parse the declarative key/value file with [section] headers and '#'
/// comments.
inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  RunConfig cfg;
  std::string line, section;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::invalid_argument("config: bad section header at line " +
                                    std::to_string(lineno));
      section = detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: expected key = value at line " +
                                  std::to_string(lineno));
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    apply_config_key(cfg, section.empty() ? key : section + "." + key, value);
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Echo: every run writes its fully resolved configuration, and later stages
// reload it so a run directory is self-describing.

inline json config_to_json(const RunConfig& cfg) {
  json j;
  j["data"]["input"] = cfg.input_path;
  j["data"]["responses"] = cfg.responses;
  j["model"]["linear"] = cfg.linear;
  json cats = json::array();
  for (const auto& c : cfg.categoricals) cats.push_back({{"column", c.column}, {"reference", c.reference}});
  j["model"]["categorical"] = cats;
  json splines = json::array();
  for (const auto& s : cfg.splines)
    splines.push_back({{"variable", s.variable},
                       {"degree", s.degree},
                       {"knots", s.n_knots},
                       {"range", {s.range.first, s.range.second}}});
  j["model"]["splines"] = splines;
  j["model"]["taus"] = cfg.taus;
  j["model"]["directions"] = cfg.directions;
  j["model"]["scale_responses"] = cfg.scale_responses;
  j["mcmc"]["preset"] = cfg.mcmc_preset;
  j["mcmc"]["iterations"] = cfg.mcmc.iterations;
  j["mcmc"]["burn_in"] = cfg.mcmc.burn_in;
  j["mcmc"]["thin"] = cfg.mcmc.thin;
  j["mcmc"]["seed"] = cfg.seed;
  j["mcmc"]["workers"] = cfg.workers;
  j["priors"]["coef_shape"] = cfg.priors.coef_precision_shape;
  j["priors"]["coef_rate"] = cfg.priors.coef_precision_rate;
  j["priors"]["sigma_shape"] = cfg.priors.sigma_shape;
  j["priors"]["sigma_rate"] = cfg.priors.sigma_rate;
  j["priors"]["rw2_shape"] = cfg.priors.rw2_shape;
  j["priors"]["rw2_rate"] = cfg.priors.rw2_rate;
  j["gp"]["sigma2_k"] = cfg.gp.sigma2_k;
  j["gp"]["jitter"] = cfg.gp.jitter;
  j["gp"]["bandwidth_floor"] = cfg.gp.bandwidth;
  j["gp"]["ladder_factor"] = cfg.gp.ladder_factor;
  j["gp"]["ladder_cap"] = cfg.gp.ladder_cap;
  j["contour"]["points"] = cfg.contour_points;
  j["contour"]["svg"] = cfg.svg;
  j["simulate"]["kind"] = cfg.sim.kind;
  j["simulate"]["n"] = cfg.sim.n;
  j["simulate"]["k"] = cfg.sim.k;
  j["simulate"]["beta0"] = cfg.sim.beta0;
  j["simulate"]["beta1"] = cfg.sim.beta1;
  j["simulate"]["gamma"] = cfg.sim.gamma;
  if (cfg.sim.cov_factor.size() > 0) {
    json rows = json::array();
    for (long r = 0; r < cfg.sim.cov_factor.rows(); ++r) {
      json row = json::array();
      for (long c = 0; c < cfg.sim.cov_factor.cols(); ++c) row.push_back(cfg.sim.cov_factor(r, c));
      rows.push_back(row);
    }
    j["simulate"]["cov"] = rows;
  }
  j["output"]["dir"] = cfg.out_dir;
  return j;
}

inline RunConfig config_from_json(const json& j) {
  RunConfig cfg;
  cfg.input_path = j["data"]["input"].get<std::string>();
  cfg.responses = j["data"]["responses"].get<std::vector<std::string>>();
  cfg.linear = j["model"]["linear"].get<std::vector<std::string>>();
  cfg.categoricals.clear();
  for (const auto& c : j["model"]["categorical"])
    cfg.categoricals.push_back({c["column"].get<std::string>(), c["reference"].get<std::string>()});
  cfg.splines.clear();
  for (const auto& s : j["model"]["splines"]) {
    SplineSettings sp;
    sp.variable = s["variable"].get<std::string>();
    sp.degree = s["degree"].get<int>();
    sp.n_knots = s["knots"].get<int>();
    sp.range = {s["range"][0].get<double>(), s["range"][1].get<double>()};
    cfg.splines.push_back(sp);
  }
  cfg.taus = j["model"]["taus"].get<std::vector<double>>();
  cfg.directions = j["model"]["directions"].get<int>();
  cfg.scale_responses = j["model"]["scale_responses"].get<bool>();
  cfg.mcmc_preset = j["mcmc"]["preset"].get<std::string>();
  cfg.mcmc.iterations = j["mcmc"]["iterations"].get<long>();
  cfg.mcmc.burn_in = j["mcmc"]["burn_in"].get<long>();
  cfg.mcmc.thin = j["mcmc"]["thin"].get<long>();
  cfg.seed = j["mcmc"]["seed"].get<std::uint64_t>();
  cfg.workers = j["mcmc"]["workers"].get<int>();
  cfg.priors.coef_precision_shape = j["priors"]["coef_shape"].get<double>();
  cfg.priors.coef_precision_rate = j["priors"]["coef_rate"].get<double>();
  cfg.priors.sigma_shape = j["priors"]["sigma_shape"].get<double>();
  cfg.priors.sigma_rate = j["priors"]["sigma_rate"].get<double>();
  cfg.priors.rw2_shape = j["priors"]["rw2_shape"].get<double>();
  cfg.priors.rw2_rate = j["priors"]["rw2_rate"].get<double>();
  cfg.gp.sigma2_k = j["gp"]["sigma2_k"].get<double>();
  cfg.gp.jitter = j["gp"]["jitter"].get<double>();
  cfg.gp.bandwidth = j["gp"]["bandwidth_floor"].get<double>();
  cfg.gp.ladder_factor = j["gp"]["ladder_factor"].get<double>();
  cfg.gp.ladder_cap = j["gp"]["ladder_cap"].get<double>();
  cfg.contour_points = j["contour"]["points"].get<std::vector<std::string>>();
  cfg.svg = j["contour"]["svg"].get<bool>();
  cfg.sim.kind = j["simulate"]["kind"].get<std::string>();
  cfg.sim.n = j["simulate"]["n"].get<long>();
  cfg.sim.k = j["simulate"]["k"].get<int>();
  cfg.sim.beta0 = j["simulate"]["beta0"].get<double>();
  cfg.sim.beta1 = j["simulate"]["beta1"].get<double>();
  cfg.sim.gamma = j["simulate"]["gamma"].get<double>();
  if (j["simulate"].contains("cov")) {
    const auto& rows = j["simulate"]["cov"];
    cfg.sim.cov_factor.resize(long(rows.size()), long(rows[0].size()));
    for (size_t r = 0; r < rows.size(); ++r)
      for (size_t c = 0; c < rows[r].size(); ++c)
        cfg.sim.cov_factor(long(r), long(c)) = rows[r][c].get<double>();
  }
  cfg.out_dir = j["output"]["dir"].get<std::string>();
  return cfg;
}

}  // namespace dqr

#endif  // DQR_CONFIG_HPP

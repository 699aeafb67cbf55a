#ifndef DQR_INGEST_HPP
#define DQR_INGEST_HPP

#include <map>

#include "dqr/config.hpp"

namespace dqr {

struct CategoricalInfo {
  std::string column;
  std::string reference;
  std::vector<std::string> levels;   // reference first, then dummy order
  int first_dummy = -1;              // column into the linear block
  int n_dummies = 0;
};

/// Typed model data derived from a CSV table against the declared schema.
/// The linear block is [numeric covariates | category dummies], followed in
/// the covariate space by the spline inputs.
struct IngestedData {
  ModelInput input;
  std::vector<std::string> numeric_linear;
  std::vector<CategoricalInfo> categoricals;
  std::vector<std::string> spline_vars;
  CovariateSpace space;                  // linear block + spline inputs
  std::vector<std::string> point_names;  // names of covariate-space coordinates
};

/// A covariate point split the way the design wants it.
struct CovariatePoint {
  Vec linear;         // numeric + dummies, design order
  Vec spline_inputs;  // raw spline variable values
  Vec full;           // concatenation, covariate-space order
};

namespace detail {

inline bool all_numeric(const std::vector<std::string>& values) {
  for (const auto& v : values) {
    try {
      size_t used = 0;
      std::stod(v, &used);
      if (used != v.size()) return false;
    } catch (...) {
      return false;
    }
  }
  return true;
}

}  // namespace detail

inline IngestedData ingest_table(const DataTable& table, const RunConfig& cfg) {
  if (cfg.responses.size() < 2)
    throw std::invalid_argument("ingest: at least two response columns are required");
  IngestedData out;
  const long n = table.rows();
  if (n == 0) throw IngestError("ingest: no data rows");

  out.input.responses = Mat(n, long(cfg.responses.size()));
  for (size_t j = 0; j < cfg.responses.size(); ++j)
    out.input.responses.col(long(j)) = numeric_column(table, cfg.responses[j]);

  // Numeric linear covariates in config order.
  std::vector<Vec> linear_cols;
  std::vector<std::string> linear_names;
  for (const auto& name : cfg.linear) {
    linear_cols.push_back(numeric_column(table, name));
    linear_names.push_back(name);
    out.numeric_linear.push_back(name);
  }

  // Categorical columns expand to reference-coded dummies named
  // column+level, e.g. edu2, edu3, edu4 against reference level 1.
  for (const auto& cat : cfg.categoricals) {
    const int j = table.column_index(cat.column);
    if (j < 0) throw IngestError("column '" + cat.column + "' not found in header", -1, cat.column);
    std::vector<std::string> raw(size_t(n), std::string{});
    for (long i = 0; i < n; ++i) raw[size_t(i)] = detail::trim(table.cells[size_t(i)][size_t(j)]);
    std::vector<std::string> levels = raw;
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    if (detail::all_numeric(levels))
      std::sort(levels.begin(), levels.end(),
                [](const std::string& a, const std::string& b) { return std::stod(a) < std::stod(b); });
    auto ref = std::find(levels.begin(), levels.end(), cat.reference);
    if (ref == levels.end())
      throw IngestError("reference level '" + cat.reference + "' not observed in column '" +
                            cat.column + "'",
                        -1, cat.column);
    CategoricalInfo info;
    info.column = cat.column;
    info.reference = cat.reference;
    info.levels.push_back(cat.reference);
    info.first_dummy = int(linear_cols.size());
    for (const auto& level : levels) {
      if (level == cat.reference) continue;
      info.levels.push_back(level);
      Vec dummy(n);
      for (long i = 0; i < n; ++i) dummy[i] = raw[size_t(i)] == level ? 1.0 : 0.0;
      linear_cols.push_back(dummy);
      linear_names.push_back(cat.column + level);
      ++info.n_dummies;
    }
    out.categoricals.push_back(std::move(info));
  }

  out.input.linear = Mat(n, long(linear_cols.size()));
  for (size_t j = 0; j < linear_cols.size(); ++j) out.input.linear.col(long(j)) = linear_cols[j];
  out.input.linear_names = linear_names;

  out.input.spline_values = Mat(n, long(cfg.splines.size()));
  for (size_t s = 0; s < cfg.splines.size(); ++s) {
    out.input.spline_values.col(long(s)) = numeric_column(table, cfg.splines[s].variable);
    out.spline_vars.push_back(cfg.splines[s].variable);
  }
  out.input.spline_settings = cfg.splines;

  // Covariate space for hull check points: linear block plus spline inputs.
  const long p_lin = out.input.linear.cols();
  const long q = out.input.spline_values.cols();
  out.space.values = Mat(n, p_lin + q);
  if (p_lin > 0) out.space.values.leftCols(p_lin) = out.input.linear;
  if (q > 0) out.space.values.rightCols(q) = out.input.spline_values;
  for (size_t j = 0; j < out.numeric_linear.size(); ++j) out.space.continuous.push_back(int(j));
  for (const auto& cat : out.categoricals) {
    std::vector<int> group;
    for (int d = 0; d < cat.n_dummies; ++d) group.push_back(cat.first_dummy + d);
    out.space.categorical_groups.push_back(group);
  }
  for (long s = 0; s < q; ++s) out.space.continuous.push_back(int(p_lin + s));

  out.point_names = linear_names;
  for (const auto& v : out.spline_vars) out.point_names.push_back(v);
  return out;
}

inline IngestedData ingest(const RunConfig& cfg) {
  if (cfg.input_path.empty()) throw std::invalid_argument("ingest: no input path configured");
  return ingest_table(read_csv_table(cfg.input_path), cfg);
}

// ---------------------------------------------------------------------------
// Covariate points

inline CovariatePoint split_space_point(const IngestedData& data, const Vec& full) {
  const long p_lin = data.input.linear.cols();
  const long q = data.input.spline_values.cols();
  if (full.size() != p_lin + q)
    throw std::invalid_argument("split_space_point: wrong covariate dimension");
  CovariatePoint pt;
  pt.full = full;
  pt.linear = full.head(p_lin);
  pt.spline_inputs = full.tail(q);
  return pt;
}

/// Continuous coordinates at their data means, categoricals at the
/// reference level.
inline CovariatePoint default_point(const IngestedData& data) {
  Vec full = Vec::Zero(data.space.values.cols());
  for (int j : data.space.continuous) full[j] = data.space.values.col(j).mean();
  return split_space_point(data, full);
}

/// Parse "name=value,name=value" and resolve it against the schema: numeric
/// and spline names take numbers, categorical names take a level label.
inline CovariatePoint resolve_point(const IngestedData& data, const std::string& spec) {
  CovariatePoint pt = default_point(data);
  for (const auto& item : detail::split_list(spec, ',')) {
    const size_t eq = item.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("covariate point entries use name=value, got '" + item + "'");
    const std::string name = detail::trim(item.substr(0, eq));
    const std::string value = detail::trim(item.substr(eq + 1));

    bool matched = false;
    for (size_t j = 0; j < data.numeric_linear.size(); ++j)
      if (data.numeric_linear[j] == name) {
        pt.full[long(j)] = detail::parse_double(name, value);
        matched = true;
      }
    if (!matched)
      for (const auto& cat : data.categoricals)
        if (cat.column == name) {
          if (std::find(cat.levels.begin(), cat.levels.end(), value) == cat.levels.end())
            throw std::invalid_argument("level '" + value + "' not observed for '" + name + "'");
          for (int d = 0; d < cat.n_dummies; ++d)
            pt.full[cat.first_dummy + d] = cat.levels[size_t(d) + 1] == value ? 1.0 : 0.0;
          matched = true;
        }
    if (!matched)
      for (size_t s = 0; s < data.spline_vars.size(); ++s)
        if (data.spline_vars[s] == name) {
          pt.full[data.input.linear.cols() + long(s)] = detail::parse_double(name, value);
          matched = true;
        }
    if (!matched)
      throw std::invalid_argument("covariate point names unknown variable '" + name + "'");
  }
  return split_space_point(data, pt.full);
}

}  // namespace dqr

#endif  // DQR_INGEST_HPP

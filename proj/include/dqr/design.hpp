#ifndef DQR_DESIGN_HPP
#define DQR_DESIGN_HPP

#include <numeric>
#include <string>
#include <vector>

#include "dqr/geometry.hpp"
#include "dqr/splines.hpp"

namespace dqr {

struct ColumnRange {
  int start = 0;
  int length = 0;
  int end() const { return start + length; }
};

/// Column bookkeeping for the assembled design matrix:
/// [intercept | y_perp | linear covariates | spline blocks...].
struct DesignLayout {
  ColumnRange intercept;
  ColumnRange directional;
  ColumnRange linear;
  std::vector<ColumnRange> spline_blocks;
  std::vector<std::string> column_names;

  int total() const { return int(column_names.size()); }
};

/// A penalized coefficient block: column range into the design matrix plus
/// the penalty Gram matrix and its rank.
struct PenaltyBlock {
  ColumnRange range;
  Mat penalty;
  int rank = 0;
};

struct AssembledDesign {
  Mat design;
  DesignLayout layout;
  std::vector<PenaltyBlock> penalties;
};

/// Assemble the additive-predictor design for one direction. Linear covariate
/// names are used in error messages and in exported draw headers.
inline AssembledDesign assemble_design(const ProjectedSample& projected,
                                       const Mat& covariates,
                                       const std::vector<std::string>& covariate_names,
                                       const std::vector<SplineTerm>& splines) {
  const long n = projected.y_u.size();
  if (projected.y_perp.rows() != n)
    throw std::invalid_argument("assemble_design: projected blocks disagree on n");
  if (covariates.size() > 0 && covariates.rows() != n)
    throw std::invalid_argument("assemble_design: covariate rows do not match n");
  for (const auto& s : splines)
    if (s.basis.rows() != n)
      throw std::invalid_argument("assemble_design: spline basis rows do not match n");
  if (covariate_names.size() != size_t(covariates.cols()))
    throw std::invalid_argument("assemble_design: covariate name count mismatch");

  AssembledDesign out;
  const int k_perp = int(projected.y_perp.cols());
  const int p_lin = int(covariates.cols());
  int total = 1 + k_perp + p_lin;
  for (const auto& s : splines) total += s.n_basis();

  out.design.resize(n, total);
  auto& names = out.layout.column_names;

  int col = 0;
  out.layout.intercept = {col, 1};
  out.design.col(col).setOnes();
  names.push_back("intercept");
  ++col;

  out.layout.directional = {col, k_perp};
  for (int j = 0; j < k_perp; ++j, ++col) {
    out.design.col(col) = projected.y_perp.col(j);
    names.push_back("b" + std::to_string(j + 1));
  }

  out.layout.linear = {col, p_lin};
  for (int j = 0; j < p_lin; ++j, ++col) {
    out.design.col(col) = covariates.col(j);
    names.push_back(covariate_names[size_t(j)]);
  }

  for (const auto& s : splines) {
    ColumnRange range{col, s.n_basis()};
    out.layout.spline_blocks.push_back(range);
    out.design.block(0, col, n, s.n_basis()) = s.basis;
    for (int j = 0; j < s.n_basis(); ++j)
      names.push_back("f_" + s.variable + "_" + std::to_string(j + 1));
    col += s.n_basis();
    out.penalties.push_back({range, s.penalty, s.penalty_rank});
  }

  // The unpenalized block must have full column rank; splines are regularized
  // by the penalty, so only [intercept | y_perp | linear] is checked.
  const int p_free = 1 + k_perp + p_lin;
  if (n < p_free) {
    throw std::invalid_argument("assemble_design: fewer rows than unpenalized columns");
  }
  Mat free_block = out.design.leftCols(p_free);
  Eigen::ColPivHouseholderQR<Mat> qr(free_block);
  qr.setThreshold(1e-10);
  if (qr.rank() < p_free) {
    // Name the columns past the detected rank in pivot order.
    std::string offenders;
    const auto& perm = qr.colsPermutation().indices();
    for (int j = int(qr.rank()); j < p_free; ++j) {
      if (!offenders.empty()) offenders += ", ";
      offenders += names[size_t(perm[j])];
    }
    throw std::invalid_argument("assemble_design: rank-deficient design; offending columns: " +
                                offenders);
  }
  return out;
}

/// Prediction row for a covariate point, with the directional block at zero.
/// `linear` holds the linear covariate values, `spline_inputs` the raw inputs
/// of each spline term, both in the layout's order.
inline Vec design_row_at(const DesignLayout& layout, const std::vector<SplineTerm>& splines,
                         const Vec& linear, const Vec& spline_inputs) {
  if (linear.size() != layout.linear.length)
    throw std::invalid_argument("design_row_at: linear covariate count mismatch");
  if (spline_inputs.size() != long(splines.size()))
    throw std::invalid_argument("design_row_at: spline input count mismatch");
  Vec row = Vec::Zero(layout.total());
  row[layout.intercept.start] = 1.0;
  for (int j = 0; j < layout.linear.length; ++j) row[layout.linear.start + j] = linear[j];
  for (size_t s = 0; s < splines.size(); ++s) {
    const Vec b = splines[s].row_at(spline_inputs[long(s)]);
    row.segment(layout.spline_blocks[s].start, layout.spline_blocks[s].length) = b;
  }
  return row;
}

}  // namespace dqr

#endif  // DQR_DESIGN_HPP

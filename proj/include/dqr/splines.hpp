#ifndef DQR_SPLINES_HPP
#define DQR_SPLINES_HPP

#include <algorithm>
#include <string>

#include "dqr/common.hpp"

namespace dqr {

namespace detail {

/// Equidistant knot vector over `n_knots` positions spanning [lo, hi],
/// extended `degree` steps past each boundary. Uniform spacing throughout
/// keeps coefficient ramps mapping to exactly affine functions, so the
/// second-difference penalty's null space is {constant, linear} in z.
inline Vec uniform_extended_knots(int degree, int n_knots, double lo, double hi) {
  const int total = n_knots + 2 * degree;
  Vec knots(total);
  const double step = (hi - lo) / double(n_knots - 1);
  for (int i = 0; i < total; ++i) knots[i] = lo + step * double(i - degree);
  // Guard against accumulated rounding at the right boundary.
  knots[degree + n_knots - 1] = hi;
  return knots;
}

/// Cox-de Boor evaluation of the (degree+1) basis functions that are nonzero
/// at z. Returns the span offset so values land at columns span..span+degree.
inline int bspline_nonzero(double z, int degree, const Vec& knots, Vec& values) {
  const int n_basis = int(knots.size()) - degree - 1;
  // Locate the knot span; z equal to the right boundary maps into the last
  // nontrivial interval so the basis still sums to one there.
  int span = degree;
  const int hi_span = n_basis - 1;
  if (z >= knots[hi_span + 1]) {
    span = hi_span;
  } else {
    while (span < hi_span && z >= knots[span + 1]) ++span;
  }

  values.resize(degree + 1);
  values[0] = 1.0;
  std::vector<double> left(size_t(degree) + 1), right(size_t(degree) + 1);
  for (int j = 1; j <= degree; ++j) {
    left[size_t(j)] = z - knots[span + 1 - j];
    right[size_t(j)] = knots[span + j] - z;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double denom = right[size_t(r) + 1] + left[size_t(j - r)];
      const double temp = denom > 0.0 ? values[r] / denom : 0.0;
      values[r] = saved + right[size_t(r) + 1] * temp;
      saved = left[size_t(j - r)] * temp;
    }
    values[j] = saved;
  }
  return span - degree;
}

}  // namespace detail

struct BasisResult {
  Mat basis;          // n x K
  long clamped = 0;   // inputs outside the knot range, clamped to the boundary
};

/// B-spline basis over equidistant knots. `n_knots` counts the knot positions
/// spanning [range.first, range.second]; K = n_knots + degree - 1 columns.
/// Out-of-range inputs are clamped to the boundary and counted.
inline BasisResult bspline_basis(const Vec& z, int degree, int n_knots,
                                 std::pair<double, double> range) {
  if (range.first >= range.second)
    throw std::invalid_argument("bspline_basis: range lower bound must be below upper");
  if (degree < 0) throw std::invalid_argument("bspline_basis: negative degree");
  if (n_knots < degree + 1)
    throw std::invalid_argument("bspline_basis: need n_knots >= degree + 1");

  const Vec knots = detail::uniform_extended_knots(degree, n_knots, range.first, range.second);
  const int K = n_knots + degree - 1;
  BasisResult out;
  out.basis = Mat::Zero(z.size(), K);
  Vec values;
  for (long i = 0; i < z.size(); ++i) {
    double zi = z[i];
    if (zi < range.first || zi > range.second) {
      zi = std::clamp(zi, range.first, range.second);
      ++out.clamped;
    }
    const int offset = detail::bspline_nonzero(zi, degree, knots, values);
    for (int j = 0; j <= degree; ++j) out.basis(i, offset + j) = values[j];
  }
  return out;
}

/// Gram matrix of second differences: D2' D2 with D2 the (K-2) x K
/// second-difference operator. Rank K-2; null space = constant and linear
/// sequences.
inline Mat rw2_penalty(int K) {
  if (K < 3) throw std::invalid_argument("rw2_penalty: need K >= 3");
  Mat d2 = Mat::Zero(K - 2, K);
  for (int i = 0; i < K - 2; ++i) {
    d2(i, i) = 1.0;
    d2(i, i + 1) = -2.0;
    d2(i, i + 2) = 1.0;
  }
  return d2.transpose() * d2;
}

/// One nonlinear term of the additive predictor: centered B-spline basis with
/// its smoothness penalty. Centering constants are kept for prediction rows.
struct SplineTerm {
  std::string variable;
  int degree = 3;
  int n_knots = 20;
  std::pair<double, double> range{0.0, 1.0};
  Mat basis;          // n x K, centered
  Mat penalty;        // K x K
  int penalty_rank = 0;
  Vec column_means;   // centering constants, K
  long clamped = 0;

  int n_basis() const { return int(penalty.rows()); }

  /// Centered basis row at a new input (clamped to the knot range).
  Vec row_at(double z) const {
    Vec zvec(1);
    zvec[0] = z;
    BasisResult r = bspline_basis(zvec, degree, n_knots, range);
    return r.basis.row(0).transpose() - column_means;
  }
};

/// Build a spline term from data. If `range` is unset the data min/max is
/// used. The basis is centered so the intercept stays identifiable.
inline SplineTerm make_spline_term(const std::string& variable, const Vec& values,
                                   int degree = 3, int n_knots = 20,
                                   std::pair<double, double> range = {0.0, -1.0}) {
  SplineTerm term;
  term.variable = variable;
  term.degree = degree;
  term.n_knots = n_knots;
  if (range.first < range.second) {
    term.range = range;
  } else {
    term.range = {values.minCoeff(), values.maxCoeff()};
    if (term.range.first >= term.range.second)
      throw std::invalid_argument("make_spline_term: variable '" + variable +
                                  "' is constant; cannot place knots");
  }
  BasisResult r = bspline_basis(values, degree, n_knots, term.range);
  term.clamped = r.clamped;
  term.column_means = r.basis.colwise().mean().transpose();
  term.basis = r.basis.rowwise() - term.column_means.transpose();
  term.penalty = rw2_penalty(int(r.basis.cols()));
  term.penalty_rank = int(r.basis.cols()) - 2;
  return term;
}

}  // namespace dqr

#endif  // DQR_SPLINES_HPP

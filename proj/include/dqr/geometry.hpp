#ifndef DQR_GEOMETRY_HPP
#define DQR_GEOMETRY_HPP

#include <cmath>
#include <numbers>

#include "dqr/common.hpp"

namespace dqr {

/// A unit direction together with an orthonormal basis of its orthogonal
/// complement. The pair (u, gamma) is an orthonormal basis of R^k.
struct Direction {
  Vec u;        // unit vector, k entries
  Mat gamma;    // k x (k-1), orthonormal columns, each orthogonal to u
  int index = 0;

  int dim() const { return int(u.size()); }
};

/// Projection of an n x k response sample onto a direction: the scalar
/// component along u and the (k-1)-dimensional component in the complement.
struct ProjectedSample {
  Vec y_u;      // n
  Mat y_perp;   // n x (k-1)
};

/// Orthonormal complement of a unit vector, deterministic for a given input.
/// In 2D the convention is the counterclockwise rotation (-u2, u1). In higher
/// dimensions columns come from Gram-Schmidt over canonical axes taken in
/// order of increasing alignment with u; in 3D the second column is the cross
/// product, so the frame is right-handed.
inline Mat complement_basis(const Vec& u) {
  const long k = u.size();
  if (k < 2) throw std::invalid_argument("complement_basis: need dimension >= 2");
  const double nrm = u.norm();
  if (nrm < 1e-12) throw std::invalid_argument("complement_basis: zero vector");
  if (std::abs(nrm - 1.0) > 1e-8)
    throw std::invalid_argument("complement_basis: input is not unit length");

  Mat g(k, k - 1);
  if (k == 2) {
    g(0, 0) = -u[1];
    g(1, 0) = u[0];
    return g;
  }
  if (k == 3) {
    // Axis least aligned with u, then cross products.
    int axis = 0;
    for (int j = 1; j < 3; ++j)
      if (std::abs(u[j]) < std::abs(u[axis])) axis = j;
    Vec e = Vec::Zero(3);
    e[axis] = 1.0;
    Vec v1 = e - u.dot(e) * u;
    v1.normalize();
    Vec v2(3);
    v2[0] = u[1] * v1[2] - u[2] * v1[1];
    v2[1] = u[2] * v1[0] - u[0] * v1[2];
    v2[2] = u[0] * v1[1] - u[1] * v1[0];
    g.col(0) = v1;
    g.col(1) = v2;
    return g;
  }
  // General k: Gram-Schmidt over canonical axes sorted by |u_j| ascending.
  std::vector<int> order(static_cast<size_t>(k), 0);
  for (long j = 0; j < k; ++j) order[size_t(j)] = int(j);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return std::abs(u[a]) < std::abs(u[b]); });
  long filled = 0;
  for (int axis : order) {
    if (filled == k - 1) break;
    Vec v = Vec::Zero(k);
    v[axis] = 1.0;
    v -= u.dot(v) * u;
    for (long c = 0; c < filled; ++c) v -= g.col(c).dot(v) * g.col(c);
    const double vn = v.norm();
    if (vn < 1e-10) continue;
    g.col(filled++) = v / vn;
  }
  if (filled != k - 1)
    throw NumericalFailureError("complement_basis: Gram-Schmidt degenerated");
  return g;
}

/// Equally spaced unit vectors on the circle, first direction (1,0),
/// counterclockwise. Complements follow the 2D rotation convention.
inline std::vector<Direction> direction_grid_2d(int count) {
  if (count < 3) throw std::invalid_argument("direction_grid_2d: count must be >= 3");
  std::vector<Direction> out;
  out.reserve(size_t(count));
  for (int j = 0; j < count; ++j) {
    const double angle = 2.0 * std::numbers::pi * double(j) / double(count);
    Direction d;
    d.u = Vec(2);
    d.u << std::cos(angle), std::sin(angle);
    d.gamma = complement_basis(d.u);
    d.index = j;
    out.push_back(std::move(d));
  }
  return out;
}

/// Near-uniform directions on the unit sphere from a Fibonacci lattice,
/// deterministic for a given count.
inline std::vector<Direction> direction_grid_3d(int count) {
  if (count < 4) throw std::invalid_argument("direction_grid_3d: count must be >= 4");
  const double golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));
  std::vector<Direction> out;
  out.reserve(size_t(count));
  for (int j = 0; j < count; ++j) {
    const double z = 1.0 - (2.0 * double(j) + 1.0) / double(count);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden_angle * double(j);
    Direction d;
    d.u = Vec(3);
    d.u << r * std::cos(phi), r * std::sin(phi), z;
    d.u.normalize();
    d.gamma = complement_basis(d.u);
    d.index = j;
    out.push_back(std::move(d));
  }
  return out;
}

/// Project each sample row onto the direction and its complement.
inline ProjectedSample project(const Mat& sample, const Direction& d) {
  if (sample.cols() != d.u.size())
    throw std::invalid_argument("project: sample dimension does not match direction");
  ProjectedSample p;
  p.y_u = sample * d.u;
  p.y_perp = sample * d.gamma;
  return p;
}

}  // namespace dqr

#endif  // DQR_GEOMETRY_HPP

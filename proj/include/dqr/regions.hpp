#ifndef DQR_REGIONS_HPP
#define DQR_REGIONS_HPP

#include <map>

#include "dqr/gp_adjust.hpp"

namespace dqr {

// ---------------------------------------------------------------------------
// Halfspaces

/// Upper closed halfspace {y : normal . y >= offset} in response space. The
/// fitted hyperplane u'y = b' (Gamma' y) + c rearranges to normal = u -
/// Gamma b with the covariate part absorbed into the offset.
struct Halfspace {
  Vec normal;
  double offset = 0.0;
  int direction_index = -1;
  double tau = 0.0;

  double slack(const Vec& y) const { return normal.dot(y) - offset; }
};

inline Halfspace make_halfspace(const Direction& dir, const Vec& directional_coef, double offset,
                                double tau) {
  if (directional_coef.size() != dir.gamma.cols())
    throw std::invalid_argument("make_halfspace: directional coefficient length mismatch");
  Halfspace h;
  h.normal = dir.u - dir.gamma * directional_coef;
  if (h.normal.norm() < 1e-14)
    throw std::invalid_argument("make_halfspace: degenerate normal");
  h.offset = offset;
  h.direction_index = dir.index;
  h.tau = tau;
  return h;
}

/// Posterior-mean linear predictor at a covariate point (directional block
/// at zero): the halfspace offset before any adjustment.
inline double fit_offset_at(const FitResult& fit, const DesignLayout& layout,
                            const std::vector<SplineTerm>& splines, const Vec& linear,
                            const Vec& spline_inputs) {
  if (fit.failed) throw InvalidStateError("fit_offset_at: task failed: " + fit.error_message);
  if (fit.draws.draws() == 0) throw InvalidStateError("fit_offset_at: empty draw store");
  return fit.coef_mean.dot(design_row_at(layout, splines, linear, spline_inputs));
}

/// Halfspace from one task's posterior summary at a covariate point.
inline Halfspace halfspace_from_fit(const FitResult& fit, const DesignLayout& layout,
                                    const std::vector<SplineTerm>& splines, const Direction& dir,
                                    const Vec& linear, const Vec& spline_inputs) {
  const double offset = fit_offset_at(fit, layout, splines, linear, spline_inputs);
  const Vec b = fit.coef_mean.segment(layout.directional.start, layout.directional.length);
  return make_halfspace(dir, b, offset, fit.task.tau);
}

// ---------------------------------------------------------------------------
// Regions

/// Intersection of upper halfspaces clipped to a bounding box: a convex
/// polygon (2D, counterclockwise vertices) or polytope (3D, faces as index
/// lists into the vertex set).
struct QuantileRegion {
  double tau = 0.0;
  Vec covariate_point;  // may be empty
  std::vector<Vec> vertices;
  std::vector<std::vector<int>> faces;  // 3D only
  std::vector<Halfspace> halfspaces;    // the defining set
  bool empty_region = false;
  bool unbounded = false;  // intersection touched the bounding box
  Vec last_vertex;         // diagnostics when the region collapsed to nothing
};

namespace detail {

inline std::vector<Vec> clip_polygon(const std::vector<Vec>& poly, const Halfspace& hs) {
  std::vector<Vec> out;
  const size_t n = poly.size();
  for (size_t i = 0; i < n; ++i) {
    const Vec& cur = poly[i];
    const Vec& nxt = poly[(i + 1) % n];
    const double dc = hs.slack(cur);
    const double dn = hs.slack(nxt);
    if (dc >= 0.0) out.push_back(cur);
    if ((dc >= 0.0 && dn < 0.0) || (dc < 0.0 && dn >= 0.0)) {
      const double t = dc / (dc - dn);
      out.push_back(cur + t * (nxt - cur));
    }
  }
  return out;
}

inline std::vector<Vec> dedupe_ring(const std::vector<Vec>& poly, double tol) {
  std::vector<Vec> out;
  for (const auto& v : poly) {
    if (!out.empty() && (v - out.back()).norm() <= tol) continue;
    out.push_back(v);
  }
  while (out.size() > 1 && (out.front() - out.back()).norm() <= tol) out.pop_back();
  return out;
}

inline std::vector<std::vector<Vec>> cube_faces(double b) {
  auto v = [](double x, double y, double z) {
    Vec p(3);
    p << x, y, z;
    return p;
  };
  return {
      {v(-b, -b, -b), v(-b, b, -b), v(b, b, -b), v(b, -b, -b)},   // z = -b
      {v(-b, -b, b), v(b, -b, b), v(b, b, b), v(-b, b, b)},       // z = +b
      {v(-b, -b, -b), v(-b, -b, b), v(-b, b, b), v(-b, b, -b)},   // x = -b
      {v(b, -b, -b), v(b, b, -b), v(b, b, b), v(b, -b, b)},       // x = +b
      {v(-b, -b, -b), v(b, -b, -b), v(b, -b, b), v(-b, -b, b)},   // y = -b
      {v(-b, b, -b), v(-b, b, b), v(b, b, b), v(b, b, -b)},       // y = +b
  };
}

inline Vec cross3(const Vec& a, const Vec& b) {
  Vec c(3);
  c << a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0];
  return c;
}

}  // namespace detail

/// Intersect halfspaces inside the box [-bound, bound]^k. An empty
/// intersection is a valid outcome, reported through the empty flag; a
/// region still touching the box is flagged unbounded-in-practice.
inline QuantileRegion intersect(const std::vector<Halfspace>& halfspaces, double bound,
                                double tau = 0.0) {
  if (halfspaces.empty()) throw std::invalid_argument("intersect: no halfspaces");
  const long k = halfspaces.front().normal.size();
  for (const auto& h : halfspaces)
    if (h.normal.size() != k) throw std::invalid_argument("intersect: mixed dimensions");
  if (long(halfspaces.size()) < k + 1)
    throw std::invalid_argument("intersect: need at least k+1 halfspaces");
  if (!(bound > 0.0)) throw std::invalid_argument("intersect: bound must be positive");

  QuantileRegion region;
  region.tau = tau;
  region.halfspaces = halfspaces;
  const double tol = 1e-9 * bound;

  if (k == 2) {
    std::vector<Vec> poly;
    {
      Vec a(2), b(2), c(2), d(2);
      a << -bound, -bound;
      b << bound, -bound;
      c << bound, bound;
      d << -bound, bound;
      poly = {a, b, c, d};
    }
    for (const auto& hs : halfspaces) {
      poly = detail::clip_polygon(poly, hs);
      if (poly.size() < 3) {
        region.empty_region = true;
        if (!poly.empty()) region.last_vertex = poly.front();
        return region;
      }
    }
    poly = detail::dedupe_ring(poly, tol);
    if (poly.size() < 3) {
      region.empty_region = true;
      if (!poly.empty()) region.last_vertex = poly.front();
      return region;
    }
    region.vertices = poly;
    for (const auto& v : poly)
      if (v.cwiseAbs().maxCoeff() >= bound * (1.0 - 1e-9)) region.unbounded = true;
    return region;
  }

  if (k == 3) {
    auto faces = detail::cube_faces(bound);
    for (const auto& hs : halfspaces) {
      std::vector<std::vector<Vec>> kept;
      std::vector<Vec> cap;
      bool anything_clipped = false;
      for (auto& face : faces) {
        const size_t before = face.size();
        size_t inside = 0;
        for (const auto& v : face)
          if (hs.slack(v) >= 0.0) ++inside;
        if (inside == before) {
          kept.push_back(std::move(face));
          continue;
        }
        anything_clipped = true;
        auto clipped = detail::clip_polygon(face, hs);
        clipped = detail::dedupe_ring(clipped, tol);
        for (const auto& v : clipped)
          if (std::abs(hs.slack(v)) <= tol * 10.0) cap.push_back(v);
        if (clipped.size() >= 3) kept.push_back(std::move(clipped));
      }
      if (anything_clipped && cap.size() >= 3) {
        // Deduplicate and order the cut points around their centroid in the
        // cutting plane.
        std::vector<Vec> cap_unique;
        for (const auto& v : cap) {
          bool seen = false;
          for (const auto& u : cap_unique)
            if ((u - v).norm() <= tol * 10.0) {
              seen = true;
              break;
            }
          if (!seen) cap_unique.push_back(v);
        }
        if (cap_unique.size() >= 3) {
          Vec centroid = Vec::Zero(3);
          for (const auto& v : cap_unique) centroid += v;
          centroid /= double(cap_unique.size());
          Vec nhat = hs.normal / hs.normal.norm();
          Mat basis = complement_basis(nhat);
          std::sort(cap_unique.begin(), cap_unique.end(), [&](const Vec& a, const Vec& b) {
            const Vec da = a - centroid, db = b - centroid;
            return std::atan2(basis.col(1).dot(da), basis.col(0).dot(da)) <
                   std::atan2(basis.col(1).dot(db), basis.col(0).dot(db));
          });
          kept.push_back(std::move(cap_unique));
        }
      }
      faces = std::move(kept);
      if (faces.empty()) {
        region.empty_region = true;
        if (!cap.empty()) region.last_vertex = cap.front();
        return region;
      }
    }

    // Unique vertices plus index faces.
    std::vector<Vec> verts;
    auto vertex_id = [&](const Vec& v) {
      for (size_t i = 0; i < verts.size(); ++i)
        if ((verts[i] - v).norm() <= tol * 10.0) return int(i);
      verts.push_back(v);
      return int(verts.size() - 1);
    };
    for (const auto& face : faces) {
      std::vector<int> idx;
      for (const auto& v : face) {
        const int id = vertex_id(v);
        if (idx.empty() || idx.back() != id) idx.push_back(id);
      }
      while (idx.size() > 1 && idx.front() == idx.back()) idx.pop_back();
      if (idx.size() >= 3) region.faces.push_back(std::move(idx));
    }
    if (region.faces.size() < 4 || verts.size() < 4) {
      region.empty_region = true;
      if (!verts.empty()) region.last_vertex = verts.front();
      return region;
    }
    region.vertices = std::move(verts);
    for (const auto& v : region.vertices)
      if (v.cwiseAbs().maxCoeff() >= bound * (1.0 - 1e-9)) region.unbounded = true;
    return region;
  }

  throw std::invalid_argument("intersect: only 2D and 3D regions are supported");
}

/// Shoelace area of a counterclockwise polygon.
inline double polygon_area(const std::vector<Vec>& vertices) {
  double acc = 0.0;
  const size_t n = vertices.size();
  for (size_t i = 0; i < n; ++i) {
    const Vec& a = vertices[i];
    const Vec& b = vertices[(i + 1) % n];
    acc += a[0] * b[1] - b[0] * a[1];
  }
  return 0.5 * std::abs(acc);
}

/// Volume by fanning each face from the polytope centroid; faces are oriented
/// outward on the fly.
inline double polytope_volume(const std::vector<Vec>& vertices,
                              const std::vector<std::vector<int>>& faces) {
  Vec centroid = Vec::Zero(3);
  for (const auto& v : vertices) centroid += v;
  centroid /= double(vertices.size());
  double vol = 0.0;
  for (const auto& face : faces) {
    const Vec& a = vertices[size_t(face[0])];
    Vec fn = Vec::Zero(3);
    for (size_t i = 1; i + 1 < face.size(); ++i)
      fn += detail::cross3(vertices[size_t(face[i])] - a, vertices[size_t(face[i + 1])] - a);
    const double sign = fn.dot(a - centroid) >= 0.0 ? 1.0 : -1.0;
    for (size_t i = 1; i + 1 < face.size(); ++i) {
      const Vec& b = vertices[size_t(face[i])];
      const Vec& c = vertices[size_t(face[i + 1])];
      vol += sign * (a - centroid).dot(detail::cross3(b - centroid, c - centroid)) / 6.0;
    }
  }
  return std::abs(vol);
}

inline double region_measure(const QuantileRegion& region) {
  if (region.empty_region) return 0.0;
  if (region.vertices.front().size() == 2) return polygon_area(region.vertices);
  return polytope_volume(region.vertices, region.faces);
}

// ---------------------------------------------------------------------------
// Nesting and subgradient diagnostics

struct NestingViolation {
  double tau_low = 0.0;
  double tau_high = 0.0;
  int vertex = -1;
  int halfspace = -1;
  double magnitude = 0.0;  // how far the vertex sits outside
};

struct NestingReport {
  std::vector<NestingViolation> violations;
  int pairs_checked = 0;
  bool ok() const { return violations.empty(); }
};

/// Regions must shrink as tau grows: every vertex of the higher-tau region
/// has to satisfy every halfspace of the lower-tau region within the slack.
inline NestingReport nesting_check(const std::map<double, QuantileRegion>& regions,
                                   double slack = 1e-8) {
  if (regions.size() < 2) throw std::invalid_argument("nesting_check: need at least two regions");
  NestingReport report;
  auto outer = regions.begin();
  for (auto inner = std::next(outer); inner != regions.end(); ++outer, ++inner) {
    ++report.pairs_checked;
    if (inner->second.empty_region) continue;  // empty is trivially nested
    for (size_t vi = 0; vi < inner->second.vertices.size(); ++vi) {
      const Vec& v = inner->second.vertices[vi];
      const auto& hss = outer->second.halfspaces;
      for (size_t hi = 0; hi < hss.size(); ++hi) {
        const double s = hss[hi].slack(v);
        if (s < -slack)
          report.violations.push_back(
              {outer->first, inner->first, int(vi), int(hi), -s});
      }
    }
  }
  return report;
}

struct SubgradientReport {
  double tau = 0.0;
  std::vector<double> fraction;  // per direction: share strictly inside H-
  double mean_fraction = 0.0;
  double mean_abs_deviation = 0.0;
};

/// Empirical share of sample points strictly inside the lower open halfspace
/// per direction, against the nominal level. Boundary points count as not
/// inside (the lower halfspace is open).
inline SubgradientReport subgradient_check(const Mat& data,
                                           const std::vector<Halfspace>& halfspaces) {
  if (data.rows() == 0) throw std::invalid_argument("subgradient_check: empty data");
  SubgradientReport report;
  if (!halfspaces.empty()) report.tau = halfspaces.front().tau;
  double sum_frac = 0.0, sum_dev = 0.0;
  for (const auto& hs : halfspaces) {
    long below = 0;
    for (long i = 0; i < data.rows(); ++i)
      if (hs.slack(data.row(i).transpose()) < 0.0) ++below;
    const double frac = double(below) / double(data.rows());
    report.fraction.push_back(frac);
    sum_frac += frac;
    sum_dev += std::abs(frac - hs.tau);
  }
  report.mean_fraction = sum_frac / double(halfspaces.size());
  report.mean_abs_deviation = sum_dev / double(halfspaces.size());
  return report;
}

// ---------------------------------------------------------------------------
// Contours in original units

struct Contour {
  double tau = 0.0;
  Vec covariate_point;
  std::vector<Vec> vertices;  // rescaled to original response units
  std::vector<std::vector<int>> faces;
  bool empty_region = false;
  bool unbounded = false;
};

/// Boundary of the region rescaled by the stored response SDs.
inline Contour region_to_contour(const QuantileRegion& region, const Vec& response_sds) {
  Contour c;
  c.tau = region.tau;
  c.covariate_point = region.covariate_point;
  c.empty_region = region.empty_region;
  c.unbounded = region.unbounded;
  if (region.empty_region) return c;
  if (response_sds.size() != region.vertices.front().size())
    throw std::invalid_argument("region_to_contour: scaling dimension mismatch");
  for (const auto& v : region.vertices) c.vertices.push_back(v.cwiseProduct(response_sds));
  c.faces = region.faces;
  return c;
}

}  // namespace dqr

#endif  // DQR_REGIONS_HPP

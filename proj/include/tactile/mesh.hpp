#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <vector>

#include "tactile/geometry.hpp"
#include "tactile/point_cloud.hpp"

namespace tactile {

using Face = std::array<std::uint32_t, 3>;

struct ClosestPoint {
  Vec3 point;
  double distance = std::numeric_limits<double>::infinity();
  std::size_t face = 0;
};

/// Exact closest point on triangle (a, b, c) to p, by Voronoi-region
/// classification (vertex, edge or interior).
inline Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);

  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

/// Indexed triangle mesh with per-face unit normals (from winding) and a
/// bounding-volume hierarchy for proximity queries. Immutable after
/// construction; degenerate faces are dropped on construction.
class TriMesh {
 public:
  TriMesh() : bvh_(std::make_shared<Bvh>()) {}

  TriMesh(std::vector<Vec3> vertices, std::vector<Face> faces) : vertices_(std::move(vertices)) {
    faces_.reserve(faces.size());
    normals_.reserve(faces.size());
    for (const auto& f : faces) {
      for (auto i : f)
        if (i >= vertices_.size()) throw InvalidArgument("TriMesh: face index out of range");
      const Vec3 n = (vertices_[f[1]] - vertices_[f[0]]).cross(vertices_[f[2]] - vertices_[f[0]]);
      if (!(n.norm() > 1e-14)) continue;
      faces_.push_back(f);
      normals_.emplace_back(n);
    }
    bvh_ = std::make_shared<Bvh>(build_bvh());
  }

  const std::vector<Vec3>& vertices() const noexcept { return vertices_; }
  const std::vector<Face>& faces() const noexcept { return faces_; }
  const std::vector<UnitVec3>& face_normals() const noexcept { return normals_; }
  bool empty() const noexcept { return faces_.empty(); }

  double face_area(std::size_t f) const {
    const auto& t = faces_[f];
    return 0.5 * (vertices_[t[1]] - vertices_[t[0]]).cross(vertices_[t[2]] - vertices_[t[0]]).norm();
  }
  double surface_area() const {
    double a = 0.0;
    for (std::size_t f = 0; f < faces_.size(); ++f) a += face_area(f);
    return a;
  }

  std::pair<Vec3, Vec3> bounds() const {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
    for (const auto& v : vertices_) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
    return {lo, hi};
  }

  TriMesh transformed(const RigidTransform& t) const {
    std::vector<Vec3> v;
    v.reserve(vertices_.size());
    for (const auto& p : vertices_) v.push_back(t.apply(p));
    return TriMesh(std::move(v), faces_);
  }

  /// Minimum point-to-triangle distance over all faces. Ties resolve to the
  /// lowest face index.
  ClosestPoint closest_point(const Vec3& q) const {
    if (faces_.empty()) throw InvalidArgument("closest_point_on_mesh: empty mesh");
    ClosestPoint best;
    double best_sq = std::numeric_limits<double>::infinity();
    query(0, q, best, best_sq);
    best.distance = std::sqrt(best_sq);
    return best;
  }

  /// True when some face lies within `radius` of q (strict). Cheaper than a
  /// full closest-point search because it stops at the first hit.
  bool within(const Vec3& q, double radius) const {
    if (faces_.empty()) return false;
    return within_rec(0, q, radius * radius);
  }

 private:
  struct BvhNode {
    Vec3 lo, hi;
    std::uint32_t begin = 0, end = 0;  // leaf range into order
    std::uint32_t left = 0, right = 0;
    bool leaf = true;
  };
  struct Bvh {
    std::vector<BvhNode> nodes;
    std::vector<std::uint32_t> order;
  };

  static double box_dist_sq(const BvhNode& n, const Vec3& q) {
    const Vec3 d = (n.lo - q).cwiseMax(Vec3::Zero()).cwiseMax(q - n.hi);
    return d.squaredNorm();
  }

  Bvh build_bvh() const {
    Bvh b;
    if (faces_.empty()) return b;
    b.order.resize(faces_.size());
    std::iota(b.order.begin(), b.order.end(), 0u);
    std::vector<Vec3> centers(faces_.size());
    for (std::size_t f = 0; f < faces_.size(); ++f)
      centers[f] = (vertices_[faces_[f][0]] + vertices_[faces_[f][1]] + vertices_[faces_[f][2]]) / 3.0;
    build_rec(b, centers, 0, static_cast<std::uint32_t>(faces_.size()));
    return b;
  }

  std::uint32_t build_rec(Bvh& b, const std::vector<Vec3>& centers, std::uint32_t begin, std::uint32_t end) const {
    const auto id = static_cast<std::uint32_t>(b.nodes.size());
    b.nodes.push_back({});
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
    Vec3 clo = lo, chi = hi;
    for (std::uint32_t i = begin; i < end; ++i) {
      for (auto v : faces_[b.order[i]]) {
        lo = lo.cwiseMin(vertices_[v]);
        hi = hi.cwiseMax(vertices_[v]);
      }
      clo = clo.cwiseMin(centers[b.order[i]]);
      chi = chi.cwiseMax(centers[b.order[i]]);
    }
    b.nodes[id].lo = lo;
    b.nodes[id].hi = hi;
    b.nodes[id].begin = begin;
    b.nodes[id].end = end;
    if (end - begin <= 4) return id;
    int axis = 0;
    (chi - clo).maxCoeff(&axis);
    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(b.order.begin() + begin, b.order.begin() + mid, b.order.begin() + end,
                     [&](std::uint32_t x, std::uint32_t y) {
                       return centers[x][axis] < centers[y][axis] || (centers[x][axis] == centers[y][axis] && x < y);
                     });
    const std::uint32_t l = build_rec(b, centers, begin, mid);
    const std::uint32_t r = build_rec(b, centers, mid, end);
    b.nodes[id].leaf = false;
    b.nodes[id].left = l;
    b.nodes[id].right = r;
    return id;
  }

  void query(std::uint32_t id, const Vec3& q, ClosestPoint& best, double& best_sq) const {
    const BvhNode& n = bvh_->nodes[id];
    if (n.leaf) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        const std::uint32_t f = bvh_->order[i];
        const auto& t = faces_[f];
        const Vec3 c = closest_point_on_triangle(q, vertices_[t[0]], vertices_[t[1]], vertices_[t[2]]);
        const double d = (c - q).squaredNorm();
        if (d < best_sq || (d == best_sq && f < best.face)) {
          best_sq = d;
          best.point = c;
          best.face = f;
        }
      }
      return;
    }
    const double dl = box_dist_sq(bvh_->nodes[n.left], q);
    const double dr = box_dist_sq(bvh_->nodes[n.right], q);
    const std::uint32_t first = dl <= dr ? n.left : n.right;
    const std::uint32_t second = dl <= dr ? n.right : n.left;
    if (std::min(dl, dr) <= best_sq) query(first, q, best, best_sq);
    if (std::max(dl, dr) <= best_sq) query(second, q, best, best_sq);
  }

  bool within_rec(std::uint32_t id, const Vec3& q, double r2) const {
    const BvhNode& n = bvh_->nodes[id];
    if (box_dist_sq(n, q) >= r2) return false;
    if (n.leaf) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        const auto& t = faces_[bvh_->order[i]];
        if ((closest_point_on_triangle(q, vertices_[t[0]], vertices_[t[1]], vertices_[t[2]]) - q).squaredNorm() < r2)
          return true;
      }
      return false;
    }
    return within_rec(n.left, q, r2) || within_rec(n.right, q, r2);
  }

  std::vector<Vec3> vertices_;
  std::vector<Face> faces_;
  std::vector<UnitVec3> normals_;
  std::shared_ptr<const Bvh> bvh_;
};

inline ClosestPoint closest_point_on_mesh(const Vec3& q, const TriMesh& mesh) { return mesh.closest_point(q); }

/// Area-weighted uniform surface sample; each normal is the containing face's
/// normal. Deterministic for a fixed seed.
inline ContactCloud sample_mesh_surface(const TriMesh& mesh, std::size_t n, std::uint64_t seed) {
  if (mesh.empty()) throw InvalidArgument("sample_mesh_surface: empty mesh");
  if (n == 0) throw InvalidArgument("sample_mesh_surface: sample count must be positive");
  std::vector<double> cdf(mesh.faces().size());
  double acc = 0.0;
  for (std::size_t f = 0; f < cdf.size(); ++f) cdf[f] = (acc += mesh.face_area(f));
  Rng rng(seed);
  ContactCloud out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = uniform01(rng) * acc;
    std::size_t f = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    f = std::min(f, cdf.size() - 1);
    const double r1 = std::sqrt(uniform01(rng)), r2 = uniform01(rng);
    const auto& t = mesh.faces()[f];
    const Vec3& a = mesh.vertices()[t[0]];
    const Vec3& b = mesh.vertices()[t[1]];
    const Vec3& c = mesh.vertices()[t[2]];
    out.push_back((1.0 - r1) * a + r1 * (1.0 - r2) * b + r1 * r2 * c, mesh.face_normals()[f]);
  }
  return out;
}

}  // namespace tactile

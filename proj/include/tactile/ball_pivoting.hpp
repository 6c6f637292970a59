#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "tactile/mesh.hpp"
#include "tactile/point_cloud.hpp"

namespace tactile {

struct BallPivotOptions {
  // Radii as multiples of the mean nearest-neighbour spacing. Ignored when
  // explicit radii are passed.
  std::vector<double> spacing_multiples = {1.5, 3.0, 6.0};
  double duplicate_tolerance = 1e-6;  // meters
};

namespace bpa_detail {

inline std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
}

/// Center of the radius-r ball touching a, b, c on the side of the triangle's
/// right-handed normal, if the circumradius fits.
inline std::optional<Vec3> ball_center(const Vec3& a, const Vec3& b, const Vec3& c, double r) {
  const Vec3 ab = b - a, ac = c - a;
  const Vec3 n = ab.cross(ac);
  const double n2 = n.squaredNorm();
  if (n2 < 1e-30) return std::nullopt;
  const Vec3 to_cc = (ac.squaredNorm() * n.cross(ab) + ab.squaredNorm() * ac.cross(n)) / (2.0 * n2);
  const double h2 = r * r - to_cc.squaredNorm();
  if (h2 < 0.0) return std::nullopt;
  return Vec3(a + to_cc + std::sqrt(h2) * n / std::sqrt(n2));
}

class Pivoter {
 public:
  Pivoter(const ContactCloud& cloud, double dup_tol) : pts_(cloud.points()), nrm_(cloud.normals()), tree_(cloud.points()) {
    const std::size_t n = pts_.size();
    used_.assign(n, false);
    skip_.assign(n, false);
    front_count_.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (skip_[i]) continue;
      for (auto j : tree_.radius(pts_[i], dup_tol))
        if (j > i) skip_[j] = true;
    }
  }

  double mean_spacing() const {
    double s = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < pts_.size(); ++i) {
      if (skip_[i]) continue;
      // nearest non-duplicate neighbour
      double best = std::numeric_limits<double>::infinity();
      double r = 1e-3;
      while (!std::isfinite(best) && r < 10.0) {
        for (auto j : tree_.radius(pts_[i], r))
          if (j != i && !skip_[j]) best = std::min(best, (pts_[j] - pts_[i]).norm());
        r *= 2.0;
      }
      if (std::isfinite(best)) {
        s += best;
        ++count;
      }
    }
    return count ? s / static_cast<double>(count) : 0.0;
  }

  void run(double radius) {
    radius_ = radius;
    seed_tried_.assign(pts_.size(), false);
    // Edges left on the boundary by a smaller ball get another chance.
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      auto& fe = edges_[e];
      if (!fe.alive) continue;
      if (auto c = ball_center(pts_[fe.i], pts_[fe.j], pts_[fe.o], radius)) {
        fe.center = *c;
        queue_.push_back(e);
      }
    }
    for (;;) {
      while (!queue_.empty()) {
        const std::size_t e = queue_.front();
        queue_.pop_front();
        if (edges_[e].alive) pivot(e);
      }
      if (!find_seed()) break;
    }
  }

  TriMesh mesh() const { return TriMesh(pts_, faces_); }
  std::size_t face_count() const { return faces_.size(); }

 private:
  struct FrontEdge {
    std::uint32_t i, j, o;  // directed edge i->j of face (i, j, o)
    Vec3 center;            // ball center resting on that face
    bool alive = true;
  };

  bool normals_agree(const Vec3& n, std::uint32_t a, std::uint32_t b, std::uint32_t c) const {
    return nrm_[a].dot(n) > 0.0 && nrm_[b].dot(n) > 0.0 && nrm_[c].dot(n) > 0.0;
  }

  bool ball_empty(const Vec3& center, std::uint32_t a, std::uint32_t b, std::uint32_t c) const {
    const double tol = 1e-9 + 1e-7 * radius_;
    for (auto k : tree_.radius(center, radius_ - tol))
      if (k != a && k != b && k != c && !skip_[k]) return false;
    return true;
  }

  bool on_front(std::uint32_t v) const { return front_count_[v] > 0; }

  bool face_edge_free(std::uint32_t a, std::uint32_t b) const {
    // a directed edge may belong to one face only; an undirected edge to two
    return !face_dir_.count(edge_key(a, b)) && undirected_count(a, b) < 2;
  }

  int undirected_count(std::uint32_t a, std::uint32_t b) const {
    return static_cast<int>(face_dir_.count(edge_key(a, b)) + face_dir_.count(edge_key(b, a)));
  }

  void add_front(std::uint32_t i, std::uint32_t j, std::uint32_t o, const Vec3& c) {
    // glue with an opposite front edge when one exists
    auto it = front_index_.find(edge_key(j, i));
    if (it != front_index_.end()) {
      kill(it->second);
      return;
    }
    front_index_[edge_key(i, j)] = edges_.size();
    edges_.push_back({i, j, o, c, true});
    ++front_count_[i];
    ++front_count_[j];
    queue_.push_back(edges_.size() - 1);
  }

  void kill(std::size_t e) {
    auto& fe = edges_[e];
    if (!fe.alive) return;
    fe.alive = false;
    front_index_.erase(edge_key(fe.i, fe.j));
    --front_count_[fe.i];
    --front_count_[fe.j];
  }

  void add_face(std::uint32_t a, std::uint32_t b, std::uint32_t c) {
    faces_.push_back({a, b, c});
    face_dir_.insert(edge_key(a, b));
    face_dir_.insert(edge_key(b, c));
    face_dir_.insert(edge_key(c, a));
    used_[a] = used_[b] = used_[c] = true;
  }

  void pivot(std::size_t e) {
    const FrontEdge fe = edges_[e];
    const Vec3& pi = pts_[fe.i];
    const Vec3& pj = pts_[fe.j];
    const Vec3 m = 0.5 * (pi + pj);
    const Vec3 axis = (pj - pi).normalized();
    Vec3 u = fe.center - m;
    u -= axis.dot(u) * axis;
    const double pivot_r = u.norm();
    if (pivot_r < 1e-15) return;

    std::optional<std::uint32_t> best;
    Vec3 best_center;
    double best_angle = 2.0 * kPi;
    for (auto kk : tree_.radius(m, pivot_r + radius_)) {
      const auto k = static_cast<std::uint32_t>(kk);
      if (k == fe.i || k == fe.j || k == fe.o || skip_[k]) continue;
      const Vec3 n = (pi - pj).cross(pts_[k] - pj);
      if (n.squaredNorm() < 1e-30 || !normals_agree(n, fe.i, fe.j, k)) continue;
      const auto c = ball_center(pj, pi, pts_[k], radius_);
      if (!c) continue;
      Vec3 v = *c - m;
      v -= axis.dot(v) * axis;
      double angle = std::atan2(axis.dot(u.cross(v)), u.dot(v));
      if (angle < 0.0) angle += 2.0 * kPi;
      if (angle < 1e-12) continue;
      if (angle < best_angle || (angle == best_angle && k < *best)) {
        best_angle = angle;
        best = k;
        best_center = *c;
      }
    }
    if (!best) return;  // stays on the boundary
    const std::uint32_t k = *best;
    if (used_[k] && !on_front(k)) return;
    if (!face_edge_free(fe.i, k) || !face_edge_free(k, fe.j)) return;
    if (!ball_empty(best_center, fe.i, fe.j, k)) return;

    add_face(fe.j, fe.i, k);
    kill(e);
    add_front(fe.i, k, fe.j, best_center);
    add_front(k, fe.j, fe.i, best_center);
  }

  bool find_seed() {
    for (std::uint32_t v = 0; v < pts_.size(); ++v) {
      if (used_[v] || skip_[v] || seed_tried_[v]) continue;
      seed_tried_[v] = true;
      auto nb = tree_.radius(pts_[v], 2.0 * radius_);
      std::erase_if(nb, [&](std::size_t k) { return k == v || used_[k] || skip_[k]; });
      std::sort(nb.begin(), nb.end(), [&](std::size_t a, std::size_t b) {
        const double da = (pts_[a] - pts_[v]).squaredNorm(), db = (pts_[b] - pts_[v]).squaredNorm();
        return da < db || (da == db && a < b);
      });
      if (nb.size() > 24) nb.resize(24);
      for (std::size_t x = 0; x < nb.size(); ++x) {
        for (std::size_t y = x + 1; y < nb.size(); ++y) {
          auto a = static_cast<std::uint32_t>(nb[x]), b = static_cast<std::uint32_t>(nb[y]);
          Vec3 n = (pts_[a] - pts_[v]).cross(pts_[b] - pts_[v]);
          if (n.squaredNorm() < 1e-30) continue;
          if (nrm_[v].dot(n) < 0.0) {
            std::swap(a, b);
            n = -n;
          }
          if (!normals_agree(n, v, a, b)) continue;
          const auto c = ball_center(pts_[v], pts_[a], pts_[b], radius_);
          if (!c || !ball_empty(*c, v, a, b)) continue;
          add_face(v, a, b);
          add_front(v, a, b, *c);
          add_front(a, b, v, *c);
          add_front(b, v, a, *c);
          return true;
        }
      }
    }
    return false;
  }

  const std::vector<Vec3>& pts_;
  const std::vector<UnitVec3>& nrm_;
  KdTree tree_;
  double radius_ = 0.0;
  std::vector<bool> used_, skip_, seed_tried_;
  std::vector<int> front_count_;
  std::vector<FrontEdge> edges_;
  std::unordered_map<std::uint64_t, std::size_t> front_index_;
  std::unordered_set<std::uint64_t> face_dir_;
  std::deque<std::size_t> queue_;
  std::vector<Face> faces_;
};

/// Rejects clouds with fewer than four distinct points or no spread out of a
/// plane.
inline void check_non_degenerate(const std::vector<Vec3>& pts) {
  if (pts.size() < 4) throw ReconstructionFailed("ball pivoting: need at least 4 points");
  Vec3 mean = Vec3::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
  cov /= static_cast<double>(pts.size());
  Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
  const Vec3 ev = es.eigenvalues().cwiseMax(0.0);
  if (std::sqrt(ev[0]) < 1e-6) throw ReconstructionFailed("ball pivoting: points are coplanar or collinear");
}

}  // namespace bpa_detail

/// Ball-pivoting surface reconstruction with explicit radii processed in
/// ascending order. The output keeps the input point array as its vertex
/// list (so every vertex is an input point); unreferenced points are simply
/// unused. Normals orient the faces.
inline TriMesh ball_pivot_reconstruct(const ContactCloud& cloud, std::vector<double> radii,
                                      const BallPivotOptions& opt = {}) {
  bpa_detail::check_non_degenerate(cloud.points());
  if (radii.empty()) throw InvalidArgument("ball pivoting: no radii");
  std::sort(radii.begin(), radii.end());
  bpa_detail::Pivoter piv(cloud, opt.duplicate_tolerance);
  for (double r : radii) {
    if (!(r > 0.0)) throw InvalidArgument("ball pivoting: radii must be positive");
    piv.run(r);
  }
  if (piv.face_count() == 0) throw ReconstructionFailed("ball pivoting: no triangle could be seeded");
  return piv.mesh();
}

/// Radii derived from the cloud's mean nearest-neighbour spacing.
inline std::vector<double> auto_radii(const ContactCloud& cloud, const BallPivotOptions& opt = {}) {
  bpa_detail::Pivoter piv(cloud, opt.duplicate_tolerance);
  const double s = piv.mean_spacing();
  if (!(s > 0.0)) throw ReconstructionFailed("ball pivoting: cannot estimate point spacing");
  std::vector<double> r;
  for (double m : opt.spacing_multiples) r.push_back(m * s);
  return r;
}

inline TriMesh ball_pivot_reconstruct(const ContactCloud& cloud, const BallPivotOptions& opt = {}) {
  bpa_detail::check_non_degenerate(cloud.points());
  return ball_pivot_reconstruct(cloud, auto_radii(cloud, opt), opt);
}

/// Edges of `mesh` with more than two incident faces (should be none).
inline std::size_t non_manifold_edge_count(const TriMesh& mesh) {
  std::unordered_map<std::uint64_t, int> count;
  for (const auto& f : mesh.faces())
    for (int e = 0; e < 3; ++e) {
      auto a = f[e], b = f[(e + 1) % 3];
      if (a > b) std::swap(a, b);
      ++count[bpa_detail::edge_key(a, b)];
    }
  std::size_t bad = 0;
  for (const auto& [k, c] : count) bad += c > 2;
  return bad;
}

inline std::size_t used_vertex_count(const TriMesh& mesh) {
  std::vector<bool> used(mesh.vertices().size(), false);
  for (const auto& f : mesh.faces())
    for (auto v : f) used[v] = true;
  return static_cast<std::size_t>(std::count(used.begin(), used.end(), true));
}

}  // namespace tactile

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <vector>

#include "tactile/geometry.hpp"

namespace tactile {

/// Accumulated contact points, their estimated outward surface normals and the
/// step at which each was recorded. All three arrays stay the same length.
class ContactCloud {
 public:
  ContactCloud() = default;

  void push_back(const Vec3& p, const UnitVec3& n, std::int64_t step = 0) {
    points_.push_back(p);
    normals_.push_back(n);
    timestamps_.push_back(step);
  }
  void append(const ContactCloud& other) {
    for (std::size_t i = 0; i < other.size(); ++i) push_back(other.points_[i], other.normals_[i], other.timestamps_[i]);
  }
  void reserve(std::size_t n) {
    points_.reserve(n);
    normals_.reserve(n);
    timestamps_.reserve(n);
  }

  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }

  const std::vector<Vec3>& points() const noexcept { return points_; }
  const std::vector<UnitVec3>& normals() const noexcept { return normals_; }
  const std::vector<std::int64_t>& timestamps() const noexcept { return timestamps_; }

  ContactCloud transformed(const RigidTransform& t) const {
    ContactCloud out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) out.push_back(t.apply(points_[i]), t.rotate(normals_[i]), timestamps_[i]);
    return out;
  }

  Vec3 centroid() const {
    Vec3 c = Vec3::Zero();
    for (const auto& p : points_) c += p;
    return points_.empty() ? c : Vec3(c / static_cast<double>(points_.size()));
  }

 private:
  std::vector<Vec3> points_;
  std::vector<UnitVec3> normals_;
  std::vector<std::int64_t> timestamps_;
};

using CellIndex = std::array<std::int64_t, 3>;

/// Sparse voxel grid keyed by floor((p - origin) / cell). A point exactly on a
/// cell boundary lands in the higher-index cell. Cells iterate in ascending
/// lexicographic index order.
class VoxelGrid {
 public:
  struct Accumulator {
    Vec3 sum = Vec3::Zero();
    std::size_t count = 0;
    Vec3 centroid() const { return sum / static_cast<double>(count); }
  };

  explicit VoxelGrid(double cell, const Vec3& origin = Vec3::Zero()) : cell_(cell), origin_(origin) {
    if (!(cell > 0.0) || !std::isfinite(cell)) throw InvalidArgument("VoxelGrid: cell size must be positive");
  }

  CellIndex index_of(const Vec3& p) const {
    const Vec3 s = (p - origin_) / cell_;
    return {static_cast<std::int64_t>(std::floor(s.x())), static_cast<std::int64_t>(std::floor(s.y())),
            static_cast<std::int64_t>(std::floor(s.z()))};
  }

  void insert(const Vec3& p) {
    auto& acc = cells_[index_of(p)];
    acc.sum += p;
    ++acc.count;
  }

  double cell() const noexcept { return cell_; }
  const Vec3& origin() const noexcept { return origin_; }
  std::size_t occupied() const noexcept { return cells_.size(); }
  const std::map<CellIndex, Accumulator>& cells() const noexcept { return cells_; }

  std::vector<Vec3> centroids() const {
    std::vector<Vec3> out;
    out.reserve(cells_.size());
    for (const auto& [idx, acc] : cells_) out.push_back(acc.centroid());
    return out;
  }

 private:
  double cell_;
  Vec3 origin_;
  std::map<CellIndex, Accumulator> cells_;
};

/// One centroid per occupied cell, in ascending cell order.
inline std::vector<Vec3> voxel_downsample(std::span<const Vec3> points, double cell, const Vec3& origin = Vec3::Zero()) {
  VoxelGrid grid(cell, origin);
  for (const auto& p : points) grid.insert(p);
  return grid.centroids();
}

/// Static 3-d tree over a point set for nearest-neighbour and radius queries.
class KdTree {
 public:
  KdTree() = default;
  explicit KdTree(std::vector<Vec3> points) : points_(std::move(points)) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0u);
    nodes_.reserve(points_.size() / kLeafSize * 2 + 2);
    if (!points_.empty()) build(0, static_cast<std::uint32_t>(points_.size()));
  }

  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }
  const std::vector<Vec3>& points() const noexcept { return points_; }

  struct Neighbor {
    std::size_t index;
    double dist_sq;
  };

  /// Closest stored point; ties go to the lowest index.
  Neighbor nearest(const Vec3& q, std::size_t skip = std::numeric_limits<std::size_t>::max()) const {
    Neighbor best{std::numeric_limits<std::size_t>::max(), std::numeric_limits<double>::infinity()};
    if (!nodes_.empty()) nearest_rec(0, q, skip, best);
    return best;
  }

  /// Mean distance from each point to its nearest other point.
  double mean_spacing() const {
    if (points_.size() < 2) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < points_.size(); ++i) s += std::sqrt(nearest(points_[i], i).dist_sq);
    return s / static_cast<double>(points_.size());
  }

  /// Indices of all points with |p - q| <= r, ascending.
  std::vector<std::size_t> radius(const Vec3& q, double r) const {
    std::vector<std::size_t> out;
    if (!nodes_.empty()) radius_rec(0, q, r * r, out);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  static constexpr std::uint32_t kLeafSize = 8;

  struct Node {
    std::uint32_t begin, end;
    int axis = -1;  // -1 for leaves
    double split = 0.0;
    std::uint32_t left = 0, right = 0;
  };

  std::uint32_t build(std::uint32_t begin, std::uint32_t end) {
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back(Node{begin, end});
    if (end - begin <= kLeafSize) return id;
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
    for (std::uint32_t i = begin; i < end; ++i) {
      lo = lo.cwiseMin(points_[order_[i]]);
      hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                       return points_[a][axis] < points_[b][axis] || (points_[a][axis] == points_[b][axis] && a < b);
                     });
    const double split = points_[order_[mid]][axis];
    const std::uint32_t l = build(begin, mid);
    const std::uint32_t r = build(mid, end);
    nodes_[id].axis = axis;
    nodes_[id].split = split;
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  void nearest_rec(std::uint32_t id, const Vec3& q, std::size_t skip, Neighbor& best) const {
    const Node& n = nodes_[id];
    if (n.axis < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        const std::size_t idx = order_[i];
        if (idx == skip) continue;
        const double d = (points_[idx] - q).squaredNorm();
        if (d < best.dist_sq || (d == best.dist_sq && idx < best.index)) best = {idx, d};
      }
      return;
    }
    const double diff = q[n.axis] - n.split;
    const std::uint32_t first = diff < 0 ? n.left : n.right;
    const std::uint32_t second = diff < 0 ? n.right : n.left;
    nearest_rec(first, q, skip, best);
    if (diff * diff <= best.dist_sq) nearest_rec(second, q, skip, best);
  }

  void radius_rec(std::uint32_t id, const Vec3& q, double r2, std::vector<std::size_t>& out) const {
    const Node& n = nodes_[id];
    if (n.axis < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i)
        if ((points_[order_[i]] - q).squaredNorm() <= r2) out.push_back(order_[i]);
      return;
    }
    const double diff = q[n.axis] - n.split;
    if (diff <= 0 || diff * diff <= r2) radius_rec(n.left, q, r2, out);
    if (diff >= 0 || diff * diff <= r2) radius_rec(n.right, q, r2, out);
  }

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace tactile

#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>

#include "tactile/errors.hpp"

namespace tactile {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = 3.14159265358979323846;

/// A direction with unit Euclidean norm. Construction normalizes and rejects
/// vectors too short to carry a direction.
class UnitVec3 {
 public:
  UnitVec3() : v_(0.0, 0.0, 1.0) {}
  explicit UnitVec3(const Vec3& v) {
    const double n = v.norm();
    if (!(n > 1e-15) || !std::isfinite(n)) throw InvalidArgument("UnitVec3: zero or non-finite vector");
    v_ = v / n;
  }
  UnitVec3(double x, double y, double z) : UnitVec3(Vec3(x, y, z)) {}

  const Vec3& vec() const noexcept { return v_; }
  operator const Vec3&() const noexcept { return v_; }
  double x() const noexcept { return v_.x(); }
  double y() const noexcept { return v_.y(); }
  double z() const noexcept { return v_.z(); }
  double dot(const Vec3& o) const noexcept { return v_.dot(o); }
  UnitVec3 operator-() const { return UnitVec3(-v_); }

  bool operator==(const UnitVec3& o) const noexcept { return v_ == o.v_; }

 private:
  Vec3 v_;
};

/// Proper rigid motion x -> R x + t.
class RigidTransform {
 public:
  RigidTransform() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}

  /// Checked constructor: `rotation` must be orthonormal with det +1 (to `tol`).
  RigidTransform(const Mat3& rotation, const Vec3& translation, double tol = 1e-9)
      : rotation_(rotation), translation_(translation) {
    if (!is_rotation(rotation, tol)) throw InvalidArgument("RigidTransform: matrix is not a proper rotation");
  }

  static RigidTransform identity() { return {}; }
  static RigidTransform from_translation(const Vec3& t) { return unchecked(Mat3::Identity(), t); }
  static RigidTransform from_axis_angle(const Vec3& axis, double angle, const Vec3& t = Vec3::Zero()) {
    return unchecked(Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix(), t);
  }
  static RigidTransform from_quaternion(const Eigen::Quaterniond& q, const Vec3& t = Vec3::Zero()) {
    return unchecked(q.normalized().toRotationMatrix(), t);
  }
  /// Projects an approximately orthonormal matrix onto SO(3) first.
  static RigidTransform from_approx(const Mat3& r, const Vec3& t) { return unchecked(project_to_rotation(r), t); }

  const Mat3& rotation() const noexcept { return rotation_; }
  const Vec3& translation() const noexcept { return translation_; }

  Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }
  Vec3 rotate(const Vec3& v) const { return rotation_ * v; }
  UnitVec3 rotate(const UnitVec3& v) const { return UnitVec3(rotation_ * v.vec()); }

  RigidTransform operator*(const RigidTransform& o) const {
    return unchecked(rotation_ * o.rotation_, rotation_ * o.translation_ + translation_);
  }
  RigidTransform inverse() const {
    const Mat3 rt = rotation_.transpose();
    return unchecked(rt, -(rt * translation_));
  }
  RigidTransform orthonormalized() const { return from_approx(rotation_, translation_); }

  /// Geodesic angle between two rotations, radians.
  double angle_to(const RigidTransform& o) const {
    const double c = ((rotation_.transpose() * o.rotation_).trace() - 1.0) * 0.5;
    return std::acos(std::clamp(c, -1.0, 1.0));
  }

  static bool is_rotation(const Mat3& r, double tol) {
    return (r * r.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol && std::abs(r.determinant() - 1.0) <= tol;
  }

  static Mat3 project_to_rotation(const Mat3& r) {
    Eigen::JacobiSVD<Mat3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 d = Mat3::Identity();
    d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
    return svd.matrixU() * d * svd.matrixV().transpose();
  }

 private:
  static RigidTransform unchecked(const Mat3& r, const Vec3& t) {
    RigidTransform out;
    out.rotation_ = r;
    out.translation_ = t;
    return out;
  }

  Mat3 rotation_;
  Vec3 translation_;
};

/// Extrinsic x-y-z Euler angles (alpha about x, then beta about y, then gamma
/// about z, all in the fixed frame): R = Rz(gamma) Ry(beta) Rx(alpha).
inline Vec3 euler_xyz(const Mat3& r) {
  const double beta = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  const double alpha = std::atan2(r(2, 1), r(2, 2));
  const double gamma = std::atan2(r(1, 0), r(0, 0));
  return {alpha, beta, gamma};
}

inline Mat3 rotation_from_euler_xyz(const Vec3& e) {
  return (Eigen::AngleAxisd(e.z(), Vec3::UnitZ()) * Eigen::AngleAxisd(e.y(), Vec3::UnitY()) *
          Eigen::AngleAxisd(e.x(), Vec3::UnitX()))
      .toRotationMatrix();
}

/// Plane {x : n.x + h = 0}. For workspaces the normal points inward, so the
/// admissible side is n.x + h >= 0.
struct Plane {
  UnitVec3 normal;
  double offset = 0.0;

  double signed_distance(const Vec3& x) const { return normal.dot(x) + offset; }
};

struct RayHit {
  double k;
  Vec3 point;
};

/// Intersection of the ray w + k d (k >= 0) with a plane whose normal opposes
/// the ray (n.d < 0). Parallel, non-opposing and behind-origin cases return
/// nothing.
inline std::optional<RayHit> ray_plane_intersection(const Vec3& w, const UnitVec3& d, const Plane& plane) {
  const double nd = plane.normal.dot(d);
  if (std::abs(nd) < 1e-12 || nd >= 0.0) return std::nullopt;
  const double k = -(plane.normal.dot(w) + plane.offset) / nd;
  if (k < 0.0) return std::nullopt;
  return RayHit{k, w + k * d.vec()};
}

// ---------------------------------------------------------------------------
// Seeded randomness. Distributions are written out here rather than taken from
// <random> so that sequences are identical across standard library vendors.

using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

inline double standard_normal(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

/// Uniform index in [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::min<std::size_t>(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
}

/// Haar-uniform rotation (Shoemake's subgroup algorithm).
inline Mat3 random_rotation(Rng& rng) {
  const double u1 = uniform01(rng), u2 = uniform01(rng), u3 = uniform01(rng);
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  Eigen::Quaterniond q(b * std::cos(2 * kPi * u3), a * std::sin(2 * kPi * u2), a * std::cos(2 * kPi * u2),
                       b * std::sin(2 * kPi * u3));
  return q.normalized().toRotationMatrix();
}

/// Deterministic seed derivation for independent streams (splitmix64 step).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace tactile

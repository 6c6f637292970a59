#pragma once

#include <array>
#include <string>
#include <string_view>

#include "tactile/environment.hpp"
#include "tactile/geometry.hpp"
#include "tactile/point_cloud.hpp"

namespace tactile {

inline constexpr int kTouchBits = 20;
inline constexpr int kStateDim = 38;

/// Which observation blocks feed the policy. Disabled blocks are zero-filled
/// so the vector width never changes.
struct StateMask {
  bool boundary = true;
  bool fingers = true;
  bool touch = true;
  bool rotation = true;
  bool memory = true;

  /// Parses names such as "BFTRM", "FTRM", "BFTR" (any subset of B,F,T,R,M).
  static StateMask parse(std::string_view s) {
    StateMask m{false, false, false, false, false};
    for (char c : s) {
      switch (c) {
        case 'B': m.boundary = true; break;
        case 'F': m.fingers = true; break;
        case 'T': m.touch = true; break;
        case 'R': m.rotation = true; break;
        case 'M': m.memory = true; break;
        default: throw InvalidArgument("state mask: unknown block '" + std::string(1, c) + "'");
      }
    }
    if (s.empty()) throw InvalidArgument("state mask: empty");
    return m;
  }

  std::string name() const {
    std::string s;
    if (boundary) s += 'B';
    if (fingers) s += 'F';
    if (touch) s += 'T';
    if (rotation) s += 'R';
    if (memory) s += 'M';
    return s;
  }

  int enabled_width() const {
    return 5 * fingers + 3 * rotation + kTouchBits * touch + 6 * boundary + 4 * memory;
  }
};

/// Layout: F[0,5) R[5,8) T[8,28) B[28,34) M[34,38).
struct StateVector {
  std::array<double, kFingers> fingers{};
  Vec3 rotation = Vec3::Zero();
  std::array<bool, kTouchBits> touch{};
  std::array<double, 6> boundary{};
  std::array<double, 4> memory{};
  StateMask mask;

  std::array<double, kStateDim> flatten() const {
    std::array<double, kStateDim> v{};
    for (int i = 0; i < 5; ++i) v[i] = mask.fingers ? fingers[i] : 0.0;
    for (int i = 0; i < 3; ++i) v[5 + i] = mask.rotation ? rotation[i] : 0.0;
    for (int i = 0; i < kTouchBits; ++i) v[8 + i] = (mask.touch && touch[i]) ? 1.0 : 0.0;
    for (int i = 0; i < 6; ++i) v[28 + i] = mask.boundary ? boundary[i] : 0.0;
    for (int i = 0; i < 4; ++i) v[34 + i] = mask.memory ? memory[i] : 0.0;
    return v;
  }
};

struct FeatureConfig {
  double memory_radius = 0.08;
  double memory_cell = 0.01;
  double boundary_cap = 0.5;
};

/// Per finger (tip, bottom, left, right); the top patch is folded into tip.
inline std::array<bool, kTouchBits> touch_state(const std::array<bool, kPatches>& flags) {
  std::array<bool, kTouchBits> t{};
  for (int f = 0; f < kFingers; ++f) {
    const bool* p = &flags[f * kPatchesPerFinger];
    t[4 * f + 0] = p[static_cast<int>(Patch::Tip)] || p[static_cast<int>(Patch::Top)];
    t[4 * f + 1] = p[static_cast<int>(Patch::Bottom)];
    t[4 * f + 2] = p[static_cast<int>(Patch::Left)];
    t[4 * f + 3] = p[static_cast<int>(Patch::Right)];
  }
  return t;
}

/// Free travel along each wrist translation direction (+x, -x, +y, -y, +z, -z)
/// before the first opposing boundary plane, capped at `cap`.
inline std::array<double, 6> boundary_distances(const Vec3& w, const Mat3& wrist_rotation, const std::vector<Plane>& planes,
                                                double cap) {
  for (const auto& p : planes)
    if (p.signed_distance(w) < 0.0) throw ContractViolation("boundary_distances: wrist outside workspace");
  std::array<double, 6> d{};
  for (int a = 0; a < 6; ++a) {
    const UnitVec3 dir(wrist_rotation * action_axis(static_cast<ActionId>(a)));
    double best = cap;
    for (const auto& p : planes)
      if (auto hit = ray_plane_intersection(w, dir, p)) best = std::min(best, hit->k);
    d[a] = best;
  }
  return d;
}

/// Summed positive projections of the voxelized nearby contacts (relative to
/// the wrist) onto the LEFT, RIGHT, UP, DOWN wrist directions.
inline std::array<double, 4> local_contact_memory(const ContactCloud& contacts, const Vec3& w, const Mat3& wrist_rotation,
                                                  double radius, double cell) {
  if (!(radius > 0.0) || !(cell > 0.0)) throw InvalidArgument("local_contact_memory: radius and cell must be positive");
  VoxelGrid grid(cell);
  for (const auto& p : contacts.points()) {
    const Vec3 rel = p - w;
    if (rel.norm() < radius) grid.insert(rel);
  }
  const std::array<ActionId, 4> dirs = {kLeft, kRight, kUp, kDown};
  std::array<double, 4> m{};
  for (const auto& c : grid.centroids()) {
    for (int i = 0; i < 4; ++i) {
      const double proj = c.dot(wrist_rotation * action_axis(dirs[i]));
      if (proj > 0.0) m[i] += proj;
    }
  }
  return m;
}

inline StateVector assemble_state(const EpisodeState& s, const Workspace& ws, const FeatureConfig& cfg,
                                  const StateMask& mask) {
  StateVector v;
  v.mask = mask;
  v.fingers = s.bent_q;
  const Mat3& r = s.hand.wrist.rotation();
  v.rotation = euler_xyz(s.start_wrist.rotation().transpose() * r);
  v.touch = touch_state(s.touch);
  const Vec3& w = s.hand.wrist.translation();
  v.boundary = boundary_distances(w, r, ws.planes, cfg.boundary_cap);
  v.memory = local_contact_memory(s.contacts, w, r, cfg.memory_radius, cfg.memory_cell);
  return v;
}

}  // namespace tactile

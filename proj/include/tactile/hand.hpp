#pragma once

#include <array>
#include <cmath>
#include <string_view>

#include "tactile/geometry.hpp"
#include "tactile/mesh.hpp"

namespace tactile {

inline constexpr int kFingers = 5;
inline constexpr int kPatchesPerFinger = 5;
inline constexpr int kPatches = kFingers * kPatchesPerFinger;

enum class Finger : int { Thumb = 0, Index, Middle, Ring, Little };
enum class Patch : int { Tip = 0, Bottom, Left, Right, Top };

inline constexpr int patch_slot(int finger, Patch p) { return finger * kPatchesPerFinger + static_cast<int>(p); }

/// The twelve wrist-frame motions. Translations first (in the order the
/// boundary observation uses), then rotations.
enum class ActionId : int {
  TranslateXPos = 0,
  TranslateXNeg,
  TranslateYPos,
  TranslateYNeg,
  TranslateZPos,
  TranslateZNeg,
  RotateXPos,
  RotateXNeg,
  RotateYPos,
  RotateYNeg,
  RotateZPos,
  RotateZNeg,
};
inline constexpr int kActions = 12;

// Lateral names used by the memory observation and the grid baseline.
inline constexpr ActionId kLeft = ActionId::TranslateXPos;
inline constexpr ActionId kRight = ActionId::TranslateXNeg;
inline constexpr ActionId kUp = ActionId::TranslateYPos;
inline constexpr ActionId kDown = ActionId::TranslateYNeg;

inline constexpr std::array<std::string_view, kActions> kActionNames = {
    "+tx", "-tx", "+ty", "-ty", "+tz", "-tz", "+rx", "-rx", "+ry", "-ry", "+rz", "-rz"};

inline std::string_view action_name(ActionId a) { return kActionNames[static_cast<std::size_t>(a)]; }

inline ActionId opposite(ActionId a) { return static_cast<ActionId>(static_cast<int>(a) ^ 1); }
inline bool is_translation(ActionId a) { return static_cast<int>(a) < 6; }

/// Unit direction of a translation action, or rotation axis of a rotation
/// action, in the wrist frame (sign included).
inline Vec3 action_axis(ActionId a) {
  const int i = static_cast<int>(a);
  Vec3 v = Vec3::Zero();
  v[(i % 6) / 2] = (i % 2 == 0) ? 1.0 : -1.0;
  return v;
}

struct SensorPatch {
  Vec3 center;      // distal-link frame
  UnitVec3 normal;  // outward, distal-link frame
  double radius = 0.004;
};

/// One finger: a revolute joint about the base x axis followed by a passive
/// joint coupled at `coupling * q`. Links run along +y; positive q curls the
/// finger toward +z (the palm side).
struct FingerSpec {
  RigidTransform base;  // in wrist frame
  double l1 = 0.035;
  double l2 = 0.025;
  double coupling = 0.7;
  double q_max = 1.3;
  std::array<SensorPatch, kPatchesPerFinger> patches{};
};

struct HandConfig {
  double l1 = 0.035;
  double l2 = 0.025;
  double coupling = 0.7;
  double q_max = 1.3;
  double patch_radius = 0.004;
  double finger_radius = 0.007;
  double step_translation = 0.005;
  double step_rotation = 0.1;
  double bend_increment = 0.02;
  double finger_spacing = 0.018;
  double palm_length = 0.04;
};

/// Finger geometry for a right hand in its wrist frame: x lateral (thumb side
/// is +x), y toward the fingertips, z out of the palm.
inline std::array<FingerSpec, kFingers> make_fingers(const HandConfig& cfg) {
  if (!(cfg.q_max > 0.0 && cfg.q_max <= kPi / 2)) throw InvalidArgument("hand: q_max must be in (0, pi/2]");
  if (!(cfg.patch_radius > 0.0)) throw InvalidArgument("hand: patch radius must be positive");
  if (!(cfg.l1 > 0.0 && cfg.l2 > 0.0)) throw InvalidArgument("hand: link lengths must be positive");
  const double rf = cfg.finger_radius, mid = 0.5 * cfg.l2;
  std::array<SensorPatch, kPatchesPerFinger> patches = {{
      {Vec3(0, cfg.l2, 0), UnitVec3(0, 1, 0), cfg.patch_radius},
      {Vec3(0, mid, rf), UnitVec3(0, 0, 1), cfg.patch_radius},
      {Vec3(rf, mid, 0), UnitVec3(1, 0, 0), cfg.patch_radius},
      {Vec3(-rf, mid, 0), UnitVec3(-1, 0, 0), cfg.patch_radius},
      {Vec3(0, mid, -rf), UnitVec3(0, 0, -1), cfg.patch_radius},
  }};
  std::array<FingerSpec, kFingers> out;
  for (auto& f : out) {
    f.l1 = cfg.l1;
    f.l2 = cfg.l2;
    f.coupling = cfg.coupling;
    f.q_max = cfg.q_max;
    f.patches = patches;
  }
  // Thumb: same two-link template, mounted on the +x side of the palm and
  // splayed outward by 60 degrees.
  out[0].base = RigidTransform::from_axis_angle(Vec3::UnitZ(), -kPi / 3, Vec3(2.5 * cfg.finger_spacing, 0.0, 0.0));
  for (int i = 1; i < kFingers; ++i)
    out[i].base = RigidTransform::from_translation(Vec3((2.5 - i) * cfg.finger_spacing, cfg.palm_length, 0.0));
  return out;
}

struct HandState {
  RigidTransform wrist;
  std::array<double, kFingers> q{};
  std::array<bool, kPatches> touch{};
};

struct PatchPose {
  Vec3 center;
  UnitVec3 normal;
};

struct FingerFrames {
  RigidTransform proximal;  // after the actuated joint
  RigidTransform distal;    // after the passive joint
};

struct HandPose {
  std::array<FingerFrames, kFingers> fingers;
  std::array<PatchPose, kPatches> patches;
};

inline FingerFrames finger_frames(const RigidTransform& wrist, const FingerSpec& f, double q) {
  const RigidTransform proximal = wrist * f.base * RigidTransform::from_axis_angle(Vec3::UnitX(), q);
  const RigidTransform distal =
      proximal * RigidTransform::from_axis_angle(Vec3::UnitX(), f.coupling * q, Vec3(0.0, f.l1, 0.0));
  return {proximal, distal};
}

inline PatchPose patch_pose(const FingerFrames& frames, const SensorPatch& p) {
  return {frames.distal.apply(p.center), frames.distal.rotate(p.normal)};
}

class Hand {
 public:
  Hand() : Hand(HandConfig{}) {}
  explicit Hand(const HandConfig& cfg) : cfg_(cfg), fingers_(make_fingers(cfg)) {}
  Hand(const HandConfig& cfg, const std::array<FingerSpec, kFingers>& fingers) : cfg_(cfg), fingers_(fingers) {}

  const HandConfig& config() const noexcept { return cfg_; }
  const std::array<FingerSpec, kFingers>& fingers() const noexcept { return fingers_; }

  void validate(const HandState& s) const {
    for (int i = 0; i < kFingers; ++i)
      if (!(s.q[i] >= 0.0 && s.q[i] <= fingers_[i].q_max + 1e-12))
        throw InvalidArgument("hand: joint angle out of range for finger " + std::to_string(i));
  }

  HandPose forward_kinematics(const HandState& s) const {
    validate(s);
    HandPose pose;
    for (int i = 0; i < kFingers; ++i) {
      pose.fingers[i] = finger_frames(s.wrist, fingers_[i], s.q[i]);
      for (int p = 0; p < kPatchesPerFinger; ++p)
        pose.patches[i * kPatchesPerFinger + p] = patch_pose(pose.fingers[i], fingers_[i].patches[p]);
    }
    return pose;
  }

  /// Moves the wrist by a step expressed in its own frame; joints untouched.
  HandState apply_action(const HandState& s, ActionId a) const {
    return apply_action(s, a, cfg_.step_translation, cfg_.step_rotation);
  }
  static HandState apply_action(const HandState& s, ActionId a, double dt, double dr) {
    HandState out = s;
    const Vec3 axis = action_axis(a);
    const RigidTransform motion = is_translation(a) ? RigidTransform::from_translation(dt * axis)
                                                    : RigidTransform::from_axis_angle(axis, dr);
    out.wrist = s.wrist * motion;
    return out;
  }

  /// Per-finger touch flags at joint angle q.
  std::array<bool, kPatchesPerFinger> finger_touch(const RigidTransform& wrist, int finger, double q,
                                                   const TriMesh& object) const {
    const auto frames = finger_frames(wrist, fingers_[finger], q);
    std::array<bool, kPatchesPerFinger> hit{};
    for (int p = 0; p < kPatchesPerFinger; ++p) {
      const auto& patch = fingers_[finger].patches[p];
      hit[p] = object.within(frames.distal.apply(patch.center), patch.radius);
    }
    return hit;
  }

  /// Each finger curls in increments of `dq` until one of its patches touches
  /// the object or it reaches its bend limit. Fingers already touching stay put.
  HandState bend_fingers_until_contact(const HandState& s, const TriMesh& object, double dq) const {
    if (!(dq > 0.0)) throw InvalidArgument("bend_fingers_until_contact: increment must be positive");
    validate(s);
    HandState out = s;
    for (int i = 0; i < kFingers; ++i) {
      double q = s.q[i];
      if (out_of_reach(s.wrist, i, object)) {
        out.q[i] = fingers_[i].q_max;
        for (int p = 0; p < kPatchesPerFinger; ++p) out.touch[i * kPatchesPerFinger + p] = false;
        continue;
      }
      auto hit = finger_touch(s.wrist, i, q, object);
      while (!any(hit) && q < fingers_[i].q_max) {
        q = std::min(q + dq, fingers_[i].q_max);
        hit = finger_touch(s.wrist, i, q, object);
      }
      out.q[i] = q;
      for (int p = 0; p < kPatchesPerFinger; ++p) out.touch[i * kPatchesPerFinger + p] = hit[p];
    }
    return out;
  }
  HandState bend_fingers_until_contact(const HandState& s, const TriMesh& object) const {
    return bend_fingers_until_contact(s, object, cfg_.bend_increment);
  }

  static HandState open_fingers(const HandState& s) {
    HandState out = s;
    out.q.fill(0.0);
    out.touch.fill(false);
    return out;
  }

  /// True when no patch can reach the object at any joint angle: the object
  /// is farther from the actuated joint than the finger's full extent.
  bool out_of_reach(const RigidTransform& wrist, int finger, const TriMesh& object) const {
    const auto& f = fingers_[finger];
    double extent = 0.0;
    for (const auto& p : f.patches) extent = std::max(extent, p.center.norm() + p.radius);
    const Vec3 joint = (wrist * f.base).translation();
    return !object.within(joint, f.l1 + extent + 1e-9);
  }

 private:
  static bool any(const std::array<bool, kPatchesPerFinger>& a) {
    for (bool b : a)
      if (b) return true;
    return false;
  }

  HandConfig cfg_;
  std::array<FingerSpec, kFingers> fingers_;
};

}  // namespace tactile

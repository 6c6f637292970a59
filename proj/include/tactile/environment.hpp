#pragma once

#include <array>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "tactile/geometry.hpp"
#include "tactile/hand.hpp"
#include "tactile/mesh.hpp"
#include "tactile/point_cloud.hpp"

namespace tactile {

/// Convex region bounded by inward-facing planes (n.x + h >= 0 inside) plus
/// limits on the wrist's Euler angles relative to its exploration start.
struct Workspace {
  std::vector<Plane> planes;
  Vec3 orientation_limits = Vec3::Constant(1.0);

  static Workspace box(const Vec3& lo, const Vec3& hi, double orientation_limit = 1.0) {
    if (!(lo.array() < hi.array()).all()) throw InvalidArgument("Workspace::box: empty box");
    Workspace ws;
    for (int a = 0; a < 3; ++a) {
      Vec3 n = Vec3::Zero();
      n[a] = 1.0;
      ws.planes.push_back({UnitVec3(n), -lo[a]});
      ws.planes.push_back({UnitVec3(-n), hi[a]});
    }
    ws.orientation_limits = Vec3::Constant(orientation_limit);
    return ws;
  }

  bool contains(const Vec3& w) const {
    for (const auto& p : planes)
      if (p.signed_distance(w) < 0.0) return false;
    return true;
  }

  bool orientation_ok(const Vec3& euler) const { return (euler.cwiseAbs().array() <= orientation_limits.array()).all(); }
};

struct EnvConfig {
  HandConfig hand;
  Workspace workspace = Workspace::box(Vec3(-0.30, -0.15, -0.20), Vec3(-0.02, 0.15, 0.12));
  Vec3 object_center = Vec3::Zero();
  double object_jitter = 0.01;        // meters, per axis
  double start_distance = 0.15;       // palm-to-center distance before approach
  double start_reach_offset = 0.065;  // wrist sits below the finger sweep region
  double start_lateral_jitter = 0.01;
  double start_rotation_jitter = 0.15;
  int max_approach_steps = 60;
  int horizon = 400;
  int lost_contact_limit = 5;
};

/// Wrist orientation for an explorer on the -x side facing +x, fingers up.
inline Mat3 explorer_nominal_rotation() {
  Mat3 r;
  r.col(0) = Vec3(0, 1, 0);
  r.col(1) = Vec3(0, 0, 1);
  r.col(2) = Vec3(1, 0, 0);
  return r;
}

enum class Phase { Init, Hold, Explore };
enum class TerminationReason { None, Boundary, LostContact, Horizon };

inline std::string_view to_string(TerminationReason r) {
  switch (r) {
    case TerminationReason::Boundary: return "boundary";
    case TerminationReason::LostContact: return "lost_contact";
    case TerminationReason::Horizon: return "horizon";
    default: return "none";
  }
}

struct ContactRecord {
  Vec3 point;       // closest object surface point
  UnitVec3 normal;  // estimated outward surface normal
  int finger = 0;
  int patch = 0;
};

struct ObjectModel {
  std::string name;
  TriMesh mesh;  // object frame
};

struct EpisodeState {
  HandState hand;
  RigidTransform start_wrist;  // wrist pose when exploration began
  std::shared_ptr<const ObjectModel> model;
  std::shared_ptr<const TriMesh> object;  // model placed at gt_pose, base frame
  RigidTransform gt_pose;
  ContactCloud contacts;
  int t = 0;
  int no_contact_streak = 0;
  Phase phase = Phase::Init;
  bool terminated = false;
  TerminationReason reason = TerminationReason::None;
  // Snapshot taken after bending and before reopening.
  std::array<double, kFingers> bent_q{};
  std::array<bool, kPatches> touch{};
};

struct StepOutcome {
  std::vector<ContactRecord> touches;
  bool terminated = false;
  TerminationReason reason = TerminationReason::None;
};

class TactileEnv {
 public:
  TactileEnv() : TactileEnv(EnvConfig{}) {}
  explicit TactileEnv(EnvConfig cfg) : cfg_(std::move(cfg)), hand_(cfg_.hand) {}

  const EnvConfig& config() const noexcept { return cfg_; }
  const Hand& hand() const noexcept { return hand_; }
  const Workspace& workspace() const noexcept { return cfg_.workspace; }

  /// One record per patch whose center lies within its radius of the mesh.
  std::vector<ContactRecord> contact_query(const HandState& s, const TriMesh& mesh) const {
    std::vector<ContactRecord> out;
    const auto pose = hand_.forward_kinematics(s);
    for (int i = 0; i < kFingers; ++i) {
      for (int p = 0; p < kPatchesPerFinger; ++p) {
        const auto& patch = pose.patches[i * kPatchesPerFinger + p];
        const double r = hand_.fingers()[i].patches[p].radius;
        if (!mesh.within(patch.center, r)) continue;
        const auto cp = mesh.closest_point(patch.center);
        UnitVec3 n = -patch.normal;
        if (n.dot(mesh.face_normals()[cp.face]) < 0.0) n = -n;
        out.push_back({cp.point, n, i, p});
      }
    }
    return out;
  }

  /// Places the object at a seeded pose (then holds it fixed) and advances the
  /// explorer along its palm axis until a finger first touches.
  EpisodeState reset(std::shared_ptr<const ObjectModel> model, std::uint64_t seed) const {
    if (!model || model->mesh.empty()) throw InvalidArgument("reset: empty object");
    Rng rng(seed);
    EpisodeState s;
    s.model = model;
    const Vec3 jitter(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    s.gt_pose = RigidTransform::from_approx(random_rotation(rng), cfg_.object_center + cfg_.object_jitter * jitter);
    s.object = std::make_shared<const TriMesh>(model->mesh.transformed(s.gt_pose));
    s.phase = Phase::Hold;

    const Vec3 axis(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    const double angle = uniform(rng, -cfg_.start_rotation_jitter, cfg_.start_rotation_jitter);
    Mat3 rot = explorer_nominal_rotation();
    if (axis.norm() > 1e-9) rot = Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix() * rot;
    const Vec3 lateral = cfg_.start_lateral_jitter *
                         (uniform(rng, -1, 1) * rot.col(0) + uniform(rng, -1, 1) * rot.col(1));
    const Vec3 start = cfg_.object_center - cfg_.start_distance * rot.col(2) - cfg_.start_reach_offset * rot.col(1) + lateral;
    HandState h;
    h.wrist = RigidTransform(rot, start, 1e-9);
    if (!cfg_.workspace.contains(start)) throw InitializationError("reset: start pose outside workspace");

    for (int k = 0; k <= cfg_.max_approach_steps; ++k) {
      if (k > 0) h = Hand::apply_action(h, ActionId::TranslateZPos, cfg_.hand.step_translation, 0.0);
      if (!cfg_.workspace.contains(h.wrist.translation()))
        throw InitializationError("reset: approach left the workspace without touching the object");
      const HandState bent = hand_.bend_fingers_until_contact(h, *s.object);
      const auto touches = contact_query(bent, *s.object);
      if (touches.empty()) continue;
      s.hand = Hand::open_fingers(bent);
      s.start_wrist = h.wrist;
      for (const auto& c : touches) s.contacts.push_back(c.point, c.normal, 0);
      s.bent_q = bent.q;
      s.touch = bent.touch;
      s.phase = Phase::Explore;
      return s;
    }
    throw InitializationError("reset: no contact within the approach budget");
  }

  /// apply action -> boundary check -> bend -> record contacts -> snapshot ->
  /// reopen -> advance time and reset-condition counters.
  StepOutcome step(EpisodeState& s, ActionId a) const {
    if (s.terminated || s.phase != Phase::Explore) throw ContractViolation("step: episode is not in an explorable state");
    StepOutcome out;
    const HandState moved = hand_.apply_action(s.hand, a);
    const Vec3 euler = euler_xyz(s.start_wrist.rotation().transpose() * moved.wrist.rotation());
    ++s.t;
    if (!cfg_.workspace.contains(moved.wrist.translation()) || !cfg_.workspace.orientation_ok(euler)) {
      s.bent_q.fill(0.0);
      s.touch.fill(false);
      finish(s, out, TerminationReason::Boundary);
      return out;
    }
    const HandState bent = hand_.bend_fingers_until_contact(moved, *s.object);
    out.touches = contact_query(bent, *s.object);
    for (const auto& c : out.touches) s.contacts.push_back(c.point, c.normal, s.t);
    s.bent_q = bent.q;
    s.touch = bent.touch;
    s.hand = Hand::open_fingers(bent);

    s.no_contact_streak = out.touches.empty() ? s.no_contact_streak + 1 : 0;
    if (s.no_contact_streak > cfg_.lost_contact_limit) finish(s, out, TerminationReason::LostContact);
    else if (s.t >= cfg_.horizon) finish(s, out, TerminationReason::Horizon);
    return out;
  }

 private:
  static void finish(EpisodeState& s, StepOutcome& out, TerminationReason r) {
    s.terminated = true;
    s.reason = r;
    out.terminated = true;
    out.reason = r;
  }

  EnvConfig cfg_;
  Hand hand_;
};

}  // namespace tactile

#pragma once

#include <array>
#include <cmath>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "tactile/environment.hpp"
#include "tactile/features.hpp"
#include "tactile/pose_estimation.hpp"

namespace tactile {

/// Which reward terms are active: (T)ouch, short (M)emory, curiosity
/// (B)onus, (P)ose feedback. Touch is always on.
struct RewardVariant {
  bool memory = true;
  bool bonus = true;
  bool pose = true;

  static RewardVariant parse(std::string_view s) {
    if (s.empty() || s.front() != 'T') throw InvalidArgument("reward variant must start with 'T': " + std::string(s));
    RewardVariant v{false, false, false};
    for (char c : s.substr(1)) {
      switch (c) {
        case 'M': v.memory = true; break;
        case 'B': v.bonus = true; break;
        case 'P': v.pose = true; break;
        default: throw InvalidArgument("reward variant: unknown term '" + std::string(1, c) + "'");
      }
    }
    return v;
  }

  std::string name() const {
    std::string s = "T";
    if (memory) s += 'M';
    if (bonus) s += 'B';
    if (pose) s += 'P';
    return s;
  }
};

struct RewardConfig {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 5.0;
  double memory_penalty = -1.0;  // R_M
  int period = 50;               // C
  int history = 20;              // k
  double visit_cell = 0.005;
  double orientation_bin = 0.2;
  RewardVariant variant;

  void validate() const {
    if (period < 1) throw InvalidArgument("reward: period C must be >= 1");
    if (!(memory_penalty < 0.0)) throw InvalidArgument("reward: memory penalty must be negative");
    if (history < 1) throw InvalidArgument("reward: history length must be >= 1");
    if (!(visit_cell > 0.0 && orientation_bin > 0.0)) throw InvalidArgument("reward: discretization must be positive");
  }
};

/// Discretized wrist pose: position cell and Euler-angle bins relative to the
/// exploration start frame.
using PoseKey = std::array<std::int64_t, 6>;

inline PoseKey discretize_pose(const RigidTransform& wrist, const RigidTransform& start, double cell, double bin) {
  const Vec3& p = wrist.translation();
  const Vec3 e = euler_xyz(start.rotation().transpose() * wrist.rotation());
  auto q = [](double x, double s) { return static_cast<std::int64_t>(std::floor(x / s)); };
  return {q(p.x(), cell), q(p.y(), cell), q(p.z(), cell), q(e.x(), bin), q(e.y(), bin), q(e.z(), bin)};
}

/// Visit counts per (finger, position cell). A cell seen for the first time
/// counts as 1.
class VisitTable {
 public:
  explicit VisitTable(double cell = 0.005) : cell_(cell) {}

  CellIndex cell_of(const Vec3& p) const {
    return {static_cast<std::int64_t>(std::floor(p.x() / cell_)), static_cast<std::int64_t>(std::floor(p.y() / cell_)),
            static_cast<std::int64_t>(std::floor(p.z() / cell_))};
  }

  /// Current count (1 if never visited).
  std::int64_t count(int finger, const Vec3& p) const {
    auto it = counts_.find({finger, cell_of(p)});
    return it == counts_.end() ? 1 : it->second;
  }

  /// Returns 1/N with N read before incrementing.
  double curiosity_bonus(int finger, const Vec3& p) {
    auto [it, inserted] = counts_.try_emplace({finger, cell_of(p)}, 1);
    const double bonus = 1.0 / static_cast<double>(it->second);
    ++it->second;
    return bonus;
  }

  std::size_t size() const noexcept { return counts_.size(); }

 private:
  double cell_;
  std::map<std::pair<int, CellIndex>, std::int64_t> counts_;
};

/// Ring of the last k (pose, action) pairs.
class HistoryBuffer {
 public:
  explicit HistoryBuffer(std::size_t k = 20) : capacity_(k) {}

  bool contains(const PoseKey& pose, ActionId a) const {
    for (const auto& [p, act] : items_)
      if (act == a && p == pose) return true;
    return false;
  }
  void push(const PoseKey& pose, ActionId a) {
    items_.emplace_back(pose, a);
    while (items_.size() > capacity_) items_.pop_front();
  }
  std::size_t size() const noexcept { return items_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }

 private:
  std::size_t capacity_;
  std::deque<std::pair<PoseKey, ActionId>> items_;
};

/// True iff the (pose, action) pair is already in the history.
inline bool memory_check(const HistoryBuffer& h, const PoseKey& pose, ActionId a) { return h.contains(pose, a); }

inline double touch_reward(const std::array<bool, kTouchBits>& t, int finger) {
  for (int s = 0; s < 4; ++s)
    if (t[4 * finger + s]) return 1.0;
  return 0.0;
}

struct RewardBreakdown {
  std::array<double, kFingers> per_finger{};
  std::array<double, kFingers> touch{};
  std::array<double, kFingers> bonus{};
  bool repeated = false;
  double pose = 0.0;
  double total = 0.0;
};

/// Per-step inputs for the reward: touch bits, where each touching finger
/// made contact, whether (pose, action) repeats, and the pose feedback value.
struct RewardInputs {
  std::array<bool, kTouchBits> touch{};
  std::array<std::optional<Vec3>, kFingers> finger_position{};
  bool repeated = false;
  double pose_feedback = 0.0;
};

/// Per finger: no touch -> 0; repeated (pose, action) -> R_M; otherwise
/// alpha * R_T + beta * R_B with the visit count bumped. Total is the finger
/// mean plus gamma * R_p.
inline RewardBreakdown step_reward(const RewardInputs& in, const RewardConfig& cfg, VisitTable& visits) {
  RewardBreakdown out;
  const double beta = cfg.variant.bonus ? cfg.beta : 0.0;
  const double gamma = cfg.variant.pose ? cfg.gamma : 0.0;
  const bool repeated = cfg.variant.memory && in.repeated;
  out.repeated = repeated;
  double sum = 0.0;
  for (int f = 0; f < kFingers; ++f) {
    const double rt = touch_reward(in.touch, f);
    out.touch[f] = rt;
    if (rt == 0.0) continue;
    if (repeated) {
      out.per_finger[f] = cfg.memory_penalty;
    } else {
      const double rb = cfg.variant.bonus && in.finger_position[f] ? visits.curiosity_bonus(f, *in.finger_position[f]) : 0.0;
      out.bonus[f] = rb;
      out.per_finger[f] = cfg.alpha * rt + beta * rb;
    }
    sum += out.per_finger[f];
  }
  out.pose = cfg.variant.pose ? in.pose_feedback : 0.0;
  out.total = sum / kFingers + gamma * out.pose;
  return out;
}

/// Pose-estimation feedback: the AUC of ADD-S of the pipeline run on the
/// current contacts, on steps where t mod C == 0; zero otherwise and whenever
/// the cloud is degenerate or reconstruction/registration fails.
inline double pose_feedback(const ContactCloud& contacts, const TriMesh& model, const RigidTransform& gt, int t, int period,
                            const Vec3& view_start, const Vec3& view_center, const PipelineConfig& cfg) {
  if (period < 1) throw InvalidArgument("pose_feedback: period must be >= 1");
  if (t % period != 0) return 0.0;
  try {
    return estimate_pose(contacts, model, view_start, view_center, cfg, gt).estimate.auc;
  } catch (const ReconstructionFailed&) {
    return 0.0;
  } catch (const RegistrationFailed&) {
    return 0.0;
  }
}

/// Mean touching-patch contact point per finger from one step's records.
inline std::array<std::optional<Vec3>, kFingers> finger_contact_positions(const std::vector<ContactRecord>& touches) {
  std::array<Vec3, kFingers> sum;
  std::array<int, kFingers> n{};
  for (auto& s : sum) s.setZero();
  for (const auto& c : touches) {
    sum[c.finger] += c.point;
    ++n[c.finger];
  }
  std::array<std::optional<Vec3>, kFingers> out{};
  for (int f = 0; f < kFingers; ++f)
    if (n[f] > 0) out[f] = sum[f] / n[f];
  return out;
}

/// Per-episode reward state (visit table and history) following the
/// training loop's order: read history, score fingers, then record the pair.
class RewardTracker {
 public:
  explicit RewardTracker(const RewardConfig& cfg)
      : cfg_(cfg), visits_(cfg.visit_cell), history_(static_cast<std::size_t>(cfg.history)) {
    cfg_.validate();
  }

  /// `pose_before` is the wrist pose the action was taken from.
  RewardBreakdown step(const RigidTransform& pose_before, const RigidTransform& start, ActionId a,
                       const std::array<bool, kTouchBits>& touch, const std::vector<ContactRecord>& touches,
                       double pose_value) {
    const PoseKey key = discretize_pose(pose_before, start, cfg_.visit_cell, cfg_.orientation_bin);
    RewardInputs in;
    in.touch = touch;
    in.finger_position = finger_contact_positions(touches);
    in.repeated = memory_check(history_, key, a);
    in.pose_feedback = pose_value;
    auto out = step_reward(in, cfg_, visits_);
    history_.push(key, a);
    return out;
  }

  const RewardConfig& config() const noexcept { return cfg_; }
  const VisitTable& visits() const noexcept { return visits_; }
  const HistoryBuffer& history() const noexcept { return history_; }

 private:
  RewardConfig cfg_;
  VisitTable visits_;
  HistoryBuffer history_;
};

}  // namespace tactile

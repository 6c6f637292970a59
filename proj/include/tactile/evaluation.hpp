#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "tactile/training.hpp"

namespace tactile {

/// What drives a rollout.
struct PolicySource {
  enum class Kind { Network, Grid, Random };
  Kind kind = Kind::Grid;
  std::shared_ptr<const Checkpoint> checkpoint;
  std::string label = "grid";

  static PolicySource grid() { return {Kind::Grid, nullptr, "grid"}; }
  static PolicySource random() { return {Kind::Random, nullptr, "random"}; }
  static PolicySource network(std::shared_ptr<const Checkpoint> c, std::string label) {
    return {Kind::Network, std::move(c), std::move(label)};
  }
};

struct EvalConfig {
  EnvConfig env;
  FeatureConfig features;
  StateMask mask;
  PipelineConfig pipeline;
  GridSearchConfig grid;
  std::vector<int> hidden{64, 64};
  int trials = 4;
  int cap = 150;
  double iou_cell = 0.01;
  std::uint64_t seed = 0;
  bool greedy = true;  // argmax actions; false samples from the policy
  std::optional<RewardConfig> reward;  // when set, steps carry a reward breakdown
};

struct RolloutStep {
  int t = 0;
  ActionId action{};
  std::vector<ContactRecord> touches;
  StateVector state;  // observation the action was chosen from
  RigidTransform wrist;
  std::array<double, kFingers> q{};
  std::array<bool, kTouchBits> touch{};
  std::optional<RewardBreakdown> reward;
  bool terminated = false;
  TerminationReason reason = TerminationReason::None;
};

struct RolloutResult {
  EpisodeState final;
  int steps = 0;
  double iou = 0.0;
  double auc = 0.0;
};

inline std::optional<Vec3> mean_normal(const std::vector<ContactRecord>& touches) {
  if (touches.empty()) return std::nullopt;
  Vec3 n = Vec3::Zero();
  for (const auto& c : touches) n += c.normal.vec();
  if (n.norm() < 1e-9) return std::nullopt;
  return Vec3(n.normalized());
}

/// One evaluation episode: reset, then up to `cap` policy steps or a reset
/// condition. Networks act greedily.
inline RolloutResult run_rollout(const TactileEnv& env, const std::shared_ptr<const ObjectModel>& object, std::uint64_t seed,
                                 const PolicySource& policy, const EvalConfig& cfg,
                                 const std::function<void(const RolloutStep&)>& on_step = {}, bool compute_auc = true) {
  RolloutResult r;
  EpisodeState s = env.reset(object, seed);
  GridSearchState gs;
  GridContext ctx;
  ctx.start_rotation = s.start_wrist.rotation();
  ctx.wrist_rotation = s.hand.wrist.rotation();
  Rng rng(derive_seed(seed, 0x5eed));
  const StateMask full;
  std::optional<RewardTracker> tracker;
  if (cfg.reward) tracker.emplace(*cfg.reward);
  for (int k = 0; k < cfg.cap && !s.terminated; ++k) {
    ActionId a{};
    StateVector obs;
    switch (policy.kind) {
      case PolicySource::Kind::Network: {
        obs = assemble_state(s, env.workspace(), cfg.features, cfg.mask);
        a = policy_forward(policy.checkpoint->net, obs.flatten(), rng, cfg.greedy ? PolicyMode::Evaluate : PolicyMode::Train).action;
        break;
      }
      case PolicySource::Kind::Grid:
        obs = assemble_state(s, env.workspace(), cfg.features, full);
        ctx.wrist_rotation = s.hand.wrist.rotation();
        a = grid_policy_step(gs, obs, ctx, cfg.grid);
        break;
      case PolicySource::Kind::Random:
        obs = assemble_state(s, env.workspace(), cfg.features, cfg.mask);
        a = random_policy_step(rng);
        break;
    }
    const RigidTransform before = s.hand.wrist;
    const StepOutcome so = env.step(s, a);
    ctx.mean_normal = mean_normal(so.touches);
    ++r.steps;
    if (!on_step) continue;
    RolloutStep rec{s.t, a, so.touches, obs, s.hand.wrist, s.bent_q, touch_state(s.touch), std::nullopt, so.terminated, so.reason};
    if (tracker) {
      double rp = 0.0;
      if (tracker->config().variant.pose && s.t % tracker->config().period == 0)
        rp = pose_feedback(s.contacts, s.model->mesh, s.gt_pose, s.t, tracker->config().period, s.start_wrist.translation(),
                           cfg.env.object_center, cfg.pipeline);
      rec.reward = tracker->step(before, s.start_wrist, a, rec.touch, so.touches, rp);
    }
    on_step(rec);
  }
  r.iou = episode_iou(s, cfg.iou_cell);
  r.auc = compute_auc ? episode_auc(s, cfg.env.object_center, cfg.pipeline) : 0.0;
  r.final = std::move(s);
  return r;
}

struct ResultRow {
  std::string object;
  std::string variant;
  double mean_iou = 0.0;
  double mean_auc = 0.0;
  int trials = 0;
  std::vector<std::uint64_t> seeds;
};

/// Seed of trial `i` under a base seed.
inline std::uint64_t trial_seed(std::uint64_t base, int i) { return derive_seed(base, 0x7000 + static_cast<std::uint64_t>(i)); }

/// Averages `trials` seeded rollouts. A network checkpoint must match the
/// configured policy contract.
inline ResultRow evaluate(const PolicySource& policy, const std::shared_ptr<const ObjectModel>& object, const EvalConfig& cfg) {
  if (cfg.trials < 1) throw InvalidArgument("evaluate: trials must be >= 1");
  if (cfg.cap < 0) throw InvalidArgument("evaluate: cap must be >= 0");
  if (policy.kind == PolicySource::Kind::Network) {
    if (!policy.checkpoint) throw InvalidArgument("evaluate: missing checkpoint");
    const auto want = policy_digest(cfg.mask, cfg.features, cfg.env.hand, cfg.hidden);
    if (policy.checkpoint->config_digest != want)
      throw VersionError("checkpoint config digest " + hex64(policy.checkpoint->config_digest) + " does not match configuration " +
                         hex64(want));
  }
  const TactileEnv env(cfg.env);
  ResultRow row;
  row.object = object->name;
  row.variant = policy.label;
  row.trials = cfg.trials;
  for (int i = 0; i < cfg.trials; ++i) {
    const auto seed = trial_seed(cfg.seed, i);
    row.seeds.push_back(seed);
    const auto r = run_rollout(env, object, seed, policy, cfg);
    row.mean_iou += r.iou;
    row.mean_auc += r.auc;
  }
  row.mean_iou /= cfg.trials;
  row.mean_auc /= cfg.trials;
  return row;
}

}  // namespace tactile

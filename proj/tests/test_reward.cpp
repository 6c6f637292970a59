#include <gtest/gtest.h>

#include "tactile/objects.hpp"
#include "tactile/reward.hpp"

using namespace tactile;

namespace {

std::array<bool, kTouchBits> bits(std::initializer_list<int> on) {
  std::array<bool, kTouchBits> t{};
  for (int i : on) t[i] = true;
  return t;
}

RewardConfig config(const std::string& variant) {
  RewardConfig c;
  c.variant = RewardVariant::parse(variant);
  return c;
}

}  // namespace

TEST(TouchReward, OrOverFingerBits) {
  EXPECT_EQ(touch_reward(bits({}), 0), 0.0);
  EXPECT_EQ(touch_reward(bits({0}), 0), 1.0);
  EXPECT_EQ(touch_reward(bits({2, 3}), 0), 1.0);
  EXPECT_EQ(touch_reward(bits({4}), 0), 0.0);
  EXPECT_EQ(touch_reward(bits({4}), 1), 1.0);
}

TEST(Curiosity, HarmonicSequence) {
  VisitTable t(0.005);
  const Vec3 p(0.0101, -0.003, 0.02);
  for (int n = 1; n <= 50; ++n) EXPECT_EQ(t.curiosity_bonus(2, p), 1.0 / n);
}

TEST(Curiosity, FirstAndThirdVisit) {
  VisitTable t(0.005);
  const Vec3 p(0.001, 0.001, 0.001);
  EXPECT_EQ(t.curiosity_bonus(0, p), 1.0);
  EXPECT_EQ(t.curiosity_bonus(0, p), 0.5);
  EXPECT_EQ(t.curiosity_bonus(0, Vec3(0.002, 0.004, 0.0)), 1.0 / 3);  // same 5 mm cell
}

TEST(Curiosity, PerFingerCounts) {
  VisitTable t(0.005);
  const Vec3 p(0.001, 0.001, 0.001);
  t.curiosity_bonus(0, p);
  t.curiosity_bonus(0, p);
  EXPECT_EQ(t.curiosity_bonus(1, p), 1.0);
  EXPECT_EQ(t.count(0, p), 3);
  EXPECT_EQ(t.count(3, p), 1);
}

TEST(Memory, EmptyHistory) {
  HistoryBuffer h(20);
  EXPECT_FALSE(memory_check(h, PoseKey{}, ActionId::TranslateXPos));
}

TEST(Memory, ImmediateRepeat) {
  HistoryBuffer h(20);
  const PoseKey k{1, 2, 3, 0, 0, 0};
  h.push(k, ActionId::RotateYNeg);
  EXPECT_TRUE(memory_check(h, k, ActionId::RotateYNeg));
  EXPECT_FALSE(memory_check(h, k, ActionId::RotateYPos));
}

TEST(Memory, EvictedAfterKPlusOneSteps) {
  const std::size_t k = 20;
  HistoryBuffer h(k);
  const PoseKey key{0, 0, 0, 0, 0, 0};
  h.push(key, ActionId::TranslateXPos);
  for (std::size_t i = 0; i + 1 < k; ++i) h.push(PoseKey{static_cast<std::int64_t>(i) + 1, 0, 0, 0, 0, 0}, ActionId::TranslateXPos);
  EXPECT_TRUE(memory_check(h, key, ActionId::TranslateXPos));
  h.push(PoseKey{100, 0, 0, 0, 0, 0}, ActionId::TranslateXPos);
  EXPECT_FALSE(memory_check(h, key, ActionId::TranslateXPos));
  EXPECT_LE(h.size(), k);
}

TEST(Discretize, SameCellSameKey) {
  const RigidTransform start;
  const auto a = discretize_pose(RigidTransform::from_translation(Vec3(0.0011, 0.0, 0.0)), start, 0.005, 0.2);
  const auto b = discretize_pose(RigidTransform::from_translation(Vec3(0.0049, 0.0, 0.0)), start, 0.005, 0.2);
  const auto c = discretize_pose(RigidTransform::from_translation(Vec3(0.0051, 0.0, 0.0)), start, 0.005, 0.2);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  const auto r = discretize_pose(RigidTransform::from_axis_angle(Vec3::UnitZ(), 0.25), start, 0.005, 0.2);
  EXPECT_NE(a, r);
}

TEST(StepReward, NoTouchOffPeriodIsZero) {
  VisitTable v;
  RewardInputs in;
  EXPECT_EQ(step_reward(in, config("TMBP"), v).total, 0.0);
}

TEST(StepReward, SingleFirstVisit) {
  VisitTable v;
  RewardInputs in;
  in.touch = bits({5});
  in.finger_position[1] = Vec3(0.01, 0.02, 0.03);
  const auto r = step_reward(in, config("TMBP"), v);
  EXPECT_DOUBLE_EQ(r.total, 0.4);
  EXPECT_EQ(r.per_finger[1], 2.0);
  EXPECT_EQ(r.bonus[1], 1.0);
}

TEST(StepReward, AllRepeatedIsPenaltyPlusPose) {
  VisitTable v;
  RewardInputs in;
  in.touch = bits({0, 4, 8, 12, 16});
  in.repeated = true;
  in.pose_feedback = 0.6;
  const auto cfg = config("TMBP");
  const auto r = step_reward(in, cfg, v);
  EXPECT_DOUBLE_EQ(r.total, -1.0 + cfg.gamma * 0.6);
  EXPECT_EQ(v.size(), 0u);  // repeats do not count as visits
}

TEST(StepReward, VariantsDisableTerms) {
  RewardInputs in;
  in.touch = bits({0});
  in.finger_position[0] = Vec3::Zero();
  in.repeated = true;
  in.pose_feedback = 0.5;
  {
    VisitTable v;
    EXPECT_DOUBLE_EQ(step_reward(in, config("TB"), v).total, (1.0 + 1.0) / 5);  // memory ignored, no pose
  }
  {
    VisitTable v;
    EXPECT_DOUBLE_EQ(step_reward(in, config("TMB"), v).total, -1.0 / 5);
  }
  in.repeated = false;
  {
    VisitTable v;
    EXPECT_DOUBLE_EQ(step_reward(in, config("TM"), v).total, 1.0 / 5);
  }
  {
    VisitTable v;
    EXPECT_DOUBLE_EQ(step_reward(in, config("TMP"), v).total, 1.0 / 5 + 5.0 * 0.5);
  }
}

TEST(StepReward, BoundsWithoutPose) {
  Rng rng(12);
  for (const char* variant : {"TMB", "TB", "TM"}) {
    const auto cfg = config(variant);
    VisitTable v;
    for (int k = 0; k < 2000; ++k) {
      RewardInputs in;
      for (auto& b : in.touch) b = uniform01(rng) < 0.2;
      for (auto& p : in.finger_position)
        if (uniform01(rng) < 0.7) p = Vec3(uniform(rng, 0, 0.02), uniform(rng, 0, 0.02), 0.0);
      in.repeated = uniform01(rng) < 0.3;
      in.pose_feedback = uniform01(rng);
      const double r = step_reward(in, cfg, v).total;
      EXPECT_GE(r, cfg.memory_penalty);
      EXPECT_LE(r, cfg.alpha + cfg.beta);
    }
  }
}

TEST(StepReward, FlagMatchesZeroCoefficient) {
  Rng rng(3);
  std::vector<RewardInputs> traj(300);
  for (auto& in : traj) {
    for (auto& b : in.touch) b = uniform01(rng) < 0.3;
    for (auto& p : in.finger_position) p = Vec3(uniform(rng, 0, 0.015), uniform(rng, 0, 0.015), 0.0);
    in.repeated = uniform01(rng) < 0.2;
    in.pose_feedback = uniform01(rng);
  }
  auto totals = [&](const RewardConfig& c) {
    VisitTable v;
    std::vector<double> out;
    for (const auto& in : traj) out.push_back(step_reward(in, c, v).total);
    return out;
  };
  auto no_bonus = config("TMBP");
  no_bonus.beta = 0.0;
  EXPECT_EQ(totals(config("TMP")), totals(no_bonus));
  auto no_pose = config("TMBP");
  no_pose.gamma = 0.0;
  EXPECT_EQ(totals(config("TMB")), totals(no_pose));
}

TEST(StepReward, Deterministic) {
  RewardInputs in;
  in.touch = bits({1, 9});
  in.finger_position[0] = Vec3(0.1, 0, 0);
  in.finger_position[2] = Vec3(0.2, 0, 0);
  VisitTable a, b;
  for (int i = 0; i < 5; ++i) EXPECT_EQ(step_reward(in, config("TMBP"), a).total, step_reward(in, config("TMBP"), b).total);
}

TEST(Variant, ParseAndName) {
  for (const char* v : {"TMBP", "TMB", "TB", "TM", "TMP", "TBP"}) EXPECT_EQ(RewardVariant::parse(v).name(), v);
  EXPECT_THROW(RewardVariant::parse("MB"), InvalidArgument);
  EXPECT_THROW(RewardVariant::parse("TX"), InvalidArgument);
}

TEST(Config, Validation) {
  RewardConfig c;
  c.period = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c.period = 50;
  c.memory_penalty = 0.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(Tracker, RepeatedPairPenalizesTouchingFingers) {
  RewardTracker tr(config("TMB"));
  const RigidTransform start;
  std::vector<ContactRecord> touches{{Vec3(0.01, 0, 0), UnitVec3(1, 0, 0), 2, 0}};
  const auto t = bits({8});
  const auto first = tr.step(start, start, ActionId::TranslateYPos, t, touches, 0.0);
  EXPECT_DOUBLE_EQ(first.total, 2.0 / 5);
  const auto second = tr.step(start, start, ActionId::TranslateYPos, t, touches, 0.0);
  EXPECT_TRUE(second.repeated);
  EXPECT_DOUBLE_EQ(second.total, -1.0 / 5);
  const auto other = tr.step(start, start, ActionId::TranslateYNeg, t, touches, 0.0);
  EXPECT_DOUBLE_EQ(other.total, (1.0 + 0.5) / 5);
}

TEST(Tracker, FingerPositionIsMeanOfItsContacts) {
  std::vector<ContactRecord> touches{{Vec3(0, 0, 0), UnitVec3(1, 0, 0), 1, 0}, {Vec3(0.02, 0, 0), UnitVec3(1, 0, 0), 1, 2}};
  const auto pos = finger_contact_positions(touches);
  ASSERT_TRUE(pos[1]);
  EXPECT_NEAR((*pos[1] - Vec3(0.01, 0, 0)).norm(), 0.0, 1e-15);
  EXPECT_FALSE(pos[0]);
}

TEST(PoseFeedback, OffPeriodIsZero) {
  const auto model = builtin_object("sphere");
  const auto cloud = sample_mesh_surface(model->mesh, 2000, 0);
  EXPECT_EQ(pose_feedback(cloud, model->mesh, RigidTransform{}, 7, 50, Vec3(-0.15, 0, 0), Vec3::Zero(), PipelineConfig{}), 0.0);
}

TEST(PoseFeedback, DenseSampleScoresHigh) {
  const auto model = builtin_object("cuboid");
  const auto gt = RigidTransform::from_axis_angle(Vec3(1, 2, 3).normalized(), 0.7, Vec3(0.005, -0.004, 0.003));
  const auto cloud = sample_mesh_surface(model->mesh.transformed(gt), 2000, 4);
  const double r = pose_feedback(cloud, model->mesh, gt, 50, 50, Vec3(-0.15, 0, 0), Vec3::Zero(), PipelineConfig{});
  EXPECT_GE(r, 0.9);
  EXPECT_LE(r, 1.0);
}

TEST(PoseFeedback, DegenerateCloudIsZero) {
  const auto model = builtin_object("sphere");
  ContactCloud few;
  few.push_back(Vec3(0, 0, 0), UnitVec3(0, 0, 1));
  few.push_back(Vec3(0.01, 0, 0), UnitVec3(0, 0, 1));
  few.push_back(Vec3(0, 0.01, 0), UnitVec3(0, 0, 1));
  EXPECT_EQ(pose_feedback(few, model->mesh, RigidTransform{}, 50, 50, Vec3(-0.15, 0, 0), Vec3::Zero(), PipelineConfig{}), 0.0);
  ContactCloud flat;
  for (int i = 0; i < 30; ++i) flat.push_back(Vec3(0.001 * i, 0.002 * (i % 5), 0.0), UnitVec3(0, 0, 1));
  EXPECT_EQ(pose_feedback(flat, model->mesh, RigidTransform{}, 100, 50, Vec3(-0.15, 0, 0), Vec3::Zero(), PipelineConfig{}), 0.0);
}

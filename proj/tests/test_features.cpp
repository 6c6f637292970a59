#include <gtest/gtest.h>

#include "oracles.hpp"
#include "tactile/features.hpp"
#include "tactile/objects.hpp"

using namespace tactile;

namespace {

std::array<bool, kPatches> flags_with(std::initializer_list<std::pair<int, Patch>> on) {
  std::array<bool, kPatches> f{};
  for (auto [finger, p] : on) f[patch_slot(finger, p)] = true;
  return f;
}

std::vector<Plane> box_planes(double half) { return Workspace::box(Vec3::Constant(-half), Vec3::Constant(half)).planes; }

}  // namespace

TEST(TouchState, AllFalse) {
  for (bool b : touch_state(std::array<bool, kPatches>{})) EXPECT_FALSE(b);
}

TEST(TouchState, ThumbTipOnly) {
  const auto t = touch_state(flags_with({{0, Patch::Tip}}));
  EXPECT_TRUE(t[0]);
  for (int i = 1; i < kTouchBits; ++i) EXPECT_FALSE(t[i]);
}

TEST(TouchState, TopFoldsIntoTip) {
  const auto t = touch_state(flags_with({{1, Patch::Top}}));
  for (int i = 0; i < kTouchBits; ++i) EXPECT_EQ(t[i], i == 4);
}

TEST(TouchState, OrderWithinFinger) {
  const auto t = touch_state(flags_with({{3, Patch::Bottom}, {3, Patch::Left}, {3, Patch::Right}}));
  EXPECT_FALSE(t[12]);
  EXPECT_TRUE(t[13]);
  EXPECT_TRUE(t[14]);
  EXPECT_TRUE(t[15]);
}

TEST(TouchState, OneBitPerTouchingFinger) {
  Rng rng(1);
  for (int k = 0; k < 500; ++k) {
    std::array<bool, kPatches> f{};
    int fingers = 0;
    for (int i = 0; i < kFingers; ++i)
      if (uniform01(rng) < 0.5) {
        f[i * kPatchesPerFinger + static_cast<int>(uniform_index(rng, kPatchesPerFinger))] = true;
        ++fingers;
      }
    const auto t = touch_state(f);
    EXPECT_EQ(std::count(t.begin(), t.end(), true), fingers);
  }
}

TEST(Boundary, SymmetricBox) {
  const auto d = boundary_distances(Vec3::Zero(), Mat3::Identity(), box_planes(0.1), 0.5);
  for (double x : d) EXPECT_NEAR(x, 0.1, 1e-15);
}

TEST(Boundary, OffCenter) {
  const auto d = boundary_distances(Vec3(0.05, 0, 0), Mat3::Identity(), box_planes(0.1), 0.5);
  EXPECT_NEAR(d[0], 0.05, 1e-15);
  EXPECT_NEAR(d[1], 0.15, 1e-15);
}

TEST(Boundary, RotationPermutesDirections) {
  const Vec3 w(0.02, 0.03, -0.01);
  const Mat3 r = Eigen::AngleAxisd(kPi / 2, Vec3::UnitZ()).toRotationMatrix();
  const auto planes = box_planes(0.1);
  const auto d = boundary_distances(w, r, planes, 0.5);
  // wrist +x is base +y, wrist +y is base -x
  const std::array<double, 6> expect = {0.07, 0.13, 0.12, 0.08, 0.11, 0.09};
  for (int a = 0; a < 6; ++a) {
    EXPECT_NEAR(d[a], expect[a], 1e-12) << a;
    const Vec3 dir = r * action_axis(static_cast<ActionId>(a));
    EXPECT_NEAR(d[a], oracle::march_to_boundary(w, dir, planes, 0.5, 1e-6), 1e-6);
  }
}

TEST(Boundary, UnboundedDirectionHitsCap) {
  const std::vector<Plane> one{{UnitVec3(-1, 0, 0), 0.1}};
  const auto d = boundary_distances(Vec3::Zero(), Mat3::Identity(), one, 0.5);
  EXPECT_NEAR(d[0], 0.1, 1e-15);
  for (int a = 1; a < 6; ++a) EXPECT_EQ(d[a], 0.5);
}

TEST(Boundary, OutsideIsContractViolation) {
  EXPECT_THROW(boundary_distances(Vec3(0.2, 0, 0), Mat3::Identity(), box_planes(0.1), 0.5), ContractViolation);
}

TEST(Boundary, RandomConvexWorkspacesMatchRayMarch) {
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Plane> planes;
    const int n = 4 + static_cast<int>(uniform_index(rng, 6));
    for (int i = 0; i < n; ++i)
      planes.push_back({UnitVec3(standard_normal(rng), standard_normal(rng), standard_normal(rng)), uniform(rng, 0.05, 0.3)});
    const Vec3 w = 0.03 * Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    const Mat3 r = random_rotation(rng);
    const auto d = boundary_distances(w, r, planes, 0.5);
    for (int a = 0; a < 6; ++a)
      EXPECT_NEAR(d[a], oracle::march_to_boundary(w, r * action_axis(static_cast<ActionId>(a)), planes, 0.5), 1e-3);
  }
}

TEST(Memory, EmptyIsZero) {
  for (double m : local_contact_memory(ContactCloud{}, Vec3::Zero(), Mat3::Identity(), 0.08, 0.01)) EXPECT_EQ(m, 0.0);
}

TEST(Memory, SinglePointAlongLeft) {
  ContactCloud c;
  c.push_back(Vec3(0.02, 0, 0), UnitVec3(0, 0, 1));
  const auto m = local_contact_memory(c, Vec3::Zero(), Mat3::Identity(), 0.08, 0.01);
  EXPECT_NEAR(m[0], 0.02, 1e-15);
  EXPECT_EQ(m[1], 0.0);
  EXPECT_EQ(m[2], 0.0);
  EXPECT_EQ(m[3], 0.0);
}

TEST(Memory, OnlyPositiveSideCounts) {
  ContactCloud c;
  c.push_back(Vec3(-0.025, 0, 0), UnitVec3(0, 0, 1));
  auto m = local_contact_memory(c, Vec3::Zero(), Mat3::Identity(), 0.08, 0.01);
  EXPECT_EQ(m[0], 0.0);
  EXPECT_NEAR(m[1], 0.025, 1e-15);
  c.push_back(Vec3(0.025, 0, 0), UnitVec3(0, 0, 1));
  m = local_contact_memory(c, Vec3::Zero(), Mat3::Identity(), 0.08, 0.01);
  EXPECT_NEAR(m[0], 0.025, 1e-15);
  EXPECT_NEAR(m[1], 0.025, 1e-15);
}

TEST(Memory, RadiusFilter) {
  ContactCloud c;
  c.push_back(Vec3(0, 0.09, 0), UnitVec3(0, 0, 1));
  for (double m : local_contact_memory(c, Vec3::Zero(), Mat3::Identity(), 0.08, 0.01)) EXPECT_EQ(m, 0.0);
}

TEST(Memory, NonNegative) {
  Rng rng(6);
  for (int k = 0; k < 100; ++k) {
    ContactCloud c, moved;
    const Vec3 t(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    const Vec3 w(uniform(rng, -0.01, 0.01), uniform(rng, -0.01, 0.01), uniform(rng, -0.01, 0.01));
    for (int i = 0; i < 30; ++i) {
      const Vec3 p(uniform(rng, -0.06, 0.06), uniform(rng, -0.06, 0.06), uniform(rng, -0.06, 0.06));
      c.push_back(p, UnitVec3(0, 0, 1));
      moved.push_back(p + t, UnitVec3(0, 0, 1));
    }
    const Mat3 r = random_rotation(rng);
    const auto a = local_contact_memory(c, w, r, 0.08, 0.01);
    const auto b = local_contact_memory(moved, w + t, r, 0.08, 0.01);
    for (int i = 0; i < 4; ++i) {
      EXPECT_GE(a[i], 0.0);
      EXPECT_GE(b[i], 0.0);
    }
  }
}

TEST(Memory, TranslationInvariant) {
  ContactCloud c, moved;
  Rng rng(8);
  const Vec3 t(0.03, -0.05, 0.07);  // whole cells keep voxel membership
  for (int i = 0; i < 40; ++i) {
    const Vec3 p(uniform(rng, -0.06, 0.06), uniform(rng, -0.06, 0.06), uniform(rng, -0.06, 0.06));
    c.push_back(p, UnitVec3(0, 0, 1));
    moved.push_back(p + t, UnitVec3(0, 0, 1));
  }
  const auto a = local_contact_memory(c, Vec3::Zero(), Mat3::Identity(), 0.08, 0.01);
  const auto b = local_contact_memory(moved, t, Mat3::Identity(), 0.08, 0.01);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(Mask, ParseAndWidth) {
  EXPECT_EQ(StateMask::parse("BFTRM").enabled_width(), 38);
  EXPECT_EQ(StateMask::parse("FTRM").enabled_width(), 32);
  EXPECT_EQ(StateMask::parse("BFTR").enabled_width(), 34);
  EXPECT_EQ(StateMask::parse("FTRM").name(), "FTRM");
  EXPECT_THROW(StateMask::parse("BFX"), InvalidArgument);
  EXPECT_THROW(StateMask::parse(""), InvalidArgument);
}

TEST(Assemble, FirstStepHasZeroRotation) {
  const TactileEnv env;
  const auto s = env.reset(builtin_object("cylinder"), 2);
  const auto v = assemble_state(s, env.workspace(), FeatureConfig{}, StateMask{});
  EXPECT_LT(v.rotation.norm(), 1e-12);
  EXPECT_EQ(v.fingers, s.bent_q);
}

TEST(Assemble, MasksZeroBlocksKeepWidth) {
  const TactileEnv env;
  auto s = env.reset(builtin_object("cuboid"), 2);
  for (int i = 0; i < 5; ++i) env.step(s, ActionId::TranslateYPos);
  const auto full = assemble_state(s, env.workspace(), FeatureConfig{}, StateMask::parse("BFTRM")).flatten();
  const auto ftrm = assemble_state(s, env.workspace(), FeatureConfig{}, StateMask::parse("FTRM")).flatten();
  const auto bftr = assemble_state(s, env.workspace(), FeatureConfig{}, StateMask::parse("BFTR")).flatten();
  EXPECT_EQ(full.size(), 38u);
  for (int i = 0; i < 38; ++i) {
    const bool b = i >= 28 && i < 34, m = i >= 34;
    EXPECT_EQ(ftrm[i], b ? 0.0 : full[i]);
    EXPECT_EQ(bftr[i], m ? 0.0 : full[i]);
  }
  bool nonzero_b = false;
  for (int i = 28; i < 34; ++i) nonzero_b |= full[i] != 0.0;
  EXPECT_TRUE(nonzero_b);
}

TEST(Assemble, PureFunction) {
  const TactileEnv env;
  auto s = env.reset(builtin_object("corner"), 3);
  env.step(s, ActionId::RotateXPos);
  const auto a = assemble_state(s, env.workspace(), FeatureConfig{}, StateMask{}).flatten();
  const auto b = assemble_state(s, env.workspace(), FeatureConfig{}, StateMask{}).flatten();
  EXPECT_EQ(a, b);
}

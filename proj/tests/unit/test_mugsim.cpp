#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "affcue/error.hpp"
#include "affcue/mugsim.hpp"
#include "affcue/rng.hpp"

namespace affcue {
namespace {

MugSpec handle_mug(double depth = 0.02) {
  MugSpec m;
  m.id = "h";
  m.body_radius = 0.04;
  m.body_height = 0.1;
  m.has_handle = true;
  m.handle_width = 0.015;
  m.handle_depth = depth;
  m.handle_height = 0.04;
  m.handle_clearance = 0.015;
  m.affordable = derive_affordances(m, GripperParams{});
  return m;
}

MugSpec plain_mug(double r = 0.03) {
  MugSpec m;
  m.id = "p";
  m.body_radius = r;
  m.body_height = 0.09;
  m.affordable = derive_affordances(m, GripperParams{});
  return m;
}

TEST(DeriveAffordances, SpecExamples) {
  const GripperParams g;
  EXPECT_EQ(derive_affordances(plain_mug(0.03), g), std::set{AffordanceCategory::BodyGrasp});

  MugSpec wide;
  wide.id = "w";
  wide.body_radius = 0.06;
  wide.body_height = 0.1;
  try {
    derive_affordances(wide, g);
    FAIL() << "expected EmptyAffordance";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyAffordance);
  }

  MugSpec h = wide;
  h.has_handle = true;
  h.handle_width = 0.02;
  h.handle_depth = 0.03;
  h.handle_height = 0.04;
  h.handle_clearance = 0.03;
  EXPECT_EQ(derive_affordances(h, g),
            (std::set{AffordanceCategory::HandleLeftRight, AffordanceCategory::HandleFrontBack}));
}

TEST(DeriveAffordances, DiameterBoundIsStrict) {
  const GripperParams g;
  EXPECT_TRUE(derive_affordances(plain_mug(0.0399), g).contains(AffordanceCategory::BodyGrasp));
  MugSpec m = handle_mug();
  m.body_radius = 0.04;
  EXPECT_FALSE(derive_affordances(m, g).contains(AffordanceCategory::BodyGrasp));
}

TEST(MugSim, ResetIsDeterministicAndCanonical) {
  const MugSim sim(plain_mug(), SimConfig{});
  const SimState a = sim.reset(0), b = sim.reset(0);
  EXPECT_EQ(a, b);
  EXPECT_FALSE(a.attached);
  EXPECT_EQ(a.mug_pose, Pose6::Zero());
  EXPECT_EQ(a.fingers[0], SimConfig{}.gripper.finger_max);
  EXPECT_EQ(a.gripper_pose, SimConfig{}.home_pose);
}

TEST(MugSim, ZeroActionOnlyAdvancesStep) {
  const MugSim sim(plain_mug(), SimConfig{});
  const SimState s = sim.reset();
  const SimState n = sim.step(s, Action::Zero());
  EXPECT_EQ(n.step_index, s.step_index + 1);
  EXPECT_EQ(n.gripper_pose, s.gripper_pose);
  EXPECT_EQ(n.mug_pose, s.mug_pose);
  EXPECT_EQ(n.fingers, s.fingers);
}

TEST(MugSim, TranslationClipsExactly) {
  const MugSim sim(plain_mug(), SimConfig{});
  const SimState s = sim.reset();
  Action a = Action::Zero();
  a[0] = 0.05;
  const SimState n = sim.step(s, a);
  EXPECT_NEAR(n.gripper_pose[0] - s.gripper_pose[0], 0.02, 1e-15);
}

TEST(MugSim, RandomEpisodesRespectClipsAndMonotoneAttachment) {
  const SimConfig cfg;
  const MugSim sim(handle_mug(), cfg);
  Rng r(5);
  for (int ep = 0; ep < 200; ++ep) {
    SimState s = sim.reset();
    bool was_attached = false;
    for (int t = 0; t < 12; ++t) {
      Action a;
      for (int k = 0; k < 3; ++k) a[k] = r.uniform(-0.05, 0.05);
      for (int k = 3; k < 6; ++k) a[k] = r.uniform(-0.6, 0.6);
      a[6] = r.uniform();
      const SimState n = sim.step(s, a);
      for (int k = 0; k < 3; ++k) ASSERT_LE(std::abs(n.gripper_pose[k] - s.gripper_pose[k]), cfg.trans_clip + 1e-15);
      for (int k = 3; k < 6; ++k) {
        ASSERT_LE(std::abs(wrap_angle(n.gripper_pose[k] - s.gripper_pose[k])), cfg.rot_clip + 1e-12);
      }
      for (double f : n.fingers) {
        ASSERT_GE(f, 0.0);
        ASSERT_LE(f, cfg.gripper.finger_max);
      }
      if (was_attached) ASSERT_TRUE(n.attached);
      was_attached = n.attached;
      s = n;
    }
  }
}

TEST(MugSim, StraddledHandleAttachesWithinContactTolerance) {
  const SimConfig cfg;
  const MugSpec m = handle_mug(0.02);
  const MugSim sim(m, cfg);
  SimState s = sim.reset();
  const Vec3 bar = m.handle_bar_center();
  s.gripper_pose << bar.x(), bar.y(), bar.z(), 0.0, 0.0, 0.0;
  Action close = Action::Zero();
  close[6] = 1.0;
  bool attached = false;
  for (int t = 0; t < 4 && !attached; ++t) {
    s = sim.step(s, close);
    attached = s.attached;
  }
  ASSERT_TRUE(attached);
  // Oracle: the pads straddle the analytic bar (y extent +-depth/2) and the
  // finger gap is within 2*contact_eps of the bar depth.
  const double gap = s.fingers[0] + s.fingers[1];
  EXPECT_LE(gap, m.handle_depth + 2 * cfg.gripper.contact_eps + 1e-12);
  EXPECT_GE(s.fingers[0], m.handle_depth / 2 - 1e-12);
  EXPECT_GE(s.fingers[1], m.handle_depth / 2 - 1e-12);
}

TEST(MugSim, ClosingOnAirNeverAttaches) {
  const MugSim sim(plain_mug(), SimConfig{});
  SimState s = sim.reset();
  s.gripper_pose << 0.15, 0.1, 0.2, 0, 0, 0;
  Action close = Action::Zero();
  close[6] = 1.0;
  for (int t = 0; t < 5; ++t) s = sim.step(s, close);
  EXPECT_FALSE(s.attached);
  EXPECT_EQ(s.fingers[0], 0.0);
}

TEST(MugSim, AttachedMugFollowsGripper) {
  const MugSpec m = plain_mug(0.03);
  const MugSim sim(m, SimConfig{});
  SimState s = sim.reset();
  s.gripper_pose << 0.0, 0.0, 0.045, 0.0, 0.0, 0.0;
  Action a = Action::Zero();
  a[6] = 1.0;
  s = sim.step(s, a);
  ASSERT_TRUE(s.attached);
  const SimState start = s;
  a[2] = 0.02;
  a[5] = 0.1;
  s = sim.step(s, a);
  EXPECT_NEAR(s.mug_pose[2] - start.mug_pose[2], 0.02, 1e-12);
  const RigidTransform rel = RigidTransform::from_pose(s.gripper_pose).inverse() * RigidTransform::from_pose(s.mug_pose);
  EXPECT_LT((rel.translation - s.mug_in_gripper.translation).norm(), 1e-12);
}

TEST(Observe, SpecExamples) {
  const MugSim sim(plain_mug(), SimConfig{});
  SimState s = sim.reset();
  s.gripper_pose = s.mug_pose;
  RelativeState o = sim.relative_state(s);
  for (int k = 0; k < 6; ++k) EXPECT_NEAR(o[k], 0.0, 1e-15);
  EXPECT_EQ(o[6], 0.04);
  EXPECT_EQ(o[7], 0.04);

  s.gripper_pose << 0.0, 0.0, 0.2, 0.0, 0.0, 0.0;
  o = sim.relative_state(s);
  EXPECT_NEAR(o[0], 0.0, 1e-15);
  EXPECT_NEAR(o[1], 0.0, 1e-15);
  EXPECT_NEAR(o[2], -0.2, 1e-15);
}

TEST(Observe, RecomposesMugPose) {
  const SimConfig cfg;
  const MugSim sim(handle_mug(), cfg);
  Rng r(9);
  for (int i = 0; i < 300; ++i) {
    SimState s = sim.reset();
    s.gripper_pose << r.uniform(-0.2, 0.2), r.uniform(-0.2, 0.2), r.uniform(0, 0.3), r.uniform(-3, 3),
        r.uniform(-1.4, 1.4), r.uniform(-3, 3);
    s.mug_pose << r.uniform(-0.1, 0.1), r.uniform(-0.1, 0.1), r.uniform(0, 0.1), r.uniform(-3, 3),
        r.uniform(-1.4, 1.4), r.uniform(-3, 3);
    const RelativeState o = sim.relative_state(s);
    Pose6 rel;
    rel << o.head<6>();
    const RigidTransform world = RigidTransform::from_pose(s.gripper_pose) * RigidTransform::from_pose(rel);
    const RigidTransform truth = RigidTransform::from_pose(s.mug_pose);
    ASSERT_LT((world.translation - truth.translation).norm(), 1e-9);
    ASSERT_LT((world.rotation - truth.rotation).norm(), 1e-9);
  }
}

TEST(IsSuccess, ThresholdExamples) {
  SimState init, cur;
  cur.attached = true;
  cur.mug_pose[2] = 0.05;
  EXPECT_TRUE(is_success(init, cur));
  cur.mug_pose[2] = 0.049;
  EXPECT_FALSE(is_success(init, cur));
  cur.mug_pose[2] = 0.10;
  cur.attached = false;
  EXPECT_FALSE(is_success(init, cur));
}

TEST(MugSim, EpisodeTraceIsDeterministic) {
  const MugSim sim(handle_mug(), SimConfig{});
  auto run = [&] {
    Rng r(77);
    std::vector<SimState> trace{sim.reset()};
    for (int t = 0; t < 10; ++t) {
      Action a;
      for (int k = 0; k < 7; ++k) a[k] = r.uniform(-0.05, 1.0);
      trace.push_back(sim.step(trace.back(), a));
    }
    return trace;
  };
  EXPECT_EQ(run(), run());
}

}  // namespace
}  // namespace affcue

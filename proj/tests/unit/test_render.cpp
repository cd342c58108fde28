#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "affcue/mugsim.hpp"
#include "affcue/render.hpp"
#include "affcue/rng.hpp"

namespace affcue {
namespace {

Vec3 random_unit(Rng& r) {
  Vec3 v(r.normal(), r.normal(), r.normal());
  return v.normalized();
}

RigidTransform random_frame(Rng& r) {
  Pose6 p;
  p << r.uniform(-1, 1), r.uniform(-1, 1), r.uniform(-1, 1), r.uniform(-3, 3), r.uniform(-1.5, 1.5),
      r.uniform(-3, 3);
  return RigidTransform::from_pose(p);
}

/// Ray toward a chosen surface point whose outward normal faces the ray:
/// on a convex solid that point is the first hit, so the expected distance
/// is known before intersecting.
Ray ray_onto(const Vec3& point, const Vec3& outward, Rng& r, double& expected) {
  Vec3 d;
  do {
    d = random_unit(r);
  } while (d.dot(outward) > -0.2);
  expected = r.uniform(0.05, 2.0);
  return {point - expected * d, d};
}

void expect_rel(double got, double want) { EXPECT_LE(std::abs(got - want), 1e-9 * std::abs(want)) << got << " vs " << want; }

TEST(RendererOracle, BoxFacesFromOutside) {
  Rng r(11);
  for (int i = 0; i < 120; ++i) {
    BoxPrimitive box{random_frame(r), Vec3(r.uniform(0.01, 0.2), r.uniform(0.01, 0.2), r.uniform(0.01, 0.2))};
    const int axis = static_cast<int>(r.uniform_index(3));
    const double sign = r.bernoulli(0.5) ? 1.0 : -1.0;
    Vec3 local;
    for (int k = 0; k < 3; ++k) local[k] = r.uniform(-0.95, 0.95) * box.half_extents[k];
    local[axis] = sign * box.half_extents[axis];
    Vec3 n_local = Vec3::Zero();
    n_local[axis] = sign;
    double want = 0;
    const Ray ray = ray_onto(box.frame.apply(local), box.frame.rotation * n_local, r, want);
    const auto t = intersect(ray, box);
    ASSERT_TRUE(t.has_value());
    expect_rel(*t, want);
  }
}

TEST(RendererOracle, CylinderLateralFromOutside) {
  Rng r(12);
  for (int i = 0; i < 120; ++i) {
    CylinderPrimitive cyl{random_frame(r), r.uniform(0.01, 0.1), r.uniform(0.02, 0.2), r.bernoulli(0.5),
                          r.bernoulli(0.5)};
    const double phi = r.uniform(-std::numbers::pi, std::numbers::pi);
    const Vec3 radial(std::cos(phi), std::sin(phi), 0.0);
    const Vec3 local = cyl.radius * radial + Vec3(0, 0, r.uniform(0.05, 0.95) * cyl.height);
    double want = 0;
    const Ray ray = ray_onto(cyl.frame.apply(local), cyl.frame.rotation * radial, r, want);
    const auto t = intersect(ray, cyl);
    ASSERT_TRUE(t.has_value());
    expect_rel(*t, want);
  }
}

TEST(RendererOracle, CylinderCapsFromOutside) {
  Rng r(13);
  for (int i = 0; i < 100; ++i) {
    CylinderPrimitive cyl{random_frame(r), r.uniform(0.01, 0.1), r.uniform(0.02, 0.2), true, true};
    const bool top = r.bernoulli(0.5);
    const double rho = cyl.radius * std::sqrt(r.uniform(0.0, 0.9));
    const double phi = r.uniform(-std::numbers::pi, std::numbers::pi);
    const Vec3 local(rho * std::cos(phi), rho * std::sin(phi), top ? cyl.height : 0.0);
    double want = 0;
    const Ray ray = ray_onto(cyl.frame.apply(local), cyl.frame.rotation * Vec3(0, 0, top ? 1.0 : -1.0), r, want);
    const auto t = intersect(ray, cyl);
    ASSERT_TRUE(t.has_value());
    expect_rel(*t, want);
  }
}

TEST(RendererOracle, PlaneClosedForm) {
  Rng r(14);
  for (int i = 0; i < 100; ++i) {
    PlanePrimitive plane{Vec3(r.uniform(-1, 1), r.uniform(-1, 1), r.uniform(-1, 1)), random_unit(r)};
    const Vec3 o(r.uniform(-2, 2), r.uniform(-2, 2), r.uniform(-2, 2));
    Vec3 d = random_unit(r);
    const double num = (plane.point - o).dot(plane.normal);
    if (num * d.dot(plane.normal) <= 0) d = -d;
    const double want = num / d.dot(plane.normal);
    if (std::abs(d.dot(plane.normal)) < 0.1) continue;
    const auto t = intersect({o, d}, plane);
    ASSERT_TRUE(t.has_value());
    expect_rel(*t, want);
  }
}

TEST(RendererOracle, MissesReportNothing) {
  BoxPrimitive box{RigidTransform{}, Vec3(0.1, 0.1, 0.1)};
  EXPECT_FALSE(intersect({Vec3(1, 1, 0), Vec3::UnitX()}, box).has_value());
  EXPECT_FALSE(intersect({Vec3(1, 0, 0), Vec3::UnitX()}, box).has_value());  // box behind the origin
  CylinderPrimitive cyl{RigidTransform{}, 0.05, 0.1, true, false};
  EXPECT_FALSE(intersect({Vec3(1, 0.2, 0.05), -Vec3::UnitX()}, cyl).has_value());
}

TEST(Render, EmptySceneIsFar) {
  CameraSpec cam = SimConfig::default_camera(16);
  const DepthImage img = render_scene(Scene{}, cam);
  ASSERT_EQ(img.pixels.size(), 256u);
  for (double v : img.pixels) EXPECT_EQ(v, 1.0);
}

TEST(Render, CenterRayOnCylinderMatchesClosedForm) {
  // Camera looking along +x at a vertical cylinder on the axis.
  CameraSpec cam;
  cam.pose << -0.6, 0.0, 0.05, 0.0, 0.0, 0.0;
  cam.height = cam.width = 17;
  cam.ortho_extent = 0.1;
  cam.near = 0.4;
  cam.far = 0.8;
  const double D = 0.6, r = 0.04;
  Scene scene;
  scene.primitives.push_back(CylinderPrimitive{RigidTransform{}, r, 0.1, true, false});
  const DepthImage img = render_scene(scene, cam);
  EXPECT_NEAR(img.at(8, 8), (D - r - cam.near) / (cam.far - cam.near), 1e-12);
}

TEST(Render, DeterministicAndNormalized) {
  MugSpec m;
  m.id = "m";
  m.body_radius = 0.035;
  m.body_height = 0.1;
  m.has_handle = true;
  m.handle_width = 0.015;
  m.handle_depth = 0.015;
  m.handle_height = 0.04;
  m.handle_clearance = 0.012;
  SimConfig cfg;
  cfg.camera = SimConfig::default_camera(32);
  MugSim sim(m, cfg);
  const SimState s = sim.reset();
  const DepthImage a = sim.render_depth(s), b = sim.render_depth(s);
  EXPECT_EQ(a.pixels, b.pixels);
  int hits = 0;
  for (double v : a.pixels) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    hits += v < 1.0;
  }
  EXPECT_GT(hits, 0);
}

TEST(Render, CameraValidation) {
  CameraSpec cam;
  cam.near = 0.9;
  cam.far = 0.5;
  EXPECT_ANY_THROW(cam.validate());
  cam = CameraSpec{};
  cam.height = 0;
  EXPECT_ANY_THROW(cam.validate());
}

}  // namespace
}  // namespace affcue

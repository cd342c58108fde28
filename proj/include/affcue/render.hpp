#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "affcue/geometry.hpp"

namespace affcue {

/// Orthographic depth camera. The view direction is the camera frame's +x
/// axis; image columns run along -y and rows along -z of that frame.
struct CameraSpec {
  Pose6 pose = Pose6::Zero();
  int height = 144;
  int width = 144;
  double ortho_extent = 0.13;  ///< half-width of the view in meters
  double near = 0.4;
  double far = 0.8;

  /// Camera at `distance` from `target`, seen from the given azimuth and
  /// elevation (radians), looking at the target.
  static CameraSpec look_at(const Vec3& target, double azimuth, double elevation,
                            double distance);
  void validate() const;
  Vec3 view_direction() const;
  /// World-space origin of the ray through pixel (row, col).
  Vec3 pixel_origin(int row, int col) const;
};

struct Ray {
  Vec3 origin;
  Vec3 direction;  ///< unit length
};

/// Oriented box given by its local frame and half extents.
struct BoxPrimitive {
  RigidTransform frame;
  Vec3 half_extents;
};

/// Finite cylinder surface around local z from z = 0 to z = height.
/// Lateral surface is a zero-thickness shell hit from both sides.
struct CylinderPrimitive {
  RigidTransform frame;
  double radius = 0.0;
  double height = 0.0;
  bool bottom_cap = true;
  bool top_cap = false;
};

struct PlanePrimitive {
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
};

using Primitive = std::variant<BoxPrimitive, CylinderPrimitive, PlanePrimitive>;

struct Scene {
  std::vector<Primitive> primitives;
};

/// Smallest t > 0 with origin + t * direction on the primitive.
std::optional<double> intersect(const Ray& ray, const BoxPrimitive& box);
std::optional<double> intersect(const Ray& ray, const CylinderPrimitive& cyl);
std::optional<double> intersect(const Ray& ray, const PlanePrimitive& plane);
std::optional<double> intersect(const Ray& ray, const Primitive& prim);
std::optional<double> intersect(const Ray& ray, const Scene& scene);

/// Row-major H x W image of normalized depth (d - near) / (far - near),
/// clamped to [0, 1]; 1 where nothing is hit.
struct DepthImage {
  int height = 0;
  int width = 0;
  std::vector<double> pixels;

  double at(int row, int col) const { return pixels[static_cast<std::size_t>(row) * width + col]; }
};

DepthImage render_scene(const Scene& scene, const CameraSpec& camera);

}  // namespace affcue

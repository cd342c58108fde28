#include "affcue/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "affcue/error.hpp"

namespace affcue {

namespace {

constexpr double kMinT = 1e-12;

void keep_nearest(std::optional<double>& best, double t) {
  if (t > kMinT && (!best || t < *best)) best = t;
}

Ray to_local(const Ray& ray, const RigidTransform& frame) {
  const Mat3 rt = frame.rotation.transpose();
  return {rt * (ray.origin - frame.translation), rt * ray.direction};
}

}  // namespace

CameraSpec CameraSpec::look_at(const Vec3& target, double azimuth, double elevation,
                               double distance) {
  const Vec3 toward_camera(std::cos(elevation) * std::cos(azimuth),
                           std::cos(elevation) * std::sin(azimuth), std::sin(elevation));
  CameraSpec cam;
  cam.pose.head<3>() = target + distance * toward_camera;
  // View direction is -toward_camera: yaw = azimuth + pi, pitch = elevation.
  cam.pose[3] = 0.0;
  cam.pose[4] = elevation;
  cam.pose[5] = wrap_angle(azimuth + std::numbers::pi);
  return cam;
}

void CameraSpec::validate() const {
  if (height <= 0 || width <= 0) throw Error(ErrorKind::ConfigError, "camera image size must be positive");
  if (!(near < far)) throw Error(ErrorKind::ConfigError, "camera near must be < far");
  if (!(ortho_extent > 0)) throw Error(ErrorKind::ConfigError, "camera ortho_extent must be positive");
}

Vec3 CameraSpec::view_direction() const {
  return rotation_from_rpy(pose[3], pose[4], pose[5]).col(0);
}

Vec3 CameraSpec::pixel_origin(int row, int col) const {
  const Mat3 r = rotation_from_rpy(pose[3], pose[4], pose[5]);
  const double pixel = 2.0 * ortho_extent / width;
  const double u = (col + 0.5 - 0.5 * width) * pixel;
  const double v = (row + 0.5 - 0.5 * height) * pixel;
  return pose.head<3>() - u * r.col(1) - v * r.col(2);
}

std::optional<double> intersect(const Ray& ray, const BoxPrimitive& box) {
  const Ray local = to_local(ray, box.frame);
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  for (int axis = 0; axis < 3; ++axis) {
    const double o = local.origin[axis];
    const double d = local.direction[axis];
    const double h = box.half_extents[axis];
    if (std::abs(d) < 1e-300) {
      if (o < -h || o > h) return std::nullopt;
      continue;
    }
    double t0 = (-h - o) / d;
    double t1 = (h - o) / d;
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
    if (t_near > t_far) return std::nullopt;
  }
  std::optional<double> best;
  keep_nearest(best, t_near);
  if (!best) keep_nearest(best, t_far);
  return best;
}

std::optional<double> intersect(const Ray& ray, const CylinderPrimitive& cyl) {
  const Ray local = to_local(ray, cyl.frame);
  const Vec3& o = local.origin;
  const Vec3& d = local.direction;
  std::optional<double> best;

  const double a = d.x() * d.x() + d.y() * d.y();
  if (a > 1e-300) {
    const double b = 2.0 * (o.x() * d.x() + o.y() * d.y());
    const double c = o.x() * o.x() + o.y() * o.y() - cyl.radius * cyl.radius;
    const double disc = b * b - 4.0 * a * c;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      // Numerically stable pair of roots.
      const double q = -0.5 * (b + std::copysign(sq, b));
      double roots[2] = {q / a, q != 0.0 ? c / q : q / a};
      for (double t : roots) {
        const double z = o.z() + t * d.z();
        if (z >= 0.0 && z <= cyl.height) keep_nearest(best, t);
      }
    }
  }
  auto cap = [&](double z_cap) {
    if (std::abs(d.z()) < 1e-300) return;
    const double t = (z_cap - o.z()) / d.z();
    const double x = o.x() + t * d.x();
    const double y = o.y() + t * d.y();
    if (x * x + y * y <= cyl.radius * cyl.radius) keep_nearest(best, t);
  };
  if (cyl.bottom_cap) cap(0.0);
  if (cyl.top_cap) cap(cyl.height);
  return best;
}

std::optional<double> intersect(const Ray& ray, const PlanePrimitive& plane) {
  const double denom = ray.direction.dot(plane.normal);
  if (std::abs(denom) < 1e-300) return std::nullopt;
  std::optional<double> best;
  keep_nearest(best, (plane.point - ray.origin).dot(plane.normal) / denom);
  return best;
}

std::optional<double> intersect(const Ray& ray, const Primitive& prim) {
  return std::visit([&](const auto& p) { return intersect(ray, p); }, prim);
}

std::optional<double> intersect(const Ray& ray, const Scene& scene) {
  std::optional<double> best;
  for (const auto& prim : scene.primitives) {
    if (auto t = intersect(ray, prim)) keep_nearest(best, *t);
  }
  return best;
}

DepthImage render_scene(const Scene& scene, const CameraSpec& camera) {
  camera.validate();
  DepthImage img{camera.height, camera.width,
                 std::vector<double>(static_cast<std::size_t>(camera.height) * camera.width, 1.0)};
  const Vec3 dir = camera.view_direction();
  const double range = camera.far - camera.near;
  for (int row = 0; row < camera.height; ++row) {
    for (int col = 0; col < camera.width; ++col) {
      const auto t = intersect(Ray{camera.pixel_origin(row, col), dir}, scene);
      if (!t) continue;
      const double d = std::clamp(*t, camera.near, camera.far);
      img.pixels[static_cast<std::size_t>(row) * camera.width + col] = (d - camera.near) / range;
    }
  }
  return img;
}

}  // namespace affcue

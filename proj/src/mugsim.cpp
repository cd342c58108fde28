#include "affcue/mugsim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "affcue/error.hpp"

namespace affcue {

std::string_view category_name(AffordanceCategory c) {
  switch (c) {
    case AffordanceCategory::BodyGrasp: return "body";
    case AffordanceCategory::HandleLeftRight: return "handle_lr";
    case AffordanceCategory::HandleFrontBack: return "handle_fb";
  }
  return "?";
}

AffordanceCategory category_from_name(std::string_view name) {
  for (auto c : kAllCategories) {
    if (category_name(c) == name) return c;
  }
  throw Error(ErrorKind::FormatError, "unknown affordance category '" + std::string(name) + "'");
}

void MugSpec::validate_geometry() const {
  if (!(body_radius > 0) || !(body_height > 0)) {
    throw Error(ErrorKind::ConfigError, "mug " + id + ": body dimensions must be positive");
  }
  if (has_handle) {
    if (!(handle_width > 0) || !(handle_depth > 0) || !(handle_height > 0) || !(handle_clearance > 0)) {
      throw Error(ErrorKind::ConfigError, "mug " + id + ": handle dimensions must be positive");
    }
    if (handle_height > body_height) {
      throw Error(ErrorKind::ConfigError, "mug " + id + ": handle taller than body");
    }
  }
}

double MugSpec::handle_arm_thickness() const { return std::min(0.006, 0.25 * handle_height); }

Vec3 MugSpec::handle_bar_center() const {
  return {body_radius + handle_clearance + 0.5 * handle_width, 0.0, 0.5 * body_height};
}

CameraSpec SimConfig::default_camera(int image_size) {
  CameraSpec cam = CameraSpec::look_at(Vec3(0.03, 0.0, 0.05), -std::numbers::pi / 3.0,
                                       35.0 * std::numbers::pi / 180.0, 0.6);
  cam.height = image_size;
  cam.width = image_size;
  cam.ortho_extent = 0.13;
  cam.near = 0.4;
  cam.far = 0.8;
  return cam;
}

bool SimState::operator==(const SimState& o) const {
  return gripper_pose == o.gripper_pose && fingers == o.fingers && mug_pose == o.mug_pose &&
         attached == o.attached && step_index == o.step_index &&
         mug_in_gripper.rotation == o.mug_in_gripper.rotation &&
         mug_in_gripper.translation == o.mug_in_gripper.translation;
}

std::set<AffordanceCategory> derive_affordances(const MugSpec& spec, const GripperParams& gripper) {
  spec.validate_geometry();
  std::set<AffordanceCategory> out;
  const double opening = gripper.max_opening();
  const double body_width = 2.0 * spec.body_radius;
  if (body_width < opening && body_width >= gripper.min_grip) out.insert(AffordanceCategory::BodyGrasp);
  if (spec.has_handle) {
    // Left/right fingers overhang the bar into the gap when the bar is
    // narrower than a finger.
    const double overhang = std::max(0.0, 0.5 * (gripper.finger_width - spec.handle_width));
    if (spec.handle_depth < opening && spec.handle_depth >= gripper.min_grip &&
        spec.handle_clearance >= overhang) {
      out.insert(AffordanceCategory::HandleLeftRight);
    }
    // Front/back grasp puts the inner finger between bar and body.
    if (spec.handle_width < opening && spec.handle_width >= gripper.min_grip &&
        spec.handle_clearance >= gripper.finger_thickness) {
      out.insert(AffordanceCategory::HandleFrontBack);
    }
  }
  if (out.empty()) throw Error(ErrorKind::EmptyAffordance, "mug " + spec.id + " affords no grasp");
  return out;
}

std::vector<Primitive> mug_primitives(const MugSpec& spec) {
  std::vector<Primitive> prims;
  prims.push_back(CylinderPrimitive{RigidTransform{}, spec.body_radius, spec.body_height, true,
                                    !spec.wall_top_open});
  if (!spec.has_handle) return prims;
  const Vec3 bar = spec.handle_bar_center();
  prims.push_back(BoxPrimitive{RigidTransform{Mat3::Identity(), bar},
                               Vec3(0.5 * spec.handle_width, 0.5 * spec.handle_depth,
                                    0.5 * spec.handle_height)});
  const double arm = spec.handle_arm_thickness();
  // Arms start slightly inside the wall so the handle reads as attached.
  const double x0 = 0.9 * spec.body_radius;
  const double x1 = spec.body_radius + spec.handle_clearance;
  for (double sign : {1.0, -1.0}) {
    const double zc = bar.z() + sign * (0.5 * spec.handle_height - 0.5 * arm);
    prims.push_back(BoxPrimitive{RigidTransform{Mat3::Identity(), Vec3(0.5 * (x0 + x1), 0.0, zc)},
                                 Vec3(0.5 * (x1 - x0), 0.5 * spec.handle_depth, 0.5 * arm)});
  }
  return prims;
}

std::vector<BoxPrimitive> gripper_boxes(const GripperParams& g, const std::array<double, 2>& fingers) {
  const Vec3 finger_half(0.5 * g.finger_width, 0.5 * g.finger_thickness, 0.5 * g.finger_length);
  return {
      BoxPrimitive{RigidTransform{Mat3::Identity(), Vec3(0, fingers[0] + 0.5 * g.finger_thickness, 0)},
                   finger_half},
      BoxPrimitive{RigidTransform{Mat3::Identity(), Vec3(0, -(fingers[1] + 0.5 * g.finger_thickness), 0)},
                   finger_half},
      BoxPrimitive{RigidTransform{Mat3::Identity(), Vec3(0, 0, 0.5 * g.finger_length + 0.5 * g.palm_thickness)},
                   Vec3(0.5 * g.finger_width, g.finger_max + g.finger_thickness, 0.5 * g.palm_thickness)},
  };
}

MugSim::MugSim(MugSpec spec, SimConfig config) : spec_(std::move(spec)), config_(std::move(config)) {
  spec_.validate_geometry();
  config_.camera.validate();
}

SimState MugSim::reset(std::uint64_t /*seed*/) const {
  // The initial configuration is fixed; the seed only exists so callers can
  // thread per-episode seeds uniformly.
  SimState s;
  s.gripper_pose = config_.home_pose;
  s.fingers = {config_.gripper.finger_max, config_.gripper.finger_max};
  s.mug_pose = Pose6::Zero();
  s.attached = false;
  s.step_index = 0;
  return s;
}

namespace {

/// Interval of the line o + u d inside a solid cylinder (axis z, z in [0, h]).
std::optional<std::pair<double, double>> line_cylinder(const Vec3& o, const Vec3& d, double r, double h) {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  const double a = d.x() * d.x() + d.y() * d.y();
  const double b = 2.0 * (o.x() * d.x() + o.y() * d.y());
  const double c = o.x() * o.x() + o.y() * o.y() - r * r;
  if (a < 1e-300) {
    if (c > 0) return std::nullopt;
  } else {
    const double disc = b * b - 4 * a * c;
    if (disc < 0) return std::nullopt;
    const double sq = std::sqrt(disc);
    lo = (-b - sq) / (2 * a);
    hi = (-b + sq) / (2 * a);
  }
  if (std::abs(d.z()) < 1e-300) {
    if (o.z() < 0 || o.z() > h) return std::nullopt;
  } else {
    double t0 = (0 - o.z()) / d.z();
    double t1 = (h - o.z()) / d.z();
    if (t0 > t1) std::swap(t0, t1);
    lo = std::max(lo, t0);
    hi = std::min(hi, t1);
  }
  if (lo > hi) return std::nullopt;
  return std::make_pair(lo, hi);
}

std::optional<std::pair<double, double>> line_box(const Vec3& o, const Vec3& d, const BoxPrimitive& box) {
  const Mat3 rt = box.frame.rotation.transpose();
  const Vec3 lo_o = rt * (o - box.frame.translation);
  const Vec3 lo_d = rt * d;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    const double h = box.half_extents[k];
    if (std::abs(lo_d[k]) < 1e-300) {
      if (lo_o[k] < -h || lo_o[k] > h) return std::nullopt;
      continue;
    }
    double t0 = (-h - lo_o[k]) / lo_d[k];
    double t1 = (h - lo_o[k]) / lo_d[k];
    if (t0 > t1) std::swap(t0, t1);
    lo = std::max(lo, t0);
    hi = std::min(hi, t1);
  }
  if (lo > hi) return std::nullopt;
  return std::make_pair(lo, hi);
}

}  // namespace

std::vector<std::pair<double, double>> MugSim::finger_line_intervals(const SimState& s) const {
  const RigidTransform grip = RigidTransform::from_pose(s.gripper_pose);
  const RigidTransform mug_inv = RigidTransform::from_pose(s.mug_pose).inverse();
  // Finger line in the mug frame.
  const Vec3 o = mug_inv.apply(grip.translation);
  const Vec3 d = mug_inv.rotation * grip.rotation.col(1);

  std::vector<std::pair<double, double>> spans;
  if (auto iv = line_cylinder(o, d, spec_.body_radius, spec_.body_height)) spans.push_back(*iv);
  for (const auto& prim : mug_primitives(spec_)) {
    if (const auto* box = std::get_if<BoxPrimitive>(&prim)) {
      if (auto iv = line_box(o, d, *box)) spans.push_back(*iv);
    }
  }
  std::sort(spans.begin(), spans.end());
  std::vector<std::pair<double, double>> merged;
  for (const auto& iv : spans) {
    if (!merged.empty() && iv.first <= merged.back().second) {
      merged.back().second = std::max(merged.back().second, iv.second);
    } else {
      merged.push_back(iv);
    }
  }
  return merged;
}

void MugSim::update_fingers(SimState& s, double grip) const {
  const GripperParams& g = config_.gripper;
  if (s.attached) return;  // fingers hold their grasp
  if (grip < 0.5) {
    for (double& f : s.fingers) f = std::min(g.finger_max, f + g.finger_speed);
    return;
  }
  const auto spans = finger_line_intervals(s);

  // Positive-side finger at u = +f0 moves toward smaller u.
  const double pos0 = s.fingers[0];
  std::optional<double> stop_pos;
  for (const auto& [a, b] : spans) {
    const bool contains = a < pos0 && pos0 < b;
    if (!contains && b <= pos0 && b >= 0.0) stop_pos = stop_pos ? std::max(*stop_pos, b) : b;
  }
  double new0 = std::max(pos0 - g.finger_speed, 0.0);
  if (stop_pos) new0 = std::max(new0, *stop_pos);

  // Negative-side finger at u = -f1 moves toward larger u.
  const double pos1 = -s.fingers[1];
  std::optional<double> stop_neg;
  for (const auto& [a, b] : spans) {
    const bool contains = a < pos1 && pos1 < b;
    if (!contains && a >= pos1 && a <= 0.0) stop_neg = stop_neg ? std::min(*stop_neg, a) : a;
  }
  double new1 = std::min(pos1 + g.finger_speed, 0.0);
  if (stop_neg) new1 = std::min(new1, *stop_neg);

  s.fingers = {std::clamp(new0, 0.0, g.finger_max), std::clamp(-new1, 0.0, g.finger_max)};

  const bool contact_pos = stop_pos && (s.fingers[0] - *stop_pos) <= g.contact_eps;
  const bool contact_neg = stop_neg && (*stop_neg + s.fingers[1]) <= g.contact_eps;
  const double width = s.fingers[0] + s.fingers[1];
  if (contact_pos && contact_neg && width >= g.min_grip && width <= g.max_opening()) {
    s.attached = true;
    s.mug_in_gripper = RigidTransform::from_pose(s.gripper_pose).inverse() * RigidTransform::from_pose(s.mug_pose);
  }
}

SimState MugSim::step(const SimState& state, const Action& action) const {
  SimState s = state;
  s.step_index += 1;
  update_fingers(s, action[6]);

  for (int k = 0; k < 3; ++k) {
    const double d = std::clamp(action[k], -config_.trans_clip, config_.trans_clip);
    s.gripper_pose[k] = std::clamp(s.gripper_pose[k] + d, config_.workspace_min[k], config_.workspace_max[k]);
  }
  for (int k = 3; k < 6; ++k) {
    const double d = std::clamp(action[k], -config_.rot_clip, config_.rot_clip);
    if (d != 0.0) s.gripper_pose[k] = wrap_angle(s.gripper_pose[k] + d);
  }
  if (s.attached) {
    s.mug_pose = (RigidTransform::from_pose(s.gripper_pose) * s.mug_in_gripper).to_pose();
  }
  return s;
}

RelativeState MugSim::relative_state(const SimState& s) const {
  const RigidTransform grip = RigidTransform::from_pose(s.gripper_pose);
  const RigidTransform mug = RigidTransform::from_pose(s.mug_pose);
  const RigidTransform rel = grip.inverse() * mug;
  RelativeState out;
  out.head<3>() = rel.translation;
  out.segment<3>(3) = rpy_from_rotation(rel.rotation);
  out[6] = s.fingers[0];
  out[7] = s.fingers[1];
  return out;
}

Observation MugSim::observe(const SimState& s) const { return {render_depth(s), relative_state(s)}; }

Scene MugSim::scene(const SimState& s) const {
  Scene scene;
  if (config_.render_table) scene.primitives.push_back(PlanePrimitive{Vec3::Zero(), Vec3::UnitZ()});
  const RigidTransform mug = RigidTransform::from_pose(s.mug_pose);
  for (auto prim : mug_primitives(spec_)) {
    std::visit(
        [&](auto& p) {
          if constexpr (!std::is_same_v<std::decay_t<decltype(p)>, PlanePrimitive>) p.frame = mug * p.frame;
        },
        prim);
    scene.primitives.push_back(prim);
  }
  const RigidTransform grip = RigidTransform::from_pose(s.gripper_pose);
  for (auto box : gripper_boxes(config_.gripper, s.fingers)) {
    box.frame = grip * box.frame;
    scene.primitives.push_back(box);
  }
  return scene;
}

DepthImage MugSim::render_depth(const SimState& s, const CameraSpec& camera) const {
  return render_scene(scene(s), camera);
}

bool is_success(const SimState& initial, const SimState& current, double lift) {
  return current.attached && (current.mug_pose[2] - initial.mug_pose[2]) >= lift;
}

}  // namespace affcue

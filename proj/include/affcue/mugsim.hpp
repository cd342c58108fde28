#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "affcue/geometry.hpp"
#include "affcue/render.hpp"

namespace affcue {

enum class AffordanceCategory : std::uint8_t { BodyGrasp = 0, HandleLeftRight = 1, HandleFrontBack = 2 };

inline constexpr int kNumCategories = 3;
inline constexpr std::array<AffordanceCategory, kNumCategories> kAllCategories = {
    AffordanceCategory::BodyGrasp, AffordanceCategory::HandleLeftRight,
    AffordanceCategory::HandleFrontBack};

/// "body", "handle_lr", "handle_fb".
std::string_view category_name(AffordanceCategory c);
AffordanceCategory category_from_name(std::string_view name);
inline int category_index(AffordanceCategory c) { return static_cast<int>(c); }

/// Parametric mug: open or closed cylinder body standing on the table at the
/// origin, plus an optional handle on the +x side. The handle is a vertical
/// grip bar (x extent handle_width, y extent handle_depth, z extent
/// handle_height) at handle_clearance from the body wall, joined to the body
/// by two horizontal arms.
struct MugSpec {
  std::string id;
  double body_radius = 0.03;
  double body_height = 0.09;
  bool wall_top_open = true;
  bool has_handle = false;
  double handle_width = 0.0;
  double handle_depth = 0.0;
  double handle_height = 0.0;
  double handle_clearance = 0.0;
  std::set<AffordanceCategory> affordable;

  /// Throws ConfigError on non-positive dimensions or a handle that does not
  /// fit the body.
  void validate_geometry() const;
  double handle_arm_thickness() const;
  /// Center of the grip bar in the mug frame.
  Vec3 handle_bar_center() const;
};

struct GripperParams {
  double finger_max = 0.04;  ///< per-finger opening; total opening 2x
  double finger_speed = 0.02;
  double contact_eps = 0.005;
  double min_grip = 0.005;
  double finger_thickness = 0.008;  ///< along the finger axis
  double finger_width = 0.02;       ///< along gripper local x
  double finger_length = 0.04;      ///< along gripper local z
  double palm_thickness = 0.01;

  double max_opening() const { return 2.0 * finger_max; }
};

struct SimConfig {
  GripperParams gripper;
  double trans_clip = 0.02;
  double rot_clip = 0.3;
  double lift_success = 0.05;
  Vec3 workspace_min{-0.2, -0.2, 0.0};
  Vec3 workspace_max{0.25, 0.2, 0.3};
  Pose6 home_pose = (Pose6() << 0.03, 0.0, 0.085, 0.0, 0.0, 0.7853981633974483).finished();
  CameraSpec camera = default_camera(144);
  bool render_table = true;

  static CameraSpec default_camera(int image_size);
};

using Action = Eigen::Matrix<double, 7, 1>;
using RelativeState = Eigen::Matrix<double, 8, 1>;

struct SimState {
  Pose6 gripper_pose = Pose6::Zero();
  std::array<double, 2> fingers{0.0, 0.0};
  Pose6 mug_pose = Pose6::Zero();
  bool attached = false;
  int step_index = 0;
  /// Mug pose in the gripper frame, fixed at attach time.
  RigidTransform mug_in_gripper;

  bool operator==(const SimState& other) const;
};

struct Observation {
  DepthImage depth;
  RelativeState state;
};

/// Derived set of grasp categories the geometry admits. Throws
/// EmptyAffordance when no category is feasible.
std::set<AffordanceCategory> derive_affordances(const MugSpec& spec, const GripperParams& gripper);

/// Deterministic kinematic grasping world for one mug.
class MugSim {
 public:
  MugSim(MugSpec spec, SimConfig config);

  const MugSpec& mug() const { return spec_; }
  const SimConfig& config() const { return config_; }

  SimState reset(std::uint64_t seed = 0) const;
  SimState step(const SimState& state, const Action& action) const;
  Observation observe(const SimState& state) const;
  RelativeState relative_state(const SimState& state) const;
  DepthImage render_depth(const SimState& state, const CameraSpec& camera) const;
  DepthImage render_depth(const SimState& state) const { return render_depth(state, config_.camera); }

  /// World-space scene for the given state (table, mug, gripper).
  Scene scene(const SimState& state) const;
  /// Mug solids intersected with the finger line, as intervals in the finger
  /// axis coordinate of the gripper frame (only used for contact).
  std::vector<std::pair<double, double>> finger_line_intervals(const SimState& state) const;

 private:
  void update_fingers(SimState& s, double grip) const;

  MugSpec spec_;
  SimConfig config_;
};

/// Attached and lifted by at least `lift` meters.
bool is_success(const SimState& initial, const SimState& current, double lift = 0.05);

/// Mug primitives in the mug frame: body cylinder and the three handle boxes.
std::vector<Primitive> mug_primitives(const MugSpec& spec);
std::vector<BoxPrimitive> gripper_boxes(const GripperParams& gripper, const std::array<double, 2>& fingers);

}  // namespace affcue

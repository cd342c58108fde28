#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "affcue/dataset.hpp"
#include "affcue/mugsim.hpp"

namespace affcue {

struct Waypoint {
  Pose6 pose = Pose6::Zero();
  double grip = 0.0;  ///< flag carried by the action issued from this waypoint
};

/// Waypoint k (1-based) is the target gripper pose of state k; the action
/// from state k drives toward waypoint k+1 with waypoint k's grip flag.
struct ExpertScript {
  AffordanceCategory category = AffordanceCategory::BodyGrasp;
  std::vector<Waypoint> waypoints;
  int attach_step = 0;                ///< action index (1-based) whose finger update closes the grasp
  std::pair<int, int> lift_steps{0, 0};  ///< 1-based states over which the mug rises

  int horizon() const { return static_cast<int>(waypoints.size()); }
};

struct MugRanges {
  double body_radius[2] = {0.025, 0.05};
  double body_height[2] = {0.07, 0.12};
  double handle_probability = 0.75;
  double open_top_probability = 0.7;
  double handle_width[2] = {0.008, 0.025};
  double handle_depth[2] = {0.008, 0.025};
  double handle_height[2] = {0.03, 0.05};
  double handle_clearance[2] = {0.004, 0.022};
};

/// n mugs whose derived affordances are nonempty and plannable, each category
/// afforded by at least ceil(n/4) mugs. Throws InvalidArgument for n < 3 and
/// GenerationExhausted when the ranges cannot meet coverage.
std::vector<MugSpec> generate_mug_catalog(int n, std::uint64_t seed, const SimConfig& sim,
                                          const MugRanges& ranges = {});

/// Nominal grasp pose of a category in the mug frame (also used to classify
/// policy grasps). Returns nullopt for handle categories on handleless mugs.
std::optional<Pose6> canonical_grasp_pose(const MugSpec& spec, AffordanceCategory category,
                                          const SimConfig& sim);

/// Throws NotAffordable or Unreachable. The returned script succeeds when
/// executed (verified by simulation).
ExpertScript plan_demo(const MugSpec& spec, AffordanceCategory category, const SimConfig& sim,
                       std::optional<std::uint64_t> jitter_seed = std::nullopt, int horizon = 8);

/// Closed-loop expert action from `current` toward waypoint `k + 1`
/// (k is the 0-based action index).
Action script_action(const ExpertScript& script, int k, const SimState& current, const SimConfig& sim);

struct Demo {
  Trajectory trajectory;
  std::vector<Pose6> mug_trace;
  std::vector<SimState> states;
};

/// Executes the script, rendering and recording every step. Throws
/// DemoFailed if the episode does not end in success.
Demo rollout_demo(const MugSpec& spec, const ExpertScript& script, const SimConfig& sim,
                  const std::string& id = "demo");

struct BuildStats {
  int plan_attempts = 0;
  int plan_failures = 0;
};

/// per_category successful demos for each category, mugs drawn uniformly
/// among those affording it. Per-trajectory seeds derive from (seed, index).
Dataset build_dataset(const std::vector<MugSpec>& catalog, int per_category, std::uint64_t seed,
                      const SimConfig& sim, BuildStats* stats = nullptr);

}  // namespace affcue

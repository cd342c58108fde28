#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "affcue/mugsim.hpp"

namespace affcue {

inline constexpr int kStateDim = 8;
inline constexpr int kActionDim = 7;
inline constexpr int kSegmentInputDim = kStateDim + kActionDim;

/// One demonstration: T depth frames and states, T-1 expert actions.
/// Step indices in this API are 1-based where they refer to trajectory steps
/// (segment bounds), and 0-based for raw row access.
struct Trajectory {
  std::string id;
  AffordanceCategory category = AffordanceCategory::BodyGrasp;
  std::string mug_id;
  int T = 0;
  int H = 0;
  int W = 0;
  std::vector<float> depth;   ///< T * H * W
  std::vector<float> state;   ///< T * 8
  std::vector<float> action;  ///< (T - 1) * 7
  std::optional<std::pair<int, int>> gt_segment;

  void validate() const;
  Eigen::Map<const Eigen::VectorXf> state_row(int t0) const {
    return {state.data() + static_cast<std::ptrdiff_t>(t0) * kStateDim, kStateDim};
  }
  Eigen::Map<const Eigen::VectorXf> action_row(int t0) const {
    return {action.data() + static_cast<std::ptrdiff_t>(t0) * kActionDim, kActionDim};
  }
  const float* frame(int t0) const { return depth.data() + static_cast<std::ptrdiff_t>(t0) * H * W; }

  bool operator==(const Trajectory&) const = default;
};

void save_trajectory(const Trajectory& t, const std::filesystem::path& path);
Trajectory load_trajectory(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_trajectory(const Trajectory& t);
Trajectory decode_trajectory(const std::vector<std::uint8_t>& bytes);

struct InteractionSegment {
  std::pair<int, int> bounds;  ///< 1-based inclusive (m, n)
  std::vector<Eigen::VectorXd> states;        ///< s_t, t = m..n
  std::vector<Eigen::VectorXd> prev_actions;  ///< a*_{t-1}, t = m..n
  std::size_t size() const { return states.size(); }
};

struct SegmentThresholds {
  double eps_pos = 1e-4;
  double eps_rot = 1e-3;
};

/// Bounds of the steps where the mug's world pose changes.
/// Throws NoInteraction when no step exceeds the thresholds.
std::pair<int, int> detect_interaction_bounds(const std::vector<Pose6>& mug_trace,
                                              const SegmentThresholds& thresholds = {});
InteractionSegment extract_interaction_segment(const Trajectory& traj, const std::vector<Pose6>& mug_trace,
                                               const SegmentThresholds& thresholds = {});
/// Segment from explicit 1-based bounds (e.g. stored gt_segment).
InteractionSegment segment_from_bounds(const Trajectory& traj, std::pair<int, int> bounds);

/// Previous-action rows aligned to steps 1..T: row 0 is zeros, row t is
/// action[t - 1]. Shape T x 7.
Eigen::MatrixXd prepend_dummy_action(const Trajectory& traj);

struct Dataset {
  SimConfig sim;
  std::vector<Trajectory> trajectories;
  std::vector<std::vector<Pose6>> mug_traces;  ///< per trajectory, may be empty

  std::size_t size() const { return trajectories.size(); }
};

/// Writes dataset.json, sim_config.json, and one .afft file per trajectory.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

struct TripletBatch {
  std::vector<std::size_t> anchors;  ///< indices into the dataset
  std::vector<std::size_t> positives;
  std::vector<std::size_t> negatives;
  std::size_t size() const { return anchors.size(); }
};

/// Uniform triplets: anchor from a category with >= 2 members, positive from
/// the same category (different trajectory), negative from any other
/// category. Throws InsufficientData when no valid triplet exists.
TripletBatch sample_triplets(const std::vector<AffordanceCategory>& categories, std::size_t batch,
                             std::uint64_t seed);
TripletBatch sample_triplets(const Dataset& ds, std::size_t batch, std::uint64_t seed);

}  // namespace affcue

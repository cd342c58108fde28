#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "affcue/checkpoint.hpp"
#include "affcue/expert.hpp"
#include "affcue/model.hpp"

namespace affcue {

/// Closed-loop controller queried once per step.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual void reset(const MugSpec& mug) = 0;
  /// t is the 0-based step index of `state`.
  virtual Action act(const SimState& state, const Observation& obs, int t) = 0;
};

/// Trained network run autoregressively: a_prev is zero at the first step and
/// the previous prediction afterwards. The segment encoder is never used.
class NetworkPolicy : public Policy {
 public:
  struct StepRecord {
    Eigen::VectorXf a_prev;  ///< previous-action input fed to the network (network units)
    Eigen::VectorXf output;  ///< predicted action (network units)
    std::vector<float> cue;  ///< affordance cue (empty for the baseline)
  };

  NetworkPolicy(const Model& model, std::vector<float> params);
  explicit NetworkPolicy(const Checkpoint& ckpt);

  void reset(const MugSpec& mug) override;
  Action act(const SimState& state, const Observation& obs, int t) override;

  const Model& model() const { return *model_; }
  /// Per-step inputs/outputs since the last reset.
  const std::vector<StepRecord>& records() const { return records_; }

 private:
  std::shared_ptr<const Model> model_;
  std::vector<float> params_;
  Carry<float> carry_;
  nn::Vec<float> a_prev_;
  std::vector<StepRecord> records_;
};

/// Replays the expert script of a fixed category (falls back to any
/// affordable category when the mug lacks it).
class ScriptPolicy : public Policy {
 public:
  ScriptPolicy(AffordanceCategory category, SimConfig sim) : category_(category), sim_(std::move(sim)) {}
  void reset(const MugSpec& mug) override;
  Action act(const SimState& state, const Observation& obs, int t) override;

 private:
  AffordanceCategory category_;
  SimConfig sim_;
  ExpertScript script_;
};

class ZeroPolicy : public Policy {
 public:
  void reset(const MugSpec&) override {}
  Action act(const SimState&, const Observation&, int) override { return Action::Zero(); }
};

struct EpisodeTrace {
  std::string mug_id;
  std::vector<SimState> states;      ///< states[0] is the reset state
  std::vector<Action> actions;
  std::vector<DepthImage> depths;    ///< observation per state
  int steps_taken = 0;
  bool success = false;
  std::optional<int> attach_step;    ///< 1-based action index at which the mug attached
  AffordanceCategory classification = AffordanceCategory::BodyGrasp;
};

/// Runs at most horizon - 1 actions; stops at the first successful state.
EpisodeTrace rollout_policy(Policy& policy, const MugSpec& mug, const SimConfig& sim, int horizon = 8);
EpisodeTrace rollout_policy(const Checkpoint& ckpt, const MugSpec& mug, int horizon = 8);

/// Nearest canonical grasp pose (position distance + 0.05 m/rad yaw, yaw
/// modulo pi) to the gripper pose expressed in the mug frame.
AffordanceCategory classify_grasp(const MugSpec& mug, const SimState& state, const SimConfig& sim);

struct EpisodeSummary {
  int index = 0;
  std::string mug_id;
  int steps_taken = 0;
  bool success = false;
  AffordanceCategory classification = AffordanceCategory::BodyGrasp;
};

struct EvalReport {
  static constexpr int kSchemaVersion = 1;
  int n_episodes = 0;
  int successes = 0;
  double success_rate = 0.0;
  std::array<std::pair<int, int>, kNumCategories> per_category{};  ///< (attempts, successes) by classification
  std::vector<EpisodeSummary> episodes;

  Json to_json() const;
};

/// n_grasps mugs drawn uniformly with replacement from the catalog.
EvalReport evaluate(Policy& policy, const std::vector<MugSpec>& catalog, int n_grasps, std::uint64_t seed,
                    const SimConfig& sim, int horizon = 8);
EvalReport evaluate(const Checkpoint& ckpt, const std::vector<MugSpec>& catalog, int n_grasps, std::uint64_t seed,
                    int horizon = 8);

}  // namespace affcue

#include "affcue/evaluation.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "affcue/error.hpp"
#include "affcue/rng.hpp"

namespace affcue {

NetworkPolicy::NetworkPolicy(const Model& model, std::vector<float> params)
    : model_(std::make_shared<const Model>(model)), params_(std::move(params)) {
  if (params_.size() != model_->parameter_count()) {
    throw Error(ErrorKind::CheckpointError, "parameter vector does not match the model layout");
  }
}

NetworkPolicy::NetworkPolicy(const Checkpoint& ckpt) : NetworkPolicy(Model(ckpt.model), ckpt.params) {}

void NetworkPolicy::reset(const MugSpec&) {
  carry_ = model_->fresh_carry<float>();
  a_prev_ = nn::Vec<float>::Zero(kActionDim);
  records_.clear();
}

Action NetworkPolicy::act(const SimState&, const Observation& obs, int) {
  const auto& cfg = model_->config().encoder;
  if (obs.depth.height != cfg.image_height || obs.depth.width != cfg.image_width) {
    throw Error(ErrorKind::ShapeError, "observation size does not match the model");
  }
  const std::vector<float> image(obs.depth.pixels.begin(), obs.depth.pixels.end());
  const nn::Vec<float> state = obs.state.cast<float>();
  const nn::ParamRef<float> P{&model_->layout(), params_.data(), nullptr};
  StepRecord rec;
  rec.a_prev = a_prev_;
  nn::Vec<float> out;
  if (model_->has_attention()) {
    const EncoderStep<float> enc = model_->encode_step(P, image.data(), state, a_prev_, carry_);
    out = model_->decode_action(P, state, enc).action;
    carry_ = enc.carry;
    const nn::Vec<float> cue = enc.aff_cue();
    rec.cue.assign(cue.data(), cue.data() + cue.size());
  } else {
    const BaselineStep<float> st = model_->baseline_step(P, image.data(), state, a_prev_, carry_);
    out = st.action;
    carry_ = st.carry;
  }
  rec.output = out;
  records_.push_back(std::move(rec));
  a_prev_ = out;
  return model_->denormalize_action(out).cast<double>();
}

void ScriptPolicy::reset(const MugSpec& mug) {
  AffordanceCategory c = category_;
  if (!mug.affordable.contains(c)) c = *mug.affordable.begin();
  script_ = plan_demo(mug, c, sim_);
}

Action ScriptPolicy::act(const SimState& state, const Observation&, int t) {
  if (t + 1 >= script_.horizon()) return Action::Zero();
  return script_action(script_, t, state, sim_);
}

AffordanceCategory classify_grasp(const MugSpec& mug, const SimState& s, const SimConfig& sim) {
  const RigidTransform mug_tf = RigidTransform::from_pose(s.mug_pose);
  const RigidTransform rel = mug_tf.inverse() * RigidTransform::from_pose(s.gripper_pose);
  const Pose6 g = rel.to_pose();
  AffordanceCategory best = AffordanceCategory::BodyGrasp;
  double best_d = std::numeric_limits<double>::infinity();
  for (auto c : kAllCategories) {
    const auto canon = canonical_grasp_pose(mug, c, sim);
    if (!canon) continue;
    double dyaw = std::fmod(std::abs(g[5] - (*canon)[5]), std::numbers::pi);
    dyaw = std::min(dyaw, std::numbers::pi - dyaw);
    const double d = (g.head<3>() - canon->head<3>()).norm() + 0.05 * dyaw;
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

EpisodeTrace rollout_policy(Policy& policy, const MugSpec& mug, const SimConfig& sim_cfg, int horizon) {
  if (horizon < 1) throw Error(ErrorKind::InvalidArgument, "horizon must be >= 1");
  const MugSim sim(mug, sim_cfg);
  policy.reset(mug);
  EpisodeTrace ep;
  ep.mug_id = mug.id;
  SimState s = sim.reset();
  const SimState initial = s;
  ep.states.push_back(s);
  for (int t = 0; t + 1 < horizon; ++t) {
    const Observation obs = sim.observe(s);
    ep.depths.push_back(obs.depth);
    const Action a = policy.act(s, obs, t);
    ep.actions.push_back(a);
    s = sim.step(s, a);
    ep.states.push_back(s);
    ep.steps_taken = t + 1;
    if (s.attached && !ep.attach_step) ep.attach_step = t + 1;
    if (is_success(initial, s, sim_cfg.lift_success)) {
      ep.success = true;
      break;
    }
  }
  ep.depths.push_back(sim.observe(s).depth);
  const SimState& snap = ep.attach_step ? ep.states[static_cast<std::size_t>(*ep.attach_step)] : ep.states.back();
  ep.classification = classify_grasp(mug, snap, sim_cfg);
  return ep;
}

EpisodeTrace rollout_policy(const Checkpoint& ckpt, const MugSpec& mug, int horizon) {
  NetworkPolicy policy(ckpt);
  return rollout_policy(policy, mug, ckpt.sim, horizon);
}

Json EvalReport::to_json() const {
  Json breakdown = Json::object();
  for (auto c : kAllCategories) {
    const auto& [attempts, succ] = per_category[static_cast<std::size_t>(category_index(c))];
    breakdown[std::string(category_name(c))] = Json{{"attempts", attempts}, {"successes", succ}};
  }
  Json eps = Json::array();
  for (const auto& e : episodes) {
    eps.push_back(Json{{"index", e.index},
                       {"mug_id", e.mug_id},
                       {"steps_taken", e.steps_taken},
                       {"success", e.success},
                       {"classification", category_name(e.classification)}});
  }
  return Json{{"schema_version", kSchemaVersion},
              {"n_episodes", n_episodes},
              {"successes", successes},
              {"success_rate", success_rate},
              {"per_category_breakdown", breakdown},
              {"per_episode", eps}};
}

EvalReport evaluate(Policy& policy, const std::vector<MugSpec>& catalog, int n_grasps, std::uint64_t seed,
                    const SimConfig& sim, int horizon) {
  if (n_grasps < 1) throw Error(ErrorKind::InvalidArgument, "n_grasps must be >= 1");
  if (catalog.empty()) throw Error(ErrorKind::InvalidArgument, "evaluation catalog is empty");
  Rng rng(seed);
  EvalReport r;
  for (int i = 0; i < n_grasps; ++i) {
    const MugSpec& mug = catalog[rng.uniform_index(catalog.size())];
    const EpisodeTrace ep = rollout_policy(policy, mug, sim, horizon);
    r.episodes.push_back({i, ep.mug_id, ep.steps_taken, ep.success, ep.classification});
    auto& cell = r.per_category[static_cast<std::size_t>(category_index(ep.classification))];
    cell.first += 1;
    if (ep.success) {
      cell.second += 1;
      r.successes += 1;
    }
  }
  r.n_episodes = n_grasps;
  r.success_rate = static_cast<double>(r.successes) / n_grasps;
  return r;
}

EvalReport evaluate(const Checkpoint& ckpt, const std::vector<MugSpec>& catalog, int n_grasps, std::uint64_t seed,
                    int horizon) {
  NetworkPolicy policy(ckpt);
  return evaluate(policy, catalog, n_grasps, seed, ckpt.sim, horizon);
}

}  // namespace affcue

#include "affcue/expert.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>
#include <tuple>

#include "affcue/error.hpp"
#include "affcue/rng.hpp"

namespace affcue {

namespace {

constexpr double kMargin = 0.001;
constexpr double kJitter = 0.005;

std::string indexed_id(const char* prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%03d", prefix, i);
  return buf;
}

double category_yaw(AffordanceCategory c) {
  return c == AffordanceCategory::HandleFrontBack ? 0.5 * std::numbers::pi : 0.0;
}

/// Grasp-center x for the front/back grasp, or nullopt if the fingers cannot
/// pre-close in the gap and then reach both bar faces in one step.
std::optional<double> front_back_center_x(const MugSpec& m, const GripperParams& g) {
  const double inner = m.body_radius + m.handle_clearance;
  const double outer = inner + m.handle_width;
  const double q = g.finger_max - g.finger_speed;  // pad offset after one pre-close step
  const double lo = std::max({inner + q - g.finger_speed, m.body_radius + g.finger_thickness + q,
                              outer - q + kMargin});
  const double hi = std::min(inner + q - kMargin, outer + g.finger_speed - q);
  if (lo > hi) return std::nullopt;
  return 0.5 * (lo + hi);
}

/// Simulates without rendering; true when the script lifts the mug.
bool script_succeeds(const MugSim& sim, const ExpertScript& script) {
  const SimState initial = sim.reset();
  SimState s = initial;
  for (int k = 0; k + 1 < script.horizon(); ++k) {
    s = sim.step(s, script_action(script, k, s, sim.config()));
    if (is_success(initial, s, sim.config().lift_success)) return true;
  }
  return false;
}

}  // namespace

std::optional<Pose6> canonical_grasp_pose(const MugSpec& m, AffordanceCategory c, const SimConfig& sim) {
  Pose6 p = Pose6::Zero();
  p[2] = 0.5 * m.body_height;
  p[5] = category_yaw(c);
  switch (c) {
    case AffordanceCategory::BodyGrasp:
      return p;
    case AffordanceCategory::HandleLeftRight:
      if (!m.has_handle) return std::nullopt;
      p[0] = m.handle_bar_center().x();
      return p;
    case AffordanceCategory::HandleFrontBack:
      if (!m.has_handle) return std::nullopt;
      p[0] = front_back_center_x(m, sim.gripper).value_or(m.handle_bar_center().x());
      return p;
  }
  return std::nullopt;
}

ExpertScript plan_demo(const MugSpec& spec, AffordanceCategory category, const SimConfig& sim,
                       std::optional<std::uint64_t> jitter_seed, int horizon) {
  if (!spec.affordable.contains(category)) {
    throw Error(ErrorKind::NotAffordable,
                "mug " + spec.id + " does not afford " + std::string(category_name(category)));
  }
  if (horizon != 8) throw Error(ErrorKind::Unreachable, "scripted demos are defined for 8 steps");
  const GripperParams& g = sim.gripper;
  const bool body = category == AffordanceCategory::BodyGrasp;

  if (body && g.finger_max - spec.body_radius > g.finger_speed) {
    throw Error(ErrorKind::Unreachable, "body too thin to close in one step");
  }
  if (category == AffordanceCategory::HandleFrontBack && !front_back_center_x(spec, g)) {
    throw Error(ErrorKind::Unreachable, "no front/back finger placement fits the handle gap");
  }
  Pose6 grasp = *canonical_grasp_pose(spec, category, sim);

  // Body grasps advance sideways onto the wall; handle grasps close in place.
  const double advance = body ? 0.75 * sim.trans_clip : 0.0;
  Pose6 pre = grasp;
  pre[0] -= advance;

  const Pose6& home = sim.home_pose;
  Eigen::Vector3d step_delta = (pre.head<3>() - home.head<3>()) / 3.0;
  const double yaw_step = wrap_angle(pre[5] - home[5]) / 3.0;
  if (step_delta.cwiseAbs().maxCoeff() > sim.trans_clip || std::abs(yaw_step) > sim.rot_clip) {
    throw Error(ErrorKind::Unreachable, "pre-grasp pose out of reach in three steps");
  }

  // Jitter amplitude per axis keeps every transit action inside the clip.
  Eigen::Vector3d amp;
  for (int k = 0; k < 3; ++k) amp[k] = std::clamp(0.5 * (sim.trans_clip - std::abs(step_delta[k])), 0.0, kJitter);
  Eigen::Vector3d grasp_amp = amp;
  if (!body) {
    // Handle grasps tolerate offsets only along z within the bar.
    const double bar_slack = 0.5 * spec.handle_height - spec.handle_arm_thickness() - kMargin;
    grasp_amp = Eigen::Vector3d(0.0, 0.0, std::clamp(bar_slack, 0.0, amp[2]));
  }

  std::array<Eigen::Vector3d, 3> jitter{Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero()};
  if (jitter_seed) {
    Rng rng(*jitter_seed);
    for (int w = 0; w < 3; ++w) {
      const Eigen::Vector3d& a = (w == 2) ? grasp_amp : amp;
      for (int k = 0; k < 3; ++k) jitter[w][k] = rng.uniform(-a[k], a[k]);
    }
  }

  ExpertScript script;
  script.category = category;
  auto add = [&](const Pose6& pose, double grip) { script.waypoints.push_back({pose, grip}); };
  add(home, 0.0);
  for (int w = 1; w <= 2; ++w) {
    Pose6 p = home;
    p.head<3>() += w * step_delta + jitter[w - 1];
    p[5] = wrap_angle(home[5] + w * yaw_step);
    add(p, 0.0);
  }
  Pose6 pre_j = pre;
  pre_j.head<3>() += jitter[2];
  add(pre_j, body ? 0.0 : 1.0);
  Pose6 grasp_j = pre_j;
  grasp_j[0] += advance;
  add(grasp_j, 1.0);
  for (int k = 1; k <= 3; ++k) {
    Pose6 lift = grasp_j;
    lift[2] += k * sim.trans_clip;
    add(lift, 1.0);
  }
  script.attach_step = 5;
  script.lift_steps = {6, 8};

  if (!script_succeeds(MugSim(spec, sim), script)) {
    throw Error(ErrorKind::Unreachable, "scripted " + std::string(category_name(category)) +
                                            " grasp fails on mug " + spec.id);
  }
  return script;
}

Action script_action(const ExpertScript& script, int k, const SimState& current, const SimConfig& sim) {
  const Pose6& target = script.waypoints.at(static_cast<std::size_t>(k) + 1).pose;
  Action a = Action::Zero();
  for (int i = 0; i < 3; ++i) a[i] = std::clamp(target[i] - current.gripper_pose[i], -sim.trans_clip, sim.trans_clip);
  for (int i = 3; i < 6; ++i) {
    a[i] = std::clamp(wrap_angle(target[i] - current.gripper_pose[i]), -sim.rot_clip, sim.rot_clip);
  }
  a[6] = script.waypoints.at(static_cast<std::size_t>(k)).grip;
  return a;
}

Demo rollout_demo(const MugSpec& spec, const ExpertScript& script, const SimConfig& sim_cfg, const std::string& id) {
  const MugSim sim(spec, sim_cfg);
  const int T = script.horizon();
  const CameraSpec& cam = sim_cfg.camera;
  Demo demo;
  Trajectory& t = demo.trajectory;
  t.id = id;
  t.category = script.category;
  t.mug_id = spec.id;
  t.T = T;
  t.H = cam.height;
  t.W = cam.width;

  SimState s = sim.reset();
  const SimState initial = s;
  bool success = false;
  for (int k = 0; k < T; ++k) {
    const Observation obs = sim.observe(s);
    for (double v : obs.depth.pixels) t.depth.push_back(static_cast<float>(v));
    for (int i = 0; i < kStateDim; ++i) t.state.push_back(static_cast<float>(obs.state[i]));
    demo.states.push_back(s);
    demo.mug_trace.push_back(s.mug_pose);
    if (k + 1 == T) break;
    const Action a = script_action(script, k, s, sim_cfg);
    for (int i = 0; i < kActionDim; ++i) t.action.push_back(static_cast<float>(a[i]));
    s = sim.step(s, a);
    success = success || is_success(initial, s, sim_cfg.lift_success);
  }
  if (!success) throw Error(ErrorKind::DemoFailed, "demo on mug " + spec.id + " did not lift the mug");
  t.gt_segment = script.lift_steps;
  t.validate();
  return demo;
}

std::vector<MugSpec> generate_mug_catalog(int n, std::uint64_t seed, const SimConfig& sim, const MugRanges& r) {
  if (n < 3) throw Error(ErrorKind::InvalidArgument, "catalog needs n >= 3 mugs");
  const int need = (n + 3) / 4;
  std::array<int, kNumCategories> covered{};
  std::vector<MugSpec> out;
  Rng rng(seed);
  const int max_samples = 500 * n;
  for (int sample = 0; sample < max_samples && static_cast<int>(out.size()) < n; ++sample) {
    MugSpec m;
    m.id = indexed_id("mug", static_cast<int>(out.size()));
    m.body_radius = rng.uniform(r.body_radius[0], r.body_radius[1]);
    m.body_height = rng.uniform(r.body_height[0], r.body_height[1]);
    m.wall_top_open = rng.bernoulli(r.open_top_probability);
    m.has_handle = rng.bernoulli(r.handle_probability);
    const double hw = rng.uniform(r.handle_width[0], r.handle_width[1]);
    const double hd = rng.uniform(r.handle_depth[0], r.handle_depth[1]);
    const double hh = rng.uniform(r.handle_height[0], r.handle_height[1]);
    const double hc = rng.uniform(r.handle_clearance[0], r.handle_clearance[1]);
    if (m.has_handle) {
      m.handle_width = hw;
      m.handle_depth = hd;
      m.handle_height = std::min(hh, m.body_height - 0.01);
      m.handle_clearance = hc;
    }
    try {
      m.affordable = derive_affordances(m, sim.gripper);
      for (auto c : m.affordable) plan_demo(m, c, sim);
    } catch (const Error&) {
      continue;
    }
    // Accept only if the remaining slots can still cover every category.
    auto next = covered;
    for (auto c : m.affordable) next[category_index(c)] += 1;
    int deficit = 0;
    for (int c = 0; c < kNumCategories; ++c) deficit += std::max(0, need - next[c]);
    const int slots_left = n - static_cast<int>(out.size()) - 1;
    if (deficit > slots_left) continue;
    covered = next;
    out.push_back(std::move(m));
  }
  if (static_cast<int>(out.size()) < n) {
    throw Error(ErrorKind::GenerationExhausted, "could not sample " + std::to_string(n) +
                                                    " mugs with full category coverage");
  }
  return out;
}

Dataset build_dataset(const std::vector<MugSpec>& catalog, int per_category, std::uint64_t seed,
                      const SimConfig& sim, BuildStats* stats) {
  if (per_category < 1) throw Error(ErrorKind::InvalidArgument, "per_category must be >= 1");
  Dataset ds;
  ds.sim = sim;
  BuildStats local;
  constexpr int kMaxAttempts = 20;
  // Most constrained category first. Each demo prefers a mug no other category has used, then the
  // least-used one, so a mug rarely carries conflicting grasps.
  std::vector<std::pair<AffordanceCategory, std::vector<std::size_t>>> plan;
  for (auto cat : kAllCategories) {
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < catalog.size(); ++i) {
      if (catalog[i].affordable.contains(cat)) eligible.push_back(i);
    }
    if (eligible.empty()) {
      throw Error(ErrorKind::InsufficientData,
                  "no mug affords " + std::string(category_name(cat)));
    }
    plan.emplace_back(cat, std::move(eligible));
  }
  std::stable_sort(plan.begin(), plan.end(),
                   [](const auto& a, const auto& b) { return a.second.size() < b.second.size(); });
  std::vector<int> uses(catalog.size(), 0);
  std::vector<std::set<AffordanceCategory>> used_for(catalog.size());
  std::vector<std::pair<int, Demo>> demos;
  for (const auto& [cat, eligible] : plan) {
    for (int k = 0; k < per_category; ++k) {
      const int index = category_index(cat) * per_category + k;
      Rng rng(mix_seed(seed, static_cast<std::uint64_t>(index)));
      std::vector<std::pair<std::uint64_t, std::size_t>> order;
      for (std::size_t i : eligible) order.emplace_back(rng.next_u64(), i);
      auto rank = [&](const std::pair<std::uint64_t, std::size_t>& e) {
        const auto& u = used_for[e.second];
        const bool conflict = !u.empty() && !(u.size() == 1 && u.contains(cat));
        return std::tuple{conflict, uses[e.second], e.first};
      };
      std::sort(order.begin(), order.end(), [&](const auto& a, const auto& b) { return rank(a) < rank(b); });
      bool done = false;
      for (int attempt = 0; attempt < kMaxAttempts && !done; ++attempt) {
        const std::size_t mi = order[static_cast<std::size_t>(attempt) % order.size()].second;
        const MugSpec& mug = catalog[mi];
        const std::uint64_t jitter_seed = rng.next_u64();
        local.plan_attempts += 1;
        try {
          const ExpertScript script = plan_demo(mug, cat, sim, jitter_seed);
          Demo demo = rollout_demo(mug, script, sim, indexed_id("traj", index));
          if (detect_interaction_bounds(demo.mug_trace) != *demo.trajectory.gt_segment) {
            throw Error(ErrorKind::DemoFailed, "interaction bounds disagree with the script");
          }
          demos.emplace_back(index, std::move(demo));
          uses[mi] += 1;
          used_for[mi].insert(cat);
          done = true;
        } catch (const Error&) {
          local.plan_failures += 1;
        }
      }
      if (!done) {
        throw Error(ErrorKind::DemoFailed, "no successful demo for trajectory " + std::to_string(index));
      }
    }
  }
  std::sort(demos.begin(), demos.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (auto& [index, demo] : demos) {
    ds.trajectories.push_back(std::move(demo.trajectory));
    ds.mug_traces.push_back(std::move(demo.mug_trace));
  }
  if (stats) *stats = local;
  return ds;
}

}  // namespace affcue
